"""Runs a plan step by step, checking and repairing as it goes."""

from __future__ import annotations

import time
from dataclasses import dataclass

from ..errors import CrbError, PatchExhausted, PlanInvalid
from ..expr import DEFAULT_RULES, IndexPoly, RuleSet, to_text, use_rules
from ..fisher import SymMatrix
from .checks import check_points, check_step
from .faults import apply_overrides
from .ops import run_op
from .plan import Plan, PlanStep, validate_steps
from .taxonomy import classify_failure
from .trace import DerivationTrace, StepRecord
from .workspace import Workspace

STEP_BUDGET = 3
TOTAL_BUDGET = 10


def error_info(exc: BaseException) -> dict:
    return {"kind": getattr(exc, "kind", type(exc).__name__), "message": str(exc)}


def value_text(value) -> str:
    if isinstance(value, IndexPoly):
        return value.to_text()
    if isinstance(value, SymMatrix):
        return "[" + "; ".join(", ".join(to_text(e) for e in row) for row in value.entries) + "]"
    return to_text(value)


def resolve_target(ws: Workspace, ref):
    value = ws.values.get(ref["value"])
    if value is None:
        return None
    entry = ref.get("entry")
    if entry is not None:
        if not isinstance(value, SymMatrix):
            return None
        return value[entry[0], entry[1]]
    return value


@dataclass
class Executor:
    workspace: Workspace
    patcher: object | None = None
    rules: RuleSet = DEFAULT_RULES
    seed: int = 0
    check: bool = True
    step_budget: int = STEP_BUDGET
    total_budget: int = TOTAL_BUDGET

    def _attempt(self, steps: tuple[PlanStep, ...], points) -> None:
        ws = self.workspace
        with use_rules(self.rules):
            staged = ws.copy()
            for step in steps:
                value = run_op(step, staged)
                if self.check:
                    check_step(step, staged, value, points)
                staged.set(step.output, value)
        ws.values = staged.values

    def run(self, plan: Plan, trace: DerivationTrace) -> DerivationTrace:
        ws = self.workspace
        points = check_points(ws.spec, self.seed) if self.check else []
        used = 0
        t_start = time.perf_counter()
        for step in plan.steps:
            rec = StepRecord(step.index, step.op, step.output)
            trace.steps.append(rec)
            current: tuple[PlanStep, ...] = (step,)
            t0 = time.perf_counter()
            while True:
                try:
                    self._attempt(current, points)
                    if rec.revisions:
                        rec.status = "patched-ok"
                    break
                except Exception as exc:  # failures live in the trace
                    if rec.error is None:
                        rec.error = error_info(exc)
                        rec.failure_class = classify_failure(rec.error["kind"], step.op).value
                    rec.status = "failed"
                    if self.patcher is None:
                        break
                    if rec.revisions >= self.step_budget or used >= self.total_budget:
                        rec.status = "abandoned"
                        rec.patches.append("budget-exhausted")
                        break
                    try:
                        amend = self.patcher.patch(rec, step, exc, ws, self.rules)
                        validate_steps(amend.steps, ws.names())
                        if step.output not in {s.output for s in amend.steps}:
                            raise PlanInvalid(f"amendment does not produce {step.output!r}")
                    except PatchExhausted as pe:
                        rec.status = "abandoned"
                        rec.patches.append(f"exhausted: {pe}")
                        break
                    except CrbError as pi:
                        rec.status = "abandoned"
                        rec.patches.append(f"patch failed: {pi.kind}: {pi}")
                        break
                    if amend.rules:
                        self.rules = apply_overrides(self.rules, amend.rules)
                    current = tuple(amend.steps)
                    rec.revisions += 1
                    used += 1
                    rec.patches.append(amend.strategy or "amendment")
            rec.elapsed = time.perf_counter() - t0
            if rec.status in ("failed", "abandoned"):
                break
        for target, ref in plan.targets.items():
            value = resolve_target(ws, ref)
            if value is not None:
                trace.values[target] = value
                trace.outputs[target] = value_text(value)
        trace.wall_time = time.perf_counter() - t_start
        return trace
