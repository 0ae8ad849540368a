"""Analyzer, planner, executor and patcher roles wired into one derivation."""

from __future__ import annotations

import time

from ..errors import AllPointsSkipped, CrbError, PlanInvalid
from .executor import STEP_BUDGET, TOTAL_BUDGET, Executor
from .faults import INJECTIONS, LOW_CAP, LOW_DEGREE, injected_rules
from .patcher import Amendment, DeterministicPatcher, Patcher
from .plan import OPS, Plan, PlanStep, validate_plan, validate_steps
from .planner import Planner, TemplatePlanner, param_slugs
from .taxonomy import FailureClass, classify_failure, root_cause
from .trace import DerivationTrace, StepRecord
from .workspace import Workspace, analyze


def plan(spec, workspace, planner: Planner | None = None) -> Plan:
    planner = planner or TemplatePlanner()
    p = planner.plan(spec, workspace)
    validate_plan(p, workspace.names(), spec.targets)
    return p


def execute(p: Plan, workspace: Workspace, *, patcher=None, rules=None, seed: int = 0, trace=None,
            check: bool = True) -> DerivationTrace:
    spec = workspace.spec
    trace = trace or DerivationTrace(spec.id, p.planner, seed, targets=list(spec.targets))
    ex = Executor(workspace, patcher, rules or injected_rules(()), seed, check)
    return ex.run(p, trace)


def derive(spec, *, planner: Planner | None = None, patcher: Patcher | None = None, seed: int = 0,
           inject=(), validate: bool = True, n_points: int = 20, tol: float = 1e-6,
           include_plan: bool = True) -> DerivationTrace:
    """Analyze, plan, execute and (optionally) validate one scenario."""
    from .. import validation

    t0 = time.perf_counter()
    planner = planner or TemplatePlanner()
    patcher = patcher if patcher is not None else DeterministicPatcher()
    inject = list(inject)
    trace = DerivationTrace(spec.id, planner.id, seed, inject, targets=list(spec.targets))
    rules = injected_rules(inject)
    ws = analyze(spec)
    try:
        p = plan(spec, ws, planner)
    except CrbError as exc:
        trace.notes.append(f"{exc.kind}: {exc}")
        raw = getattr(exc, "details", {}).get("raw_replies")
        if raw:
            trace.notes.extend(f"raw reply: {r}" for r in raw)
        trace.wall_time = time.perf_counter() - t0
        return trace
    if include_plan:
        trace.plan = p.to_dict()
    execute(p, ws, patcher=patcher, rules=rules, seed=seed, trace=trace)
    if validate and trace.values:
        try:
            report = validation.validate(trace.values, spec, n_points=n_points, tol=tol, seed=seed)
            trace.validation = report.to_dict()
            trace.verdicts = {t: r.symbolic for t, r in report.targets.items() if r.symbolic is not None}
        except AllPointsSkipped as exc:
            trace.validation = {"passed": False, "error": f"{exc.kind}: {exc}", "seed": seed,
                                "n_points": n_points, "tol": tol}
    trace.wall_time = time.perf_counter() - t0
    return trace


__all__ = [
    "Amendment", "DerivationTrace", "DeterministicPatcher", "Executor", "FailureClass", "INJECTIONS", "LOW_CAP",
    "LOW_DEGREE", "OPS", "Patcher", "Plan", "PlanInvalid", "PlanStep", "Planner", "STEP_BUDGET", "StepRecord",
    "TOTAL_BUDGET", "TemplatePlanner", "Workspace", "analyze", "classify_failure", "derive", "execute",
    "injected_rules", "param_slugs", "plan", "root_cause", "validate_plan", "validate_steps",
]
