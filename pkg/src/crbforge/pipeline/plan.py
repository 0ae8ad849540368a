"""Straight-line derivation plans and their validator."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from ..errors import PlanInvalid

OPS = (
    "define", "differentiate", "differentiate_poly", "mul_poly", "sum_index", "assemble_fim",
    "determinant", "crb", "simplify", "substitute", "assert_equal",
)
NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")

# (min inputs, max inputs or None, required params)
_ARITY: dict[str, tuple[int, int | None, tuple[str, ...]]] = {
    "define": (0, 0, ("text",)),
    "differentiate": (1, 1, ("wrt",)),
    "differentiate_poly": (1, 1, ("wrt",)),
    "mul_poly": (2, 2, ()),
    "sum_index": (1, 1, ("index",)),
    "assemble_fim": (3, None, ("dim",)),
    "determinant": (1, 1, ()),
    "crb": (1, 2, ("param",)),
    "simplify": (1, 1, ()),
    "substitute": (1, 1, ("bindings",)),
    "assert_equal": (2, 2, ()),
}


@dataclass(frozen=True)
class PlanStep:
    index: int
    op: str
    inputs: tuple[str, ...]
    output: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "op": self.op,
            "inputs": list(self.inputs),
            "params": dict(self.params),
            "output": self.output,
        }

    @classmethod
    def from_dict(cls, raw: Mapping, index: int | None = None) -> "PlanStep":
        if not isinstance(raw, Mapping):
            raise PlanInvalid("each step must be an object")
        unknown = set(raw) - {"index", "op", "inputs", "params", "output"}
        if unknown:
            raise PlanInvalid(f"step has unknown fields {sorted(unknown)}")
        op = raw.get("op")
        inputs = raw.get("inputs", [])
        params = raw.get("params", {}) or {}
        output = raw.get("output")
        if not isinstance(op, str):
            raise PlanInvalid("step op must be a string")
        if not isinstance(inputs, list) or not all(isinstance(x, str) for x in inputs):
            raise PlanInvalid(f"step {op!r}: inputs must be a list of names")
        if not isinstance(params, Mapping):
            raise PlanInvalid(f"step {op!r}: params must be an object")
        if not isinstance(output, str):
            raise PlanInvalid(f"step {op!r}: output must be a name")
        idx = raw.get("index", index) if index is None else index
        if not isinstance(idx, int):
            raise PlanInvalid("step index must be an integer")
        return cls(idx, op, tuple(inputs), output, dict(params))


@dataclass(frozen=True)
class Plan:
    """Ordered steps plus where each target's value ends up.

    ``targets`` maps a target name to ``{"value": name}`` or, for a FIM
    entry, ``{"value": name, "entry": [i, j]}``.
    """

    steps: tuple[PlanStep, ...]
    targets: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    planner: str = "template"

    def __len__(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {
            "planner": self.planner,
            "steps": [s.to_dict() for s in self.steps],
            "targets": {k: dict(v) for k, v in self.targets.items()},
        }

    @classmethod
    def from_dict(cls, raw: Mapping, planner: str | None = None) -> "Plan":
        if not isinstance(raw, Mapping):
            raise PlanInvalid("plan must be an object with steps and targets")
        steps_raw = raw.get("steps")
        if not isinstance(steps_raw, list):
            raise PlanInvalid("plan.steps must be a list")
        targets = raw.get("targets", {})
        if not isinstance(targets, Mapping):
            raise PlanInvalid("plan.targets must be an object")
        steps = tuple(PlanStep.from_dict(s, i) for i, s in enumerate(steps_raw))
        return cls(steps, {k: dict(v) if isinstance(v, Mapping) else v for k, v in targets.items()},
                   planner or raw.get("planner", "external"))

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for s in self.steps:
            out[s.op] = out.get(s.op, 0) + 1
        return out


def check_step_shape(step: PlanStep) -> None:
    if step.op not in _ARITY:
        raise PlanInvalid(f"unknown op {step.op!r}", op=step.op, step=step.index)
    lo, hi, required = _ARITY[step.op]
    n = len(step.inputs)
    if n < lo or (hi is not None and n > hi):
        raise PlanInvalid(f"step {step.index} ({step.op}): wrong number of inputs ({n})", step=step.index)
    for key in required:
        if key not in step.params:
            raise PlanInvalid(f"step {step.index} ({step.op}): missing param {key!r}", step=step.index)
    if not NAME_RE.match(step.output):
        raise PlanInvalid(f"step {step.index}: invalid output name {step.output!r}", step=step.index)


def validate_steps(steps: Iterable[PlanStep], defined: Iterable[str]) -> set[str]:
    """SSA check; returns the set of names defined afterwards."""
    names = set(defined)
    for step in steps:
        check_step_shape(step)
        for name in step.inputs:
            if name not in names:
                raise PlanInvalid(
                    f"step {step.index} ({step.op}) reads undefined name {name!r}", step=step.index, name=name
                )
        if step.output in names:
            raise PlanInvalid(f"step {step.index} redefines {step.output!r}", step=step.index, name=step.output)
        names.add(step.output)
    return names


def validate_plan(plan: Plan, defined: Iterable[str], targets: Iterable[str] | None = None) -> None:
    """Raise :class:`PlanInvalid` unless ``plan`` is executable from ``defined``."""
    for i, step in enumerate(plan.steps):
        if step.index != i:
            raise PlanInvalid(f"step indices must run 0..n-1 (got {step.index} at position {i})")
    names = validate_steps(plan.steps, defined)
    for target, ref in plan.targets.items():
        if not isinstance(ref, Mapping) or not isinstance(ref.get("value"), str):
            raise PlanInvalid(f"target {target!r}: reference must name a value")
        if ref["value"] not in names:
            raise PlanInvalid(f"target {target!r} refers to undefined {ref['value']!r}")
        entry = ref.get("entry")
        if entry is not None and (
            not isinstance(entry, list) or len(entry) != 2 or not all(isinstance(x, int) for x in entry)
        ):
            raise PlanInvalid(f"target {target!r}: entry must be [i, j]")
    if targets is not None:
        unknown = set(plan.targets) - set(targets)
        if unknown:
            raise PlanInvalid(f"plan writes undeclared targets {sorted(unknown)}")
