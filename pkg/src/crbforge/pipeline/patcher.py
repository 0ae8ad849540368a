"""Patcher interface and the deterministic repair ladder."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Protocol

from ..errors import PatchExhausted
from ..expr import RuleSet
from .plan import PlanStep


@dataclass(frozen=True)
class Amendment:
    """Replacement steps for one failed index, plus sticky rule overrides."""

    steps: tuple[PlanStep, ...]
    rules: Mapping[str, Any] = field(default_factory=dict)
    strategy: str = ""


class Patcher(Protocol):
    id: str

    def patch(self, record, step: PlanStep, error, workspace, rules: RuleSet) -> Amendment: ...


class DeterministicPatcher:
    """Tries, in order: streamed expansion, strict trig rules, split products.

    Each rung applies only to the failure it can plausibly fix and only if
    not already in effect; otherwise the step is given up.
    """

    id = "deterministic"

    def patch(self, record, step: PlanStep, error, workspace, rules: RuleSet) -> Amendment:
        kind = getattr(error, "kind", type(error).__name__)
        if kind == "ExpansionBlowup" and rules.order != "streamed":
            return Amendment((step,), {"order": "streamed"}, "expand-streamed")
        if kind in ("StepCheckFailed", "NotEqual") and rules.sabotage:
            return Amendment((step,), {"sabotage": ()}, "strict-trig")
        if kind == "DegreeOverflow" and step.op == "mul_poly" and not step.params.get("split"):
            return Amendment((replace(step, params={**step.params, "split": True}),), {}, "split-product")
        raise PatchExhausted(f"no repair strategy for {kind} in {step.op}")
