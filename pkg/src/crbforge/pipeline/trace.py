"""Step records and derivation traces (the report contract)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

STATUSES = ("ok", "failed", "patched-ok", "abandoned")
TRACE_VERSION = 1


@dataclass
class StepRecord:
    index: int
    op: str
    output: str
    status: str = "ok"
    error: dict | None = None  # {"kind": ..., "message": ...}
    failure_class: str | None = None
    revisions: int = 0
    patches: list[str] = field(default_factory=list)
    elapsed: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "index": self.index,
            "op": self.op,
            "output": self.output,
            "status": self.status,
            "error": self.error,
            "failure_class": self.failure_class,
            "revisions": self.revisions,
            "patches": list(self.patches),
        }
        if timing:
            out["elapsed"] = self.elapsed
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "StepRecord":
        return cls(
            index=raw["index"],
            op=raw["op"],
            output=raw.get("output", ""),
            status=raw["status"],
            error=raw.get("error"),
            failure_class=raw.get("failure_class"),
            revisions=raw.get("revisions", 0),
            patches=list(raw.get("patches", [])),
            elapsed=raw.get("elapsed", 0.0),
        )


@dataclass
class DerivationTrace:
    scenario: str
    planner: str
    seed: int = 0
    inject: list[str] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)
    outputs: dict[str, str] = field(default_factory=dict)
    verdicts: dict[str, str] = field(default_factory=dict)
    targets: list[str] = field(default_factory=list)
    plan: dict | None = None
    validation: dict | None = None
    notes: list[str] = field(default_factory=list)
    wall_time: float = 0.0
    # live values, never serialized
    values: dict[str, Any] = field(default_factory=dict, repr=False, compare=False)

    @property
    def total_revisions(self) -> int:
        return sum(r.revisions for r in self.steps)

    @property
    def missing_targets(self) -> list[str]:
        return [t for t in self.targets if t not in self.outputs]

    @property
    def complete(self) -> bool:
        return bool(self.targets) and not self.missing_targets

    @property
    def abandoned(self) -> bool:
        return any(r.status == "abandoned" for r in self.steps)

    @property
    def passed(self) -> bool:
        if not self.complete or self.abandoned:
            return False
        if any(v == "NotEqual" for v in self.verdicts.values()):
            return False
        return self.validation is None or bool(self.validation.get("passed"))

    def status_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in STATUSES}
        for r in self.steps:
            counts[r.status] += 1
        return counts

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "trace_version": TRACE_VERSION,
            "scenario": self.scenario,
            "planner": self.planner,
            "seed": self.seed,
            "inject": list(self.inject),
            "targets": list(self.targets),
            "steps": [r.to_dict(timing) for r in self.steps],
            "outputs": dict(self.outputs),
            "verdicts": dict(self.verdicts),
            "total_revisions": self.total_revisions,
            "plan": self.plan,
            "validation": self.validation,
            "notes": list(self.notes),
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "DerivationTrace":
        return cls(
            scenario=raw["scenario"],
            planner=raw["planner"],
            seed=raw.get("seed", 0),
            inject=list(raw.get("inject", [])),
            steps=[StepRecord.from_dict(s) for s in raw.get("steps", [])],
            outputs=dict(raw.get("outputs", {})),
            verdicts=dict(raw.get("verdicts", {})),
            targets=list(raw.get("targets", [])),
            plan=raw.get("plan"),
            validation=raw.get("validation"),
            notes=list(raw.get("notes", [])),
            wall_time=raw.get("wall_time", 0.0),
        )

    @classmethod
    def from_json(cls, text: str) -> "DerivationTrace":
        return cls.from_dict(json.loads(text))
