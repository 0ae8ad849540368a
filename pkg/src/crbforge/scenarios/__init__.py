"""Scenario specifications and the built-in benchmark suite."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from ..errors import CrbError, SchemaError, UnknownSymbol
from ..expr import Expr, IndexPoly, SymbolInfo, SymbolTable, parse_expr, parse_index_poly

BUILTIN_IDS = ("S01", "S02", "S03", "S04", "S05")

_REQUIRED = ("id", "symbols", "phase_text", "params", "gain_sq_text", "noise_text", "index_ranges", "targets", "sampling")
_OPTIONAL = ("description", "references")


@dataclass(frozen=True)
class SamplingRule:
    """How one symbol is drawn at a sample point."""

    interval: tuple[float, float] | None = None
    exclude: tuple[float, float] | None = None
    choices: tuple[int, ...] | None = None

    @classmethod
    def from_json(cls, name: str, raw: Any) -> "SamplingRule":
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return cls(interval=(float(raw), float(raw)))
        if isinstance(raw, list):
            return cls(interval=_pair(name, raw))
        if not isinstance(raw, dict):
            raise SchemaError(f"sampling.{name}: expected [lo, hi] or an object")
        unknown = set(raw) - {"interval", "exclude", "choices", "value"}
        if unknown:
            raise SchemaError(f"sampling.{name}: unknown keys {sorted(unknown)}")
        if "value" in raw:
            v = float(raw["value"])
            return cls(interval=(v, v))
        if "choices" in raw:
            choices = raw["choices"]
            if not choices or not all(isinstance(c, int) and not isinstance(c, bool) for c in choices):
                raise SchemaError(f"sampling.{name}.choices: expected a non-empty list of integers")
            return cls(choices=tuple(choices))
        if "interval" not in raw:
            raise SchemaError(f"sampling.{name}: needs interval, choices or value")
        exclude = _pair(f"{name}.exclude", raw["exclude"]) if "exclude" in raw else None
        return cls(interval=_pair(name, raw["interval"]), exclude=exclude)

    def to_json(self) -> Any:
        if self.choices is not None:
            return {"choices": list(self.choices)}
        if self.exclude is None:
            return list(self.interval)
        return {"interval": list(self.interval), "exclude": list(self.exclude)}


def _pair(name: str, raw) -> tuple[float, float]:
    if (
        not isinstance(raw, list)
        or len(raw) != 2
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw)
    ):
        raise SchemaError(f"sampling.{name}: expected a [lo, hi] pair of numbers")
    lo, hi = float(raw[0]), float(raw[1])
    if lo > hi:
        raise SchemaError(f"sampling.{name}: lo > hi")
    return lo, hi


@dataclass(frozen=True)
class TargetRole:
    kind: str  # dphi | fim | det | crb
    params: tuple[int, ...] = ()


def target_role(name: str, params: tuple[str, ...]) -> TargetRole:
    """Decode a target name such as ``F_thetaR`` or ``crb_theta``."""
    if name == "det_F":
        return TargetRole("det")
    if name.startswith("crb_"):
        p = name[4:]
        if p in params:
            return TargetRole("crb", (params.index(p),))
    if name.startswith("F_"):
        rest = name[2:]
        for i, a in enumerate(params):
            for j, b in enumerate(params):
                if a + b == rest:
                    return TargetRole("fim", (min(i, j), max(i, j)))
    if name.startswith("d_phi"):
        for i, p in sorted(enumerate(params), key=lambda ip: -len(ip[1])):
            if name.endswith("_d_" + p):
                return TargetRole("dphi", (i,))
    raise SchemaError(f"target {name!r} does not name a phase derivative, FIM entry, det_F or CRB")


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    symbols: SymbolTable
    phase_text: str
    params: tuple[str, ...]
    gain_sq_text: str
    noise_text: str
    index_ranges: Mapping[str, str]
    targets: tuple[str, ...]
    sampling: Mapping[str, SamplingRule]
    description: str = ""
    references: Mapping[str, str] = field(default_factory=dict)

    @property
    def indices(self) -> tuple[str, ...]:
        return tuple(self.index_ranges)

    @property
    def derived(self) -> dict[str, str]:
        return {n: self.symbols[n].definition for n in self.symbols.names("derived")}

    def role(self, target: str) -> TargetRole:
        return target_role(target, self.params)

    @cached_property
    def reference_set(self) -> dict[str, Expr | IndexPoly]:
        """Parsed, canonical reference formulas keyed by target."""
        out = {}
        for target, text in self.references.items():
            fld = f"references.{target}"
            if self.role(target).kind == "dphi":
                out[target] = parse_index_poly(text, self.symbols, self.indices, field=fld)
            else:
                out[target] = parse_expr(text, self.symbols, field=fld)
        return out

    def with_ranges(self, **lengths: str | int) -> "ScenarioSpec":
        """Copy with some index ranges pinned, e.g. ``with_ranges(m=1)``."""
        ranges = dict(self.index_ranges)
        for ix, value in lengths.items():
            if ix not in ranges:
                raise SchemaError(f"{ix!r} is not an index of {self.id}")
            ranges[ix] = str(value)
        return replace(self, index_ranges=ranges)

    def with_sampling(self, **rules) -> "ScenarioSpec":
        """Copy with some sampling rules replaced (JSON-style values)."""
        sampling = dict(self.sampling)
        for name, raw in rules.items():
            sampling[name] = SamplingRule.from_json(name, raw)
        return replace(self, sampling=sampling)

    def range_length(self, index: str):
        """Range length as an expression (symbol or integer constant)."""
        return parse_expr(self.index_ranges[index], self.symbols, field=f"index_ranges.{index}")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "symbols": self.symbols.to_dict(),
            "phase_text": self.phase_text,
            "params": list(self.params),
            "gain_sq_text": self.gain_sq_text,
            "noise_text": self.noise_text,
            "index_ranges": dict(self.index_ranges),
            "targets": list(self.targets),
            "references": dict(self.references),
            "sampling": {k: v.to_json() for k, v in self.sampling.items()},
        }


def _symbols_from_json(raw) -> SymbolTable:
    if not isinstance(raw, dict):
        raise SchemaError("symbols: expected an object of name -> entry")
    entries = []
    for name, info in raw.items():
        if isinstance(info, str):
            info = {"kind": info}
        if not isinstance(info, dict):
            raise SchemaError(f"symbols.{name}: expected an object")
        unknown = set(info) - {"kind", "positive", "interval", "definition"}
        if unknown:
            raise SchemaError(f"symbols.{name}: unknown keys {sorted(unknown)}")
        interval = tuple(_pair(name, info["interval"])) if "interval" in info else None
        entries.append(SymbolInfo(
            name=name,
            kind=info.get("kind", "parameter"),
            positive=bool(info.get("positive", False)),
            interval=interval,
            definition=info.get("definition"),
        ))
    return SymbolTable(entries)


def _str_list(raw, fld: str) -> tuple[str, ...]:
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise SchemaError(f"{fld}: expected a list of strings")
    return tuple(raw)


def load_scenario(contents: str | bytes | Mapping) -> ScenarioSpec:
    """Parse and fully validate a scenario document."""
    if isinstance(contents, (str, bytes)):
        try:
            raw = json.loads(contents)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"scenario is not valid JSON: {exc}") from None
    else:
        raw = dict(contents)
    if not isinstance(raw, dict):
        raise SchemaError("scenario must be a JSON object")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise SchemaError(f"missing fields: {missing}")
    unknown = set(raw) - set(_REQUIRED) - set(_OPTIONAL)
    if unknown:
        raise SchemaError(f"unknown fields: {sorted(unknown)}")
    for key in ("id", "phase_text", "gain_sq_text", "noise_text"):
        if not isinstance(raw[key], str) or not raw[key].strip():
            raise SchemaError(f"{key}: expected a non-empty string")

    symbols = _symbols_from_json(raw["symbols"])
    params = _str_list(raw["params"], "params")
    targets = _str_list(raw["targets"], "targets")
    if not targets:
        raise SchemaError("targets: at least one target is required")
    if len(set(targets)) != len(targets):
        raise SchemaError("targets: duplicate names")
    for p in params:
        symbols.require(p, "parameter")
    if not 1 <= len(params) <= 4:
        raise SchemaError("params: between 1 and 4 parameters are supported")

    ranges = raw["index_ranges"]
    if not isinstance(ranges, dict) or not ranges:
        raise SchemaError("index_ranges: expected a non-empty object")
    if len(ranges) > 2:
        raise SchemaError("index_ranges: at most two indices are supported")
    for ix, length in ranges.items():
        symbols.require(ix, "index")
        if not isinstance(length, str):
            raise SchemaError(f"index_ranges.{ix}: expected a symbol name or integer literal")
        if length.isdigit():
            if int(length) < 1:
                raise SchemaError(f"index_ranges.{ix}: length must be positive")
        else:
            symbols.require(length, "structural")
    for ix in symbols.indices:
        if ix not in ranges:
            raise SchemaError(f"index symbol {ix!r} has no entry in index_ranges")

    references = raw.get("references") or {}
    if not isinstance(references, dict) or not all(isinstance(v, str) for v in references.values()):
        raise SchemaError("references: expected an object of target -> expression string")
    for key in references:
        if key not in targets:
            raise SchemaError(f"references.{key}: not a declared target")

    sampling_raw = raw["sampling"]
    if not isinstance(sampling_raw, dict):
        raise SchemaError("sampling: expected an object")
    sampling = {}
    for name, rule in sampling_raw.items():
        if name not in symbols:
            raise UnknownSymbol(name, field="sampling")
        sampling[name] = SamplingRule.from_json(name, rule)

    spec = ScenarioSpec(
        id=raw["id"],
        description=raw.get("description", ""),
        symbols=symbols,
        phase_text=raw["phase_text"],
        params=params,
        gain_sq_text=raw["gain_sq_text"],
        noise_text=raw["noise_text"],
        index_ranges=dict(ranges),
        targets=targets,
        references=dict(references),
        sampling=sampling,
    )
    _validate_texts(spec)
    return spec


def _validate_texts(spec: ScenarioSpec) -> None:
    syms = spec.symbols
    parse_index_poly(spec.phase_text, syms, spec.indices, field="phase_text")
    for fld in ("gain_sq_text", "noise_text"):
        parse_expr(getattr(spec, fld), syms, field=fld)
    for name, text in spec.derived.items():
        parse_expr(text, syms, field=f"symbols.{name}.definition")
    for target in spec.targets:
        spec.role(target)
    spec.reference_set  # parses every reference
    needed = {n for n, info in syms.items() if info.kind in ("parameter", "structural") and n != "pi"}
    missing = sorted(needed - set(spec.sampling))
    if missing:
        raise SchemaError(f"sampling does not cover {missing}")


def load_scenario_file(path: str | Path) -> ScenarioSpec:
    return load_scenario(Path(path).read_text())


def builtin(scenario_id: str) -> ScenarioSpec:
    if scenario_id not in BUILTIN_IDS:
        raise SchemaError(f"unknown built-in scenario {scenario_id!r}")
    text = resources.files(__package__).joinpath(f"{scenario_id}.json").read_text()
    return load_scenario(text)


def builtin_suite() -> list[ScenarioSpec]:
    return [builtin(i) for i in BUILTIN_IDS]


def resolve(ref: str) -> ScenarioSpec:
    """A built-in id (``S01``) or a path to a scenario file."""
    if ref in BUILTIN_IDS:
        return builtin(ref)
    path = Path(ref)
    if not path.is_file():
        raise FileNotFoundError(ref)
    return load_scenario_file(path)


__all__ = [
    "BUILTIN_IDS", "CrbError", "SamplingRule", "ScenarioSpec", "TargetRole", "builtin", "builtin_suite",
    "load_scenario", "load_scenario_file", "resolve", "target_role",
]
