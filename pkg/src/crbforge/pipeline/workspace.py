"""The symbolic workspace seeded from a scenario."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..calculus import SplitProduct
from ..expr import Expr, IndexPoly, SymbolTable, canonicalize, parse, parse_expr, parse_index_poly, substitute
from ..fisher import SymMatrix
from .plan import NAME_RE

Value = Expr | IndexPoly | SymMatrix | SplitProduct


@dataclass
class Workspace:
    spec: Any
    symbols: SymbolTable
    values: dict[str, Value] = field(default_factory=dict)

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __getitem__(self, name: str) -> Value:
        return self.values[name]

    def set(self, name: str, value: Value) -> None:
        if not NAME_RE.match(name):
            raise ValueError(f"invalid workspace name {name!r}")
        if isinstance(value, Expr):
            value = canonicalize(value)
        self.values[name] = value

    def names(self) -> list[str]:
        return list(self.values)

    def copy(self) -> "Workspace":
        return Workspace(self.spec, self.symbols, dict(self.values))

    @property
    def derived_bindings(self) -> dict[str, Expr]:
        return {name: parse_expr(text, self.symbols, field=f"symbols.{name}.definition")
                for name, text in self.spec.derived.items()}

    def expand_derived(self, value: Value) -> Value:
        """Replace derived symbols by their definitions."""
        bindings = self.derived_bindings
        if not bindings:
            return value
        if isinstance(value, IndexPoly):
            return value.map_coeffs(lambda c: substitute(c, bindings))
        return substitute(value, bindings)

    def parse(self, text: str, field: str = "") -> Expr | IndexPoly:
        value = parse(text, self.symbols, field=field)
        if isinstance(value, IndexPoly) and value.indices != tuple(self.spec.indices):
            value = parse_index_poly(text, self.symbols, self.spec.indices, field=field)
        return self.expand_derived(value)


def helper_name(symbol: str) -> str:
    return symbol if NAME_RE.match(symbol) else "def_" + symbol.lower()


def analyze(spec) -> Workspace:
    """Seed ``phi``, ``gain_sq``, ``noise`` and one helper per derived symbol."""
    ws = Workspace(spec, spec.symbols)
    for name, value in ws.derived_bindings.items():
        ws.set(helper_name(name), value)
    phi = parse_index_poly(spec.phase_text, spec.symbols, spec.indices, field="phase_text")
    ws.set("phi", ws.expand_derived(phi))
    ws.set("gain_sq", ws.parse(spec.gain_sq_text, field="gain_sq_text"))
    ws.set("noise", ws.parse(spec.noise_text, field="noise_text"))
    return ws
