"""Symbol registry for a derivation workspace."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping

from ..errors import SchemaError, UnknownSymbol

KINDS = ("parameter", "structural", "index", "derived")
IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
RESERVED = frozenset({"sin", "cos"})


@dataclass(frozen=True)
class SymbolInfo:
    name: str
    kind: str = "parameter"
    positive: bool = False
    interval: tuple[float, float] | None = None
    definition: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "positive": self.positive}
        if self.interval is not None:
            out["interval"] = list(self.interval)
        if self.definition is not None:
            out["definition"] = self.definition
        return out


PI = SymbolInfo("pi", "structural", positive=True)


class SymbolTable(Mapping[str, SymbolInfo]):
    """Immutable name -> SymbolInfo map.  ``pi`` is always registered."""

    def __init__(self, entries=()):
        table: dict[str, SymbolInfo] = {"pi": PI}
        for info in entries:
            if not IDENT.match(info.name) or info.name in RESERVED:
                raise SchemaError(f"invalid symbol name {info.name!r}")
            if info.kind not in KINDS:
                raise SchemaError(f"symbol {info.name!r}: unknown kind {info.kind!r}")
            if info.name in table and info.name != "pi":
                raise SchemaError(f"duplicate symbol {info.name!r}")
            if info.kind == "derived" and not info.definition:
                raise SchemaError(f"derived symbol {info.name!r} needs a definition")
            table[info.name] = info
        self._table = table

    @classmethod
    def of(cls, **kinds: str) -> "SymbolTable":
        """Shorthand: ``SymbolTable.of(x="parameter", m="index")``."""
        return cls(SymbolInfo(name, kind) for name, kind in kinds.items())

    def __getitem__(self, name: str) -> SymbolInfo:
        try:
            return self._table[name]
        except KeyError:
            raise UnknownSymbol(name) from None

    def __contains__(self, name) -> bool:
        return name in self._table

    def __iter__(self) -> Iterator[str]:
        return iter(self._table)

    def __len__(self) -> int:
        return len(self._table)

    def names(self, kind: str) -> list[str]:
        return [n for n, info in self._table.items() if info.kind == kind]

    @property
    def indices(self) -> list[str]:
        return self.names("index")

    def require(self, name: str, kind: str | None = None) -> SymbolInfo:
        info = self[name]
        if kind is not None and info.kind != kind:
            raise UnknownSymbol(name, field=f"expected a {kind} symbol")
        return info

    def with_entries(self, extra) -> "SymbolTable":
        return SymbolTable([i for n, i in self._table.items() if n != "pi"] + list(extra))

    def to_dict(self) -> dict:
        return {n: i.to_dict() for n, i in self._table.items() if n != "pi"}
