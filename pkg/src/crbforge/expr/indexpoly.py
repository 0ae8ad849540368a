"""Polynomials in one or two discrete indices with expression coefficients."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

from ..errors import DegreeOverflow, NonPolynomialIndex
from .core import Expr, _pconst, current_rules, eval_numeric, from_poly, poly_of


class IndexPoly:
    """Immutable map ``degree tuple -> coefficient``; zero coefficients absent.

    ``indices`` fixes the meaning of each position in the degree tuples.
    """

    __slots__ = ("indices", "_terms", "_hash")

    def __init__(self, indices: Sequence[str], terms: Mapping[tuple, Expr] | None = None, *, check: bool = True):
        indices = tuple(indices)
        if not 1 <= len(indices) <= 2:
            raise ValueError("an IndexPoly carries one or two indices")
        kept = {}
        cap = current_rules().max_degree
        for deg, coeff in (terms or {}).items():
            deg = tuple(int(d) for d in deg)
            if len(deg) != len(indices):
                raise ValueError(f"degree tuple {deg} does not match indices {indices}")
            if any(d < 0 for d in deg):
                raise NonPolynomialIndex(f"negative index degree {deg}")
            if check and any(d > cap for d in deg):
                raise DegreeOverflow(f"index degree {deg} exceeds cap {cap}", degree=max(deg), cap=cap)
            coeff = coeff if coeff.is_canonical else from_poly(poly_of(coeff))
            if poly_of(coeff):
                kept[deg] = coeff
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "_terms", dict(sorted(kept.items())))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("IndexPoly is immutable")

    @property
    def terms(self) -> dict[tuple, Expr]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, *deg: int) -> Expr:
        if len(deg) == 1 and isinstance(deg[0], tuple):
            deg = deg[0]
        found = self._terms.get(tuple(deg))
        return found if found is not None else from_poly({})

    def degree(self, index: str | None = None) -> int:
        if not self._terms:
            return 0
        pos = 0 if index is None else self.indices.index(index)
        return max(d[pos] for d in self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def free_symbols(self) -> frozenset:
        out = set()
        for c in self._terms.values():
            out |= c.free_symbols
        return frozenset(out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexPoly):
            return NotImplemented
        return self.indices == other.indices and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self.indices, tuple(self._terms.items()))))
        return self._hash

    def __repr__(self) -> str:
        return f"IndexPoly({self.indices}, {self.to_text()!r})"

    def to_expr(self) -> Expr:
        """Fold back into a single expression with the indices as symbols."""
        from .core import Sym, _atom

        total: dict = {}
        for deg, coeff in self._terms.items():
            mono = frozenset((_atom(Sym(ix)), d) for ix, d in zip(self.indices, deg) if d)
            for m, c in poly_of(coeff).items():
                total[m | mono] = c
        return from_poly(total)

    def to_text(self) -> str:
        from .printer import to_text

        return to_text(self.to_expr())

    def evaluate(self, point: Mapping[str, float], index_values: Mapping[str, float]) -> float:
        total = 0.0
        for deg, coeff in self._terms.items():
            v = eval_numeric(coeff, point)
            for ix, d in zip(self.indices, deg):
                v *= float(index_values[ix]) ** d
            total += v
        return total

    def map_coeffs(self, fn) -> "IndexPoly":
        return IndexPoly(self.indices, {d: fn(c) for d, c in self._terms.items()})


def split_index_poly(expr: Expr, indices: Sequence[str]) -> IndexPoly:
    """Split a canonical expression into index-degree groups."""
    indices = list(indices)
    groups: dict[tuple, dict] = {}
    for mono, c in poly_of(expr).items():
        deg = [0] * len(indices)
        rest = []
        for atom, e in mono:
            if atom.rank == 1 and atom.name in indices:
                if e < 0:
                    raise NonPolynomialIndex(f"index {atom.name!r} appears with negative power")
                deg[indices.index(atom.name)] = e
            else:
                if atom.free_symbols & set(indices):
                    raise NonPolynomialIndex("index symbols may only appear polynomially")
                rest.append((atom, e))
        groups.setdefault(tuple(deg), {})[frozenset(rest)] = c
    if len(indices) > 2:
        raise NonPolynomialIndex("at most two index symbols are supported")
    if not indices:
        raise NonPolynomialIndex("no index symbols given")
    return IndexPoly(indices, {deg: from_poly(p) for deg, p in groups.items()})


def constant_poly(indices: Sequence[str], value: Expr | int | Fraction) -> IndexPoly:
    from .core import as_expr

    return IndexPoly(indices, {(0,) * len(indices): as_expr(value)})


__all__ = ["IndexPoly", "split_index_poly", "constant_poly", "_pconst"]
