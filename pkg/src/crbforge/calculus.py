"""Differentiation and closed-form index summation."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as F

from .errors import DegreeOverflow, ExponentOutOfTable, IndexDifferentiation, MissingIndex
from .expr import Expr, IndexPoly, SymbolTable, as_expr
from .expr.core import current_rules, diff_expr, from_poly, poly_mul, poly_of, _padd, _pconst, _pscale

# sum_{m=0}^{L-1} m^k = sum_j FAULHABER[k][j] * L^j
FAULHABER: tuple[tuple[F, ...], ...] = (
    (F(0), F(1)),
    (F(0), F(-1, 2), F(1, 2)),
    (F(0), F(1, 6), F(-1, 2), F(1, 3)),
    (F(0), F(0), F(1, 4), F(-1, 2), F(1, 4)),
    (F(0), F(-1, 30), F(0), F(1, 3), F(-1, 2), F(1, 5)),
    (F(0), F(0), F(-1, 12), F(0), F(5, 12), F(-1, 2), F(1, 6)),
    (F(0), F(1, 42), F(0), F(-1, 6), F(0), F(1, 2), F(-1, 2), F(1, 7)),
    (F(0), F(0), F(1, 12), F(0), F(-7, 24), F(0), F(7, 12), F(-1, 2), F(1, 8)),
    (F(0), F(-1, 30), F(0), F(2, 9), F(0), F(-7, 15), F(0), F(2, 3), F(-1, 2), F(1, 9)),
)
MAX_POWER = len(FAULHABER) - 1


def faulhaber(k: int, length: Expr | int) -> Expr:
    """Closed form of ``sum_{m=0}^{length-1} m^k``."""
    if not 0 <= k <= MAX_POWER:
        raise ExponentOutOfTable(f"no closed form stored for exponent {k}", exponent=k)
    base = poly_of(as_expr(length))
    total: dict = {}
    power = _pconst(1)
    for j, c in enumerate(FAULHABER[k]):
        if j:
            power = poly_mul(power, base)
        if c:
            total = _padd(total, _pscale(power, c))
    return from_poly(total)


def faulhaber_table(length: Expr | int) -> dict[int, Expr]:
    return {k: faulhaber(k, length) for k in range(MAX_POWER + 1)}


def _check_not_index(wrt: str, indices, symbols: SymbolTable | None) -> None:
    if wrt in indices:
        raise IndexDifferentiation(f"cannot differentiate with respect to index {wrt!r}")
    if symbols is not None and wrt in symbols and symbols[wrt].kind == "index":
        raise IndexDifferentiation(f"cannot differentiate with respect to index {wrt!r}")


def differentiate(e: Expr, wrt: str, symbols: SymbolTable | None = None) -> Expr:
    """Exact derivative of ``e`` with respect to the parameter ``wrt``."""
    if symbols is not None:
        symbols.require(wrt)
        _check_not_index(wrt, (), symbols)
    return diff_expr(e, wrt)


def differentiate_poly(p: IndexPoly, wrt: str, symbols: SymbolTable | None = None) -> IndexPoly:
    _check_not_index(wrt, p.indices, symbols)
    return IndexPoly(p.indices, {deg: diff_expr(c, wrt) for deg, c in p.items()})


def _same_indices(p: IndexPoly, q: IndexPoly) -> None:
    if p.indices != q.indices:
        raise MissingIndex(f"index sets differ: {p.indices} vs {q.indices}")


def mul_poly(p: IndexPoly, q: IndexPoly) -> IndexPoly:
    """Product of two index polynomials (coefficient convolution)."""
    _same_indices(p, q)
    cap = current_rules().max_degree
    acc: dict[tuple, dict] = {}
    for da, ca in p.items():
        pa = poly_of(ca)
        for db, cb in q.items():
            deg = tuple(x + y for x, y in zip(da, db))
            if any(d > cap for d in deg):
                raise DegreeOverflow(
                    f"product degree {deg} exceeds cap {cap}", degree=max(deg), cap=cap
                )
            acc[deg] = _padd(acc.get(deg, {}), poly_mul(pa, poly_of(cb)))
    return IndexPoly(p.indices, {d: from_poly(c) for d, c in acc.items()})


@dataclass(frozen=True)
class SplitProduct:
    """A deferred product ``p * q`` summed part by part.

    Used when the expanded product would exceed the index-degree cap: each
    pair of terms is summed against the closed-form table directly, so the
    oversized polynomial is never materialized.
    """

    left: IndexPoly
    right: IndexPoly

    def __post_init__(self):
        _same_indices(self.left, self.right)

    @property
    def indices(self) -> tuple[str, ...]:
        return self.left.indices

    def expand(self) -> IndexPoly:
        return mul_poly(self.left, self.right)

    @property
    def free_symbols(self) -> frozenset:
        return self.left.free_symbols | self.right.free_symbols


def sum_index(p: IndexPoly | SplitProduct, over: str, length: Expr | int) -> Expr | IndexPoly:
    """Replace ``m^k`` by its closed-form sum over ``m = 0..length-1``."""
    if over not in p.indices:
        raise MissingIndex(f"{over!r} is not an index of this polynomial", index=over)
    pos = p.indices.index(over)
    rest = tuple(ix for ix in p.indices if ix != over)
    table: dict[int, dict] = {}

    def closed(k: int) -> dict:
        if k not in table:
            table[k] = poly_of(faulhaber(k, length))
        return table[k]

    acc: dict[tuple, dict] = {}
    if isinstance(p, SplitProduct):
        pairs = (
            (tuple(x + y for x, y in zip(da, db)), poly_mul(poly_of(ca), poly_of(cb)))
            for da, ca in p.left.items()
            for db, cb in p.right.items()
        )
    else:
        pairs = ((deg, poly_of(c)) for deg, c in p.items())
    for deg, coeff in pairs:
        k = deg[pos]
        if k > MAX_POWER:
            raise ExponentOutOfTable(f"no closed form stored for exponent {k}", exponent=k)
        remaining = deg[:pos] + deg[pos + 1:]
        acc[remaining] = _padd(acc.get(remaining, {}), poly_mul(coeff, closed(k)))
    if not rest:
        return from_poly(acc.get((), {}))
    return IndexPoly(rest, {d: from_poly(c) for d, c in acc.items()})
