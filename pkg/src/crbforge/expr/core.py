"""Immutable expression trees and the canonicalizing kernel.

Canonical form is an expanded sum of monomials.  A monomial is an exact
rational coefficient times a product of *atoms* raised to integer powers:

* ``Sym``            any integer exponent
* ``Cos(arg)``       any integer exponent
* ``Sin(arg)``       exponent 1 only (``sin^2 -> 1 - cos^2``)
* ``Add`` (a sum)    negative exponents only; the sum is content-normalized
                     so that its leading term has coefficient 1 and no
                     common symbol/cosine factor.

Internally a canonical value is a ``dict`` mapping ``frozenset`` of
``(atom, exponent)`` pairs to ``Fraction``.  Trees are built from that dict
with terms and factors sorted by :pyattr:`Expr.key`.
"""

from __future__ import annotations

import contextlib
import contextvars
import math
import threading
import weakref
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

from ..errors import (
    DivisionByZero,
    ExpansionBlowup,
    NonFiniteResult,
    UnboundSymbol,
    UnknownSymbol,
)

# Numeric value of the builtin ``pi`` symbol.
BUILTIN_VALUES = {"pi": math.pi}


# ---------------------------------------------------------------------------
# rule context


@dataclass(frozen=True)
class RuleSet:
    """Knobs of the rewrite engine.

    ``order`` selects how products of sums are expanded: ``"materialize"``
    builds every raw product term before collecting (the cap bounds the raw
    count), ``"streamed"`` collects while expanding (the cap bounds distinct
    monomials).  ``sabotage`` names deliberately broken rules for fault
    injection.
    """

    cap: int = 10_000
    order: str = "materialize"
    sabotage: frozenset = field(default_factory=frozenset)
    max_degree: int = 8

    def strict(self) -> "RuleSet":
        return replace(self, sabotage=frozenset())

    def to_dict(self) -> dict:
        return {
            "cap": self.cap,
            "order": self.order,
            "sabotage": sorted(self.sabotage),
            "max_degree": self.max_degree,
        }


DEFAULT_RULES = RuleSet()
_RULES: contextvars.ContextVar[RuleSet] = contextvars.ContextVar("crbforge_rules", default=DEFAULT_RULES)


def current_rules() -> RuleSet:
    return _RULES.get()


@contextlib.contextmanager
def use_rules(rules: RuleSet) -> Iterator[RuleSet]:
    token = _RULES.set(rules)
    try:
        yield rules
    finally:
        _RULES.reset(token)


# ---------------------------------------------------------------------------
# nodes


class Expr:
    """Base class of expression nodes.  Nodes are immutable."""

    __slots__ = ("_hash", "_key", "_poly", "_free", "_canon", "__weakref__")
    rank = -1

    def __init__(self) -> None:
        self._hash = None
        self._key = None
        self._poly = None
        self._free = None
        self._canon = False

    # structural identity -------------------------------------------------
    def _args(self) -> tuple:
        raise NotImplementedError

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.rank, self._args()))
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expr) or other.rank != self.rank:
            return False
        if hash(self) != hash(other):
            return False
        return self._args() == other._args()

    def __ne__(self, other: object) -> bool:
        return not self.__eq__(other)

    def __setattr__(self, name, value):
        if name.startswith("_"):
            object.__setattr__(self, name, value)
        else:
            raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def key(self) -> tuple:
        """Total-order sort key: node kind, then symbol id, then children."""
        if self._key is None:
            self._key = self._make_key()
        return self._key

    def _make_key(self) -> tuple:
        raise NotImplementedError

    @property
    def children(self) -> tuple["Expr", ...]:
        return ()

    @property
    def free_symbols(self) -> frozenset:
        if self._free is None:
            out = set()
            for child in self.children:
                out |= child.free_symbols
            self._free = frozenset(out)
        return self._free

    @property
    def is_canonical(self) -> bool:
        return self._canon

    def __repr__(self) -> str:
        from .printer import to_text

        return f"Expr({to_text(self)!r})"

    def __str__(self) -> str:
        from .printer import to_text

        return to_text(self)

    # arithmetic returns canonical results --------------------------------
    def __add__(self, other):
        return from_poly(_padd(poly_of(self), poly_of(as_expr(other))))

    __radd__ = __add__

    def __sub__(self, other):
        return from_poly(_padd(poly_of(self), _pscale(poly_of(as_expr(other)), -1)))

    def __rsub__(self, other):
        return as_expr(other).__sub__(self)

    def __neg__(self):
        return from_poly(_pscale(poly_of(self), -1))

    def __mul__(self, other):
        return from_poly(poly_mul(poly_of(self), poly_of(as_expr(other))))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return from_poly(poly_mul(poly_of(self), poly_pow(poly_of(as_expr(other)), -1)))

    def __rtruediv__(self, other):
        return as_expr(other).__truediv__(self)

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("only integer exponents are supported")
        return from_poly(poly_pow(poly_of(self), n))


class Const(Expr):
    __slots__ = ("value",)
    rank = 0

    def __init__(self, value) -> None:
        super().__init__()
        object.__setattr__(self, "value", Fraction(value))

    def _args(self):
        return (self.value,)

    def _make_key(self):
        return (0, self.value)

    @property
    def free_symbols(self):
        return frozenset()


class Sym(Expr):
    __slots__ = ("name",)
    rank = 1

    def __init__(self, name: str) -> None:
        super().__init__()
        object.__setattr__(self, "name", name)

    def _args(self):
        return (self.name,)

    def _make_key(self):
        return (1, self.name)

    @property
    def free_symbols(self):
        return frozenset((self.name,))


class _Func(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr) -> None:
        super().__init__()
        object.__setattr__(self, "arg", arg)

    def _args(self):
        return (self.arg,)

    def _make_key(self):
        return (self.rank, self.arg.key)

    @property
    def children(self):
        return (self.arg,)


class Cos(_Func):
    __slots__ = ()
    rank = 2


class Sin(_Func):
    __slots__ = ()
    rank = 3


class Add(Expr):
    __slots__ = ("terms",)
    rank = 4

    def __init__(self, terms: Iterable[Expr]) -> None:
        super().__init__()
        object.__setattr__(self, "terms", tuple(terms))

    def _args(self):
        return self.terms

    def _make_key(self):
        return (4, tuple(t.key for t in self.terms))

    @property
    def children(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)
    rank = 5

    def __init__(self, factors: Iterable[Expr]) -> None:
        super().__init__()
        object.__setattr__(self, "factors", tuple(factors))

    def _args(self):
        return self.factors

    def _make_key(self):
        return (5, tuple(f.key for f in self.factors))

    @property
    def children(self):
        return self.factors


class Pow(Expr):
    __slots__ = ("base", "exp")
    rank = 6

    def __init__(self, base: Expr, exp: int) -> None:
        super().__init__()
        if not isinstance(exp, int):
            raise TypeError("Pow exponent must be an integer")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exp", exp)

    def _args(self):
        return (self.base, self.exp)

    def _make_key(self):
        return (6, self.base.key, self.exp)

    @property
    def children(self):
        return (self.base,)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)):
        return from_poly(_pconst(value))
    raise TypeError(f"cannot use {type(value).__name__} in an expression (no floats)")


# ---------------------------------------------------------------------------
# polynomial engine

_ONE_MONO: frozenset = frozenset()


def _pconst(value) -> dict:
    value = Fraction(value)
    return {_ONE_MONO: value} if value else {}


def _padd(p: dict, q: dict) -> dict:
    if len(p) < len(q):
        p, q = q, p
    out = dict(p)
    for mono, c in q.items():
        v = out.get(mono, 0) + c
        if v:
            out[mono] = v
        else:
            out.pop(mono, None)
    return out


def _pscale(p: dict, c) -> dict:
    c = Fraction(c)
    if not c:
        return {}
    return {m: v * c for m, v in p.items()}


def _mono_key(mono: frozenset) -> tuple:
    return tuple(sorted((a.key, e) for a, e in mono))


def _norm_mono(exps: dict):
    """Normalize a merged exponent map.

    Returns ``(mono, None)`` when the map is already canonical, otherwise
    ``(None, poly)`` holding the expanded equivalent.
    """
    simple = {}
    pending = []
    for atom, e in exps.items():
        if e == 0:
            continue
        if (atom.rank == 3 and e != 1) or (atom.rank == 4 and e > 0):
            pending.append((atom, e))
        else:
            simple[atom] = e
    if not pending:
        return frozenset(simple.items()), None
    poly = {frozenset(simple.items()): Fraction(1)}
    for atom, e in sorted(pending, key=lambda ae: ae[0].key):
        if atom.rank == 3:
            poly = poly_mul(poly, _sin_power(atom, e))
        else:
            poly = poly_mul(poly, poly_pow(poly_of(atom), e))
    return None, poly


def _mono_mul(m1: frozenset, m2: frozenset):
    if not m1:
        return m2, None
    if not m2:
        return m1, None
    exps = dict(m1)
    for atom, e in m2:
        exps[atom] = exps.get(atom, 0) + e
    return _norm_mono(exps)


def poly_mul(p: dict, q: dict) -> dict:
    if not p or not q:
        return {}
    rules = _RULES.get()
    cap = rules.cap
    streamed = rules.order == "streamed"
    if not streamed and len(p) * len(q) > cap:
        raise ExpansionBlowup(
            f"product of {len(p)} x {len(q)} terms exceeds expansion cap {cap}",
            terms=len(p) * len(q),
            cap=cap,
        )
    out: dict = {}
    get = out.get
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            mono, extra = _mono_mul(m1, m2)
            if extra is None:
                out[mono] = get(mono, 0) + c1 * c2
            else:
                c = c1 * c2
                for mm, cc in extra.items():
                    out[mm] = get(mm, 0) + c * cc
        if streamed and len(out) > cap:
            raise ExpansionBlowup(
                f"collected expansion exceeds cap {cap}", terms=len(out), cap=cap
            )
    result = {m: c for m, c in out.items() if c}
    if len(result) > cap:
        raise ExpansionBlowup(f"expansion of {len(result)} terms exceeds cap {cap}", terms=len(result), cap=cap)
    return result


def _lead(p: dict) -> frozenset:
    return min(p, key=_mono_key)


def poly_pow(p: dict, n: int) -> dict:
    if n == 0:
        return _pconst(1)
    if n == 1:
        return p
    if not p:
        if n < 0:
            raise DivisionByZero("division by the zero expression")
        return {}
    if n > 0:
        result = p
        for _ in range(n - 1):
            result = poly_mul(result, p)
        return result
    if len(p) == 1:
        ((mono, c),) = p.items()
        inv_mono, extra = _norm_mono({a: e * n for a, e in mono})
        coeff = c**n
        if extra is None:
            return {inv_mono: coeff}
        return _pscale(extra, coeff)
    # negative power of a proper sum: pull out content, keep the rest as an atom
    shared = None
    for mono in p:
        exps = {a: e for a, e in mono if a.rank in (1, 2)}
        if shared is None:
            shared = exps
        else:
            shared = {a: min(e, exps.get(a, 0)) for a, e in shared.items()}
            shared.update({a: min(e, 0) for a, e in exps.items() if a not in shared})
    shared = {a: e for a, e in shared.items() if e}
    prim = {}
    for mono, c in p.items():
        exps = dict(mono)
        for a, e in shared.items():
            exps[a] = exps.get(a, 0) - e
        prim[frozenset((a, e) for a, e in exps.items() if e)] = c
    lead_c = prim[_lead(prim)]
    prim = _pscale(prim, 1 / lead_c)
    atom = _atom(from_poly(prim))
    result_exps = {a: e * n for a, e in shared.items()}
    result_exps[atom] = n
    return {frozenset(result_exps.items()): lead_c**n}


def _one_minus_cos2(cos_atom: Expr) -> dict:
    """``sin^2 x`` rewritten in the cosine basis."""
    cos2 = frozenset(((cos_atom, 2),))
    if "sign-flip" in _RULES.get().sabotage:
        return {cos2: Fraction(1), _ONE_MONO: Fraction(-1)}
    return {_ONE_MONO: Fraction(1), cos2: Fraction(-1)}


def _sin_power(sin_atom: Sin, e: int) -> dict:
    cos_atom = _cos_atom(sin_atom.arg)
    base = _one_minus_cos2(cos_atom)
    if e % 2 == 0:
        return poly_pow(base, e // 2)
    return poly_mul({frozenset(((sin_atom, 1),)): Fraction(1)}, poly_pow(base, (e - 1) // 2))


def _cos_atom(arg: Expr) -> Cos:
    return _atom(Cos(arg))


def _sin_atom(arg: Expr) -> Sin:
    return _atom(Sin(arg))


def _chebyshev(n: int, second_kind: bool) -> list[int]:
    """Integer coefficients of T_n (or U_n) in ascending powers."""
    prev = [1]
    cur = [0, 2] if second_kind else [0, 1]
    if n == 0:
        return prev
    for _ in range(n - 1):
        nxt = [0] + [2 * c for c in cur]
        for i, c in enumerate(prev):
            nxt[i] -= c
        prev, cur = cur, nxt
    return cur


_MAX_MULTIPLE_ANGLE = 32


def _trig(name: str, arg: dict) -> dict:
    if not arg:
        return {} if name == "sin" else _pconst(1)
    sign = 1
    if arg[_lead(arg)] < 0:
        arg = _pscale(arg, -1)
        if name == "sin":
            sign = -1
    if len(arg) == 1:
        ((mono, c),) = arg.items()
        if c.denominator == 1 and 2 <= c <= _MAX_MULTIPLE_ANGLE:
            n = int(c)
            base = from_poly({mono: Fraction(1)})
            cos_atom = _cos_atom(base)
            if name == "cos":
                coeffs = _chebyshev(n, second_kind=False)
                out = {}
            else:
                coeffs = _chebyshev(n - 1, second_kind=True)
                out = {}
            for k, ck in enumerate(coeffs):
                if ck:
                    out[frozenset(((cos_atom, k),)) if k else _ONE_MONO] = Fraction(ck * sign)
            if name == "sin":
                out = poly_mul({frozenset(((_sin_atom(base), 1),)): Fraction(1)}, out)
            return out
    node = from_poly(arg)
    atom = _sin_atom(node) if name == "sin" else _cos_atom(node)
    return {frozenset(((atom, 1),)): Fraction(sign)}


# ---------------------------------------------------------------------------
# tree <-> polynomial

_ATOMS: "weakref.WeakValueDictionary[Expr, Expr]" = weakref.WeakValueDictionary()
_ATOMS_LOCK = threading.Lock()


def _atom(node: Expr) -> Expr:
    """Share one object per distinct atom; keeps memo-by-identity effective."""
    found = _ATOMS.get(node)
    if found is not None:
        return found
    if node.rank != 4:
        node._poly = {frozenset(((node, 1),)): Fraction(1)}
    node._canon = True
    with _ATOMS_LOCK:
        return _ATOMS.setdefault(node, node)


def _term_node(mono: frozenset, c: Fraction) -> Expr:
    factors = []
    for atom, e in sorted(mono, key=lambda ae: ae[0].key):
        if e == 1:
            factors.append(atom)
        else:
            f = Pow(atom, e)
            f._poly = {frozenset(((atom, e),)): Fraction(1)}
            f._canon = True
            factors.append(f)
    if not factors:
        node = Const(c)
    elif c == 1 and len(factors) == 1:
        return factors[0]
    elif c == 1:
        node = Mul(factors)
    else:
        node = Mul([Const(c)] + factors)
    node._poly = {mono: c} if c else {}
    node._canon = True
    return node


def from_poly(poly: dict) -> Expr:
    """Build the canonical tree of a polynomial dict."""
    if not poly:
        node = Const(0)
        node._poly = {}
        node._canon = True
        return node
    if len(poly) == 1:
        ((mono, c),) = poly.items()
        return _term_node(mono, c)
    items = sorted(poly.items(), key=lambda mc: _mono_key(mc[0]))
    node = Add([_term_node(m, c) for m, c in items])
    node._poly = dict(poly)
    node._canon = True
    return node


def poly_of(e: Expr) -> dict:
    if e._poly is not None:
        return e._poly
    poly = _from_tree(e, None, {})
    e._poly = poly
    return poly


def _from_tree(e: Expr, subs: Mapping[str, dict] | None, memo: dict) -> dict:
    if e._poly is not None and (not subs or not (e.free_symbols & subs.keys())):
        return e._poly
    if e._canon and not subs:
        return e._poly
    cached = memo.get(id(e))
    if cached is not None:
        return cached[1]
    if isinstance(e, Const):
        out = _pconst(e.value)
    elif isinstance(e, Sym):
        if subs and e.name in subs:
            out = subs[e.name]
        else:
            out = {frozenset(((_atom(Sym(e.name)), 1),)): Fraction(1)}
    elif isinstance(e, Add):
        out = {}
        for t in e.terms:
            out = _padd(out, _from_tree(t, subs, memo))
    elif isinstance(e, Mul):
        out = _pconst(1)
        for f in e.factors:
            out = poly_mul(out, _from_tree(f, subs, memo))
            if not out:
                break
    elif isinstance(e, Pow):
        out = poly_pow(_from_tree(e.base, subs, memo), e.exp)
    elif isinstance(e, Sin):
        out = _trig("sin", _from_tree(e.arg, subs, memo))
    elif isinstance(e, Cos):
        out = _trig("cos", _from_tree(e.arg, subs, memo))
    else:  # pragma: no cover - closed set of node types
        raise TypeError(type(e).__name__)
    memo[id(e)] = (e, out)
    return out


def canonicalize(e: Expr) -> Expr:
    """Return the canonical form of ``e`` under the active rule set."""
    if e._canon:
        return e
    return from_poly(poly_of(e))


def substitute(e: Expr, bindings: Mapping[str, Expr], symbols=None) -> Expr:
    """Simultaneous substitution followed by canonicalization."""
    if symbols is not None:
        for name in bindings:
            if name not in symbols:
                raise UnknownSymbol(name)
    if not bindings:
        return canonicalize(e)
    subs = {name: poly_of(as_expr(value)) for name, value in bindings.items()}
    return from_poly(_from_tree(e, subs, {}))


def is_zero(e: Expr) -> bool:
    return not poly_of(e)


def const_value(e: Expr) -> Fraction | None:
    """Exact value of a constant expression, else None."""
    p = poly_of(e)
    if not p:
        return Fraction(0)
    if len(p) == 1 and _ONE_MONO in p:
        return p[_ONE_MONO]
    return None


# ---------------------------------------------------------------------------
# differentiation on the polynomial form


def poly_diff(p: dict, wrt: str, cache: dict | None = None) -> dict:
    if cache is None:
        cache = {}
    out: dict = {}
    for mono, c in p.items():
        for atom, e in mono:
            if wrt not in atom.free_symbols:
                continue
            da = cache.get(atom)
            if da is None:
                da = _atom_diff(atom, wrt, cache)
                cache[atom] = da
            if not da:
                continue
            rest = dict(mono)
            rest[atom] = e - 1
            rmono, extra = _norm_mono(rest)
            head = {rmono: c * e} if extra is None else _pscale(extra, c * e)
            out = _padd(out, poly_mul(head, da))
    return out


def _atom_diff(atom: Expr, wrt: str, cache: dict) -> dict:
    if isinstance(atom, Sym):
        return _pconst(1) if atom.name == wrt else {}
    if isinstance(atom, Sin):
        darg = poly_diff(poly_of(atom.arg), wrt, cache)
        return poly_mul(_trig("cos", poly_of(atom.arg)), darg)
    if isinstance(atom, Cos):
        darg = poly_diff(poly_of(atom.arg), wrt, cache)
        return _pscale(poly_mul(_trig("sin", poly_of(atom.arg)), darg), -1)
    if isinstance(atom, Add):
        return poly_diff(poly_of(atom), wrt, cache)
    raise TypeError(type(atom).__name__)  # pragma: no cover


def diff_expr(e: Expr, wrt: str) -> Expr:
    return from_poly(poly_diff(poly_of(e), wrt))


# ---------------------------------------------------------------------------
# numeric evaluation


def eval_numeric(e: Expr, point: Mapping[str, float]) -> float:
    """Evaluate in double precision, left to right over the tree order."""
    memo: dict = {}
    try:
        value = _ev(e, point, memo)
    except (OverflowError, ZeroDivisionError) as exc:
        raise NonFiniteResult(f"evaluation overflowed: {exc}") from None
    if not math.isfinite(value):
        raise NonFiniteResult(f"non-finite result {value!r}")
    return value


def _ev(e: Expr, point, memo) -> float:
    rank = e.rank
    if rank == 0:
        return e.value.numerator / e.value.denominator
    if rank == 1:
        try:
            return float(point[e.name])
        except KeyError:
            if e.name in BUILTIN_VALUES:
                return BUILTIN_VALUES[e.name]
            raise UnboundSymbol(e.name) from None
    hit = memo.get(id(e))
    if hit is not None:
        return hit
    if rank == 4:
        v = 0.0
        for t in e.terms:
            v += _ev(t, point, memo)
    elif rank == 5:
        v = 1.0
        for f in e.factors:
            v *= _ev(f, point, memo)
    elif rank == 6:
        b = _ev(e.base, point, memo)
        if b == 0.0 and e.exp < 0:
            raise NonFiniteResult("division by zero in negative power")
        v = b**e.exp
    elif rank == 3:
        v = math.sin(_ev(e.arg, point, memo))
    elif rank == 2:
        v = math.cos(_ev(e.arg, point, memo))
    else:  # pragma: no cover
        raise TypeError(type(e).__name__)
    memo[id(e)] = v
    return v


def term_count(e: Expr) -> int:
    return len(poly_of(e))


def ZERO() -> Expr:
    return from_poly({})


def ONE() -> Expr:
    return from_poly(_pconst(1))
