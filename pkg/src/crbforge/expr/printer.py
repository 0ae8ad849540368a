"""Render expressions in the parser's grammar."""

from __future__ import annotations

from fractions import Fraction

from .core import Add, Const, Cos, Expr, Mul, Pow, Sin, Sym


def _frac(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _atomic(e: Expr) -> str:
    if isinstance(e, (Sym, Sin, Cos)):
        return to_text(e)
    if isinstance(e, Const) and e.value >= 0 and e.value.denominator == 1:
        return to_text(e)
    return f"({to_text(e)})"


def _signed(e: Expr) -> tuple[int, str]:
    """Split a term into (sign, text of its absolute value)."""
    if isinstance(e, Const):
        return (-1 if e.value < 0 else 1), _frac(abs(e.value))
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        c = e.factors[0].value
        rest = "*".join(_factor(f) for f in e.factors[1:])
        if abs(c) == 1:
            return (-1 if c < 0 else 1), rest
        return (-1 if c < 0 else 1), f"{_frac(abs(c))}*{rest}"
    if isinstance(e, Mul):
        return 1, "*".join(_factor(f) for f in e.factors)
    return 1, to_text(e)


def _factor(e: Expr) -> str:
    if isinstance(e, (Add, Mul)) or (isinstance(e, Const) and (e.value < 0)):
        return f"({to_text(e)})"
    return to_text(e)


def to_text(e: Expr) -> str:
    if isinstance(e, Const):
        return _frac(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Sin):
        return f"sin({to_text(e.arg)})"
    if isinstance(e, Cos):
        return f"cos({to_text(e.arg)})"
    if isinstance(e, Pow):
        exp = str(e.exp) if e.exp >= 0 else f"({e.exp})"
        return f"{_atomic(e.base)}^{exp}"
    if isinstance(e, Mul):
        sign, body = _signed(e)
        return body if sign > 0 else f"-{body}"
    if isinstance(e, Add):
        parts = []
        for i, t in enumerate(e.terms):
            sign, body = _signed(t)
            if i == 0:
                parts.append(body if sign > 0 else f"-{body}")
            else:
                parts.append(f" + {body}" if sign > 0 else f" - {body}")
        return "".join(parts)
    raise TypeError(type(e).__name__)  # pragma: no cover
