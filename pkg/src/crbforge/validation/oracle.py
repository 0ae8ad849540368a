"""Finite-difference Fisher information, independent of the symbolic kernel.

Expression strings are translated token by token into numpy arithmetic, the
steering vector ``exp(j*phi)`` is formed over the full index grid, and its
parameter derivatives come from central differences.  Nothing here imports
from :mod:`crbforge.expr` or :mod:`crbforge.calculus`.
"""

from __future__ import annotations

import ast
import re
from functools import lru_cache

import numpy as np

from ..errors import NonFinitePoint, SchemaError

FD_REL_STEP = 1e-6

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z0-9_]*)|(\^)|([-+*/(),]))")
_FUNCS = {"sin": np.sin, "cos": np.cos}
_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Constant, ast.Load,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


@lru_cache(maxsize=512)
def compile_text(text: str):
    """Translate a grammar string into a code object over a ``v`` namespace."""
    out = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SchemaError(f"oracle cannot read {text[pos:]!r}")
        num, name, caret, punct = m.groups()
        if num:
            out.append(num)
        elif name:
            out.append(name if name in _FUNCS else f"v[{name!r}]")
        elif caret:
            out.append("**")
        else:
            out.append(punct)
        pos = m.end()
    src = " ".join(out)
    # v['x'] is a Subscript; rewrite to plain names so the whitelist stays small.
    src = re.sub(r"v\['([A-Za-z_][A-Za-z0-9_]*)'\]", r"_v_\1", src)
    tree = ast.parse(src, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise SchemaError(f"oracle rejects construct {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise SchemaError(f"oracle rejects call in {text!r}")
    return compile(tree, "<oracle>", "eval")


def evaluate_text(text: str, values) -> np.ndarray | float:
    ns = {f"_v_{k}": v for k, v in values.items()}
    ns.update(_FUNCS)
    with np.errstate(all="ignore"):
        return eval(compile_text(text), {"__builtins__": {}}, ns)


def _values(spec, bindings, overrides=None) -> dict:
    vals = {k: float(v) for k, v in bindings.items()}
    vals["pi"] = np.pi
    if overrides:
        vals.update(overrides)
    derived = spec.derived
    for name, text in derived.items():
        vals[name] = evaluate_text(text, vals)
    return vals


def range_lengths(spec, bindings) -> dict[str, int]:
    vals = _values(spec, bindings)
    out = {}
    for ix, text in spec.index_ranges.items():
        length = float(evaluate_text(text, vals))
        if length != int(length) or length < 0:
            raise NonFinitePoint(f"range length for {ix} is not a non-negative integer: {length}")
        out[ix] = int(length)
    return out


def index_grid(spec, bindings) -> dict[str, np.ndarray]:
    lengths = range_lengths(spec, bindings)
    axes = [np.arange(lengths[ix], dtype=float) for ix in spec.indices]
    grids = np.meshgrid(*axes, indexing="ij")
    return dict(zip(spec.indices, grids))


def phase_values(spec, bindings, overrides=None) -> np.ndarray:
    grid = index_grid(spec, bindings)
    vals = _values(spec, bindings, overrides)
    vals.update(grid)
    phi = np.broadcast_to(evaluate_text(spec.phase_text, vals), next(iter(grid.values())).shape)
    if not np.all(np.isfinite(phi)):
        raise NonFinitePoint("phase is not finite at this point")
    return phi


def steering(spec, bindings, overrides=None) -> np.ndarray:
    return np.exp(1j * phase_values(spec, bindings, overrides)).ravel()


def fd_step(value: float) -> float:
    return FD_REL_STEP * max(1.0, abs(value))


def steering_derivatives(spec, bindings) -> list[np.ndarray]:
    out = []
    for p in spec.params:
        x = float(bindings[p])
        h = fd_step(x)
        plus = steering(spec, bindings, {p: x + h})
        minus = steering(spec, bindings, {p: x - h})
        out.append((plus - minus) / (2 * h))
    return out


def phase_derivative_grid(spec, bindings, param: str) -> np.ndarray:
    """Central difference of the phase itself, for derivative targets."""
    x = float(bindings[param])
    h = fd_step(x)
    return (phase_values(spec, bindings, {param: x + h}) - phase_values(spec, bindings, {param: x - h})) / (2 * h)


def prefactor(spec, bindings) -> float:
    vals = _values(spec, bindings)
    g = float(evaluate_text(spec.gain_sq_text, vals))
    s = float(evaluate_text(spec.noise_text, vals))
    value = 2.0 * g / s
    if not np.isfinite(value):
        raise NonFinitePoint("gain/noise prefactor is not finite")
    return value


def oracle_fim(spec, point) -> np.ndarray:
    """``2|alpha|^2/sigma^2 * Re[(da/deta_i)^H (da/deta_j)]`` by central differences."""
    bindings = getattr(point, "bindings", point)
    derivs = steering_derivatives(spec, bindings)
    D = np.stack(derivs, axis=1) if derivs[0].size else np.zeros((0, len(derivs)))
    F = prefactor(spec, bindings) * np.real(D.conj().T @ D)
    if not np.all(np.isfinite(F)):
        raise NonFinitePoint("oracle FIM is not finite")
    return F
