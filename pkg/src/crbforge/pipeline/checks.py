"""Numeric post-checks: every step's output is re-derived from its inputs.

The expected value comes from plain floating-point arithmetic on the
evaluated inputs (numpy for matrices, brute-force loops for index sums,
central differences for derivatives), so a rewrite rule that corrupts a
symbolic result shows up as a disagreement at the check points.
"""

from __future__ import annotations

import math

import numpy as np

from ..calculus import SplitProduct
from ..errors import CrbError, StepCheckFailed
from ..expr import Expr, IndexPoly, eval_numeric
from ..fisher import SymMatrix
from ..validation.oracle import _values, evaluate_text, fd_step
from ..validation.sampling import sample_points

CHECK_RTOL = 1e-6
FD_CHECK_RTOL = 1e-5
CHECK_SEED_SALT = 0x5EED


def numval(v, bindings, ixvals):
    if isinstance(v, IndexPoly):
        return v.evaluate(bindings, ixvals)
    if isinstance(v, SplitProduct):
        return v.left.evaluate(bindings, ixvals) * v.right.evaluate(bindings, ixvals)
    if isinstance(v, SymMatrix):
        return np.array(v.evaluate(bindings), dtype=float)
    if isinstance(v, Expr):
        return eval_numeric(v, bindings)
    raise TypeError(f"cannot evaluate {type(v).__name__}")


class _Skip(Exception):
    pass


def _length(ws, ix, bindings) -> int:
    L = eval_numeric(ws.spec.range_length(ix), bindings)
    if L != int(L) or L < 0:
        raise _Skip
    return int(L)


def _expected(step, ws, inputs, bindings, ixvals):
    """(expected value, scale floor, tolerance) for one check point."""
    op, p = step.op, step.params
    if op == "define":
        vals = _values(ws.spec, bindings)
        vals.update({k: float(v) for k, v in ixvals.items()})
        return float(evaluate_text(p["text"], vals)), 0.0, CHECK_RTOL
    if op in ("differentiate", "differentiate_poly"):
        wrt = p["wrt"]
        if wrt not in bindings:
            raise _Skip
        x = float(bindings[wrt])
        h = fd_step(x)
        hi = numval(inputs[0], {**bindings, wrt: x + h}, ixvals)
        lo = numval(inputs[0], {**bindings, wrt: x - h}, ixvals)
        # Rounding in the input's own evaluation bounds what a difference can resolve.
        floor = 1e-10 * max(abs(hi), abs(lo)) / h
        return (hi - lo) / (2 * h), floor, FD_CHECK_RTOL
    if op == "mul_poly":
        a, b = (numval(v, bindings, ixvals) for v in inputs)
        return a * b, abs(a * b), CHECK_RTOL
    if op == "sum_index":
        ix = p["index"]
        total = 0.0
        mag = 0.0
        for k in range(_length(ws, ix, bindings)):
            term = numval(inputs[0], bindings, {**ixvals, ix: k})
            total += term
            mag += abs(term)
        return total, mag, CHECK_RTOL
    if op == "assemble_fim":
        dim = int(p["dim"])
        g, s, *sums = (numval(v, bindings, ixvals) for v in inputs)
        F = np.zeros((dim, dim))
        it = iter(sums)
        for i in range(dim):
            for j in range(i, dim):
                F[i, j] = F[j, i] = 2.0 * g / s * next(it)
        return F, 0.0, CHECK_RTOL
    if op == "determinant":
        M = numval(inputs[0], bindings, ixvals)
        return float(np.linalg.det(M)), float(np.prod(np.linalg.norm(M, axis=1))), CHECK_RTOL
    if op == "crb":
        M = numval(inputs[0], bindings, ixvals)
        if np.linalg.cond(M) > 1e10:
            raise _Skip
        return float(np.linalg.inv(M)[int(p["param"]), int(p["param"])]), 0.0, CHECK_RTOL
    if op in ("simplify", "assert_equal"):
        return numval(inputs[0], bindings, ixvals), 0.0, CHECK_RTOL
    if op == "substitute":
        b = dict(bindings)
        for name, text in dict(p["bindings"]).items():
            b[name] = numval(ws.parse(text), bindings, ixvals)
        return numval(inputs[0], b, ixvals), 0.0, CHECK_RTOL
    raise _Skip


def check_points(spec, seed: int, n: int = 2) -> list[tuple[dict, dict]]:
    pts = sample_points(spec, n, seed ^ CHECK_SEED_SALT)
    return [(dict(pt.bindings), {ix: 2 + k + j for j, ix in enumerate(spec.indices)}) for k, pt in enumerate(pts)]


def check_step(step, ws, output, points) -> None:
    inputs = [ws[name] for name in step.inputs]
    for bindings, ixvals in points:
        try:
            want, floor, rtol = _expected(step, ws, inputs, bindings, ixvals)
            got = numval(output, bindings, ixvals)
        except (_Skip, CrbError, ZeroDivisionError, OverflowError, np.linalg.LinAlgError):
            continue
        want_a = np.asarray(want, dtype=float)
        got_a = np.asarray(got, dtype=float)
        if want_a.shape != got_a.shape:
            raise StepCheckFailed(f"step {step.index} ({step.op}): shape {got_a.shape} != {want_a.shape}")
        if not (np.all(np.isfinite(want_a)) and np.all(np.isfinite(got_a))):
            continue
        scale = max(float(np.max(np.abs(want_a), initial=0.0)), floor)
        err = float(np.max(np.abs(got_a - want_a), initial=0.0))
        if err > rtol * scale and not (scale == 0 and err == 0):
            rel = err / scale if scale else math.inf
            raise StepCheckFailed(
                f"step {step.index} ({step.op}) -> {step.output}: numeric check off by {rel:.3g} relative",
                relative_error=rel,
            )
