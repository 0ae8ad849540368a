"""Structural equality with a seeded numeric-sampling fallback."""

from __future__ import annotations

import enum
import random
from typing import Mapping

from ..errors import CrbError, ExpansionBlowup
from .core import Expr, canonicalize, eval_numeric

DEFAULT_RANGE = (0.5, 2.0)


class Verdict(str, enum.Enum):
    EQUAL = "Equal"
    EQUAL_NUMERICALLY = "Undecided-Equal-Numerically"
    NOT_EQUAL = "NotEqual"

    @property
    def passes(self) -> bool:
        return self is not Verdict.NOT_EQUAL


def sample_bindings(names, rng: random.Random, ranges: Mapping[str, tuple] | None = None) -> dict:
    ranges = ranges or {}
    out = {}
    for name in sorted(names):
        lo, hi = ranges.get(name, DEFAULT_RANGE)
        out[name] = rng.uniform(lo, hi)
    return out


def numeric_agreement(a: Expr, b: Expr, *, n_points: int = 64, rtol: float = 1e-10, seed: int = 0,
                      ranges: Mapping[str, tuple] | None = None) -> tuple[bool, list[float]]:
    """Evaluate both sides at ``n_points`` seeded points.

    Returns ``(all_agree, ratios)`` where ``ratios`` holds a/b at each point
    (used for sign/constant diagnostics).  Points where either side is not
    finite are redrawn, up to ``4 * n_points`` attempts.
    """
    names = (a.free_symbols | b.free_symbols) - {"pi"}
    rng = random.Random(seed)
    agree = True
    ratios: list[float] = []
    tested = 0
    for _ in range(4 * n_points):
        if tested == n_points:
            break
        point = sample_bindings(names, rng, ranges)
        try:
            x = eval_numeric(a, point)
            y = eval_numeric(b, point)
        except CrbError:
            continue
        tested += 1
        scale = max(abs(x), abs(y))
        if abs(x - y) > rtol * scale:
            agree = False
        ratios.append(x / y if y != 0 else float("inf") if x != 0 else 1.0)
    if tested == 0:
        return False, []
    return agree, ratios


def equals_canonical(a: Expr, b: Expr, *, n_points: int = 64, rtol: float = 1e-10, seed: int = 0,
                     ranges: Mapping[str, tuple] | None = None) -> Verdict:
    try:
        a, b = canonicalize(a), canonicalize(b)
    except ExpansionBlowup:
        # Normalization was cut off by the cap; only sampling can decide.
        pass
    else:
        if a == b:
            return Verdict.EQUAL
    agree, _ = numeric_agreement(a, b, n_points=n_points, rtol=rtol, seed=seed, ranges=ranges)
    return Verdict.EQUAL_NUMERICALLY if agree else Verdict.NOT_EQUAL
