"""Seeded sample points drawn from a scenario's sampling rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..errors import SchemaError

# Knuth's MMIX constants; modulus 2**64.
LCG_A = 6364136223846793005
LCG_C = 1442695040888963407
_MASK = (1 << 64) - 1
MAX_REDRAWS = 10_000


class Lcg64:
    """64-bit linear congruential generator.

    Used instead of :mod:`random` so the sampling algorithm is fixed by this
    file alone and can be written into reports.
    """

    def __init__(self, seed: int):
        self.state = (seed * LCG_A + LCG_C) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state * LCG_A + LCG_C) & _MASK
        return self.state

    def random(self) -> float:
        """Uniform in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def choice(self, options):
        return options[(self.next_u64() >> 11) % len(options)]

    @staticmethod
    def describe() -> dict:
        return {"algorithm": "lcg64", "a": LCG_A, "c": LCG_C, "modulus": "2^64", "output_bits": "63..11"}


@dataclass(frozen=True)
class SamplePoint:
    bindings: Mapping[str, float | int]
    id: str = ""

    def __getitem__(self, name):
        return self.bindings[name]

    def replace(self, **values) -> "SamplePoint":
        return SamplePoint({**self.bindings, **values}, self.id)


def _draw(rule, rng: Lcg64, name: str):
    if rule.choices is not None:
        return int(rng.choice(rule.choices))
    lo, hi = rule.interval
    if rule.exclude is None:
        return rng.uniform(lo, hi)
    elo, ehi = rule.exclude
    if elo <= lo and ehi >= hi:
        raise SchemaError(f"sampling.{name}: exclusion band covers the whole interval")
    for _ in range(MAX_REDRAWS):
        x = rng.uniform(lo, hi)
        if not elo < x < ehi:
            return x
    raise SchemaError(f"sampling.{name}: could not draw outside the exclusion band")


def sample_points(spec, n: int, seed: int = 0) -> list[SamplePoint]:
    """``n`` points; symbols are drawn in sorted-name order for stability."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = Lcg64(seed)
    names = sorted(spec.sampling)
    return [
        SamplePoint({name: _draw(spec.sampling[name], rng, name) for name in names}, f"{spec.id}:{seed}:{i}")
        for i in range(n)
    ]
