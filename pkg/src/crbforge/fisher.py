"""Fisher information for phase-only steering models.

For a unit-modulus steering vector ``a_m = exp(j*phi_m)`` the derivative is
``j * dphi_m/deta_i * a_m``, so ``Re[(da/deta_i)^H (da/deta_j)]`` collapses
to ``sum_m dphi_m/deta_i * dphi_m/deta_j``.  The deterministic-signal
Fisher entry therefore becomes ``(2 K |alpha|^2 / sigma^2) * sum(...)``
and every quantity stays real and exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .calculus import differentiate_poly, mul_poly, sum_index
from .errors import SingularFim
from .expr import Expr, IndexPoly, as_expr, canonicalize, eval_numeric, is_zero

MAX_DIM = 4


@dataclass(frozen=True)
class PhaseModel:
    phase: IndexPoly
    params: tuple[str, ...]
    gain_sq: Expr
    noise: Expr
    range_lengths: Mapping[str, Expr | int]
    snapshots: Expr | int = 1

    def __post_init__(self):
        params = tuple(self.params)
        object.__setattr__(self, "params", params)
        if not 1 <= len(params) <= MAX_DIM:
            raise ValueError(f"between 1 and {MAX_DIM} parameters required, got {len(params)}")
        if len(set(params)) != len(params):
            raise ValueError("parameters must be distinct")
        if set(params) & set(self.phase.indices):
            raise ValueError("an index symbol cannot be a parameter")
        for ix in self.phase.indices:
            if ix not in self.range_lengths:
                raise ValueError(f"no range length for index {ix!r}")

    @property
    def prefactor(self) -> Expr:
        return fim_prefactor(self.gain_sq, self.noise, self.snapshots)


def fim_prefactor(gain_sq, noise, snapshots=1) -> Expr:
    return 2 * as_expr(snapshots) * as_expr(gain_sq) / as_expr(noise)


@dataclass(frozen=True)
class SymMatrix:
    """Square matrix of canonical expressions."""

    entries: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(canonicalize(as_expr(e)) for e in row) for row in self.entries)
        if any(len(r) != len(rows) for r in rows):
            raise ValueError("matrix must be square")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "SymMatrix":
        return cls(tuple(tuple(r) for r in rows))

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __getitem__(self, ij: tuple[int, int]) -> Expr:
        i, j = ij
        return self.entries[i][j]

    def is_symmetric(self) -> bool:
        n = self.dim
        return all(self.entries[i][j] == self.entries[j][i] for i in range(n) for j in range(i + 1, n))

    def evaluate(self, point) -> list[list[float]]:
        return [[eval_numeric(e, point) for e in row] for row in self.entries]

    def minor(self, i: int, j: int) -> "SymMatrix":
        return SymMatrix(tuple(
            tuple(e for c, e in enumerate(row) if c != j)
            for r, row in enumerate(self.entries) if r != i
        ))

    @property
    def free_symbols(self) -> frozenset:
        out = set()
        for row in self.entries:
            for e in row:
                out |= e.free_symbols
        return frozenset(out)


def phase_derivatives(model: PhaseModel) -> list[IndexPoly]:
    return [differentiate_poly(model.phase, p) for p in model.params]


def summed_product(a: IndexPoly, b: IndexPoly, range_lengths) -> Expr:
    """``sum over all indices of a * b`` in closed form."""
    value = mul_poly(a, b)
    for ix in a.indices:
        value = sum_index(value, ix, range_lengths[ix])
    return value


def fim_entry(model: PhaseModel, i: int, j: int) -> Expr:
    n = len(model.params)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"entry ({i}, {j}) outside a {n}x{n} model")
    di = differentiate_poly(model.phase, model.params[i])
    dj = di if i == j else differentiate_poly(model.phase, model.params[j])
    return model.prefactor * summed_product(di, dj, model.range_lengths)


def fim_from_sums(sums: Mapping[tuple[int, int], Expr], dim: int, prefactor: Expr) -> SymMatrix:
    """Fill a symmetric FIM from upper-triangle sums, mirroring i > j."""
    rows = [[None] * dim for _ in range(dim)]
    for i in range(dim):
        for j in range(i, dim):
            value = prefactor * sums[(i, j)]
            rows[i][j] = value
            rows[j][i] = value
    return SymMatrix.from_rows(rows)


def assemble_fim(model: PhaseModel) -> SymMatrix:
    derivs = phase_derivatives(model)
    n = len(derivs)
    sums = {
        (i, j): summed_product(derivs[i], derivs[j], model.range_lengths)
        for i in range(n)
        for j in range(i, n)
    }
    return fim_from_sums(sums, n, model.prefactor)


def determinant(F: SymMatrix) -> Expr:
    """Cofactor expansion along the first row."""
    n = F.dim
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds {MAX_DIM}")
    if n == 1:
        return F[0, 0]
    if n == 2:
        return F[0, 0] * F[1, 1] - F[0, 1] * F[1, 0]
    total = as_expr(0)
    for j in range(n):
        if is_zero(F[0, j]):
            continue
        term = F[0, j] * determinant(F.minor(0, j))
        total = total + term if j % 2 == 0 else total - term
    return total


def cofactor(F: SymMatrix, i: int, j: int) -> Expr:
    if F.dim == 1:
        return as_expr(1)
    m = determinant(F.minor(i, j))
    return m if (i + j) % 2 == 0 else -m


def adjugate(F: SymMatrix) -> SymMatrix:
    n = F.dim
    return SymMatrix.from_rows([[cofactor(F, j, i) for j in range(n)] for i in range(n)])


def crb(F: SymMatrix, i: int, det: Expr | None = None) -> Expr:
    """``adj(F)_ii / det(F)``; raises :class:`SingularFim` on a zero determinant."""
    if F.dim > MAX_DIM:
        raise ValueError(f"dimension {F.dim} exceeds {MAX_DIM}")
    det = determinant(F) if det is None else det
    if is_zero(det):
        raise SingularFim("Fisher information matrix is singular (zero determinant)")
    return cofactor(F, i, i) / det
