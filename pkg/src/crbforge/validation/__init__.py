"""Ground-truth oracle and verdict engine."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import AllPointsSkipped, CrbError, ExpansionBlowup, NonFinitePoint
from ..expr import Expr, IndexPoly, Verdict, canonicalize, equals_canonical, eval_numeric, numeric_agreement
from .oracle import index_grid, oracle_fim, phase_derivative_grid
from .sampling import Lcg64, SamplePoint, sample_points

COND_LIMIT = 1e10
SYMBOLIC_POINTS = 64
SYMBOLIC_RTOL = 1e-10
DEFAULT_TOL = 1e-6
DEFAULT_POINTS = 20


@dataclass(frozen=True)
class SymbolicCheck:
    verdict: Verdict
    diagnostic: str | None = None

    @property
    def warning(self) -> bool:
        return self.verdict is Verdict.EQUAL_NUMERICALLY


def ratio_diagnostic(ratios: list[float], rtol: float = 1e-8) -> str | None:
    """Name a constant derived/reference ratio: ``sign-flip`` or ``constant-ratio``."""
    finite = [r for r in ratios if math.isfinite(r)]
    if not finite or len(finite) < len(ratios):
        return None
    r0 = finite[0]
    if r0 == 0 or any(abs(r - r0) > rtol * abs(r0) for r in finite):
        return None
    if abs(r0 + 1) <= rtol:
        return "sign-flip"
    return f"constant-ratio {r0:.6g}"


def _as_expr(value) -> Expr:
    return value.to_expr() if isinstance(value, IndexPoly) else value


def _free(e: Expr) -> frozenset:
    try:
        return canonicalize(e).free_symbols
    except ExpansionBlowup:
        return e.free_symbols


def verify_symbolic(derived, reference, *, n_points: int = SYMBOLIC_POINTS, rtol: float = SYMBOLIC_RTOL,
                    seed: int = 0) -> SymbolicCheck:
    a, b = _as_expr(derived), _as_expr(reference)
    fa, fb = _free(a), _free(b)
    if fa != fb:
        missing = sorted(fb - fa)
        extra = sorted(fa - fb)
        return SymbolicCheck(Verdict.NOT_EQUAL, f"free symbols differ: missing {missing}, extra {extra}")
    verdict = equals_canonical(a, b, n_points=n_points, rtol=rtol, seed=seed)
    if verdict is not Verdict.NOT_EQUAL:
        return SymbolicCheck(verdict)
    _, ratios = numeric_agreement(a, b, n_points=n_points, rtol=rtol, seed=seed)
    return SymbolicCheck(verdict, ratio_diagnostic(ratios))


@dataclass
class TargetReport:
    target: str
    kind: str
    symbolic: str | None = None
    diagnostic: str | None = None
    max_rel_error: float | None = None
    points_tested: int = 0
    points_skipped: int = 0
    error: str | None = None

    def passed(self, tol: float) -> bool:
        if self.error is not None:
            return False
        if self.symbolic == Verdict.NOT_EQUAL.value:
            return False
        return self.max_rel_error is not None and self.max_rel_error <= tol


@dataclass
class ValidationReport:
    scenario: str
    seed: int
    n_points: int
    tol: float
    targets: dict[str, TargetReport] = field(default_factory=dict)
    skipped: list[dict] = field(default_factory=list)
    generator: dict = field(default_factory=Lcg64.describe)

    @property
    def points_skipped(self) -> int:
        return len(self.skipped)

    @property
    def passed(self) -> bool:
        if not self.targets:
            return False
        if 2 * self.points_skipped >= self.n_points:
            return False
        return all(t.passed(self.tol) for t in self.targets.values())

    @property
    def max_rel_error(self) -> float | None:
        errs = [t.max_rel_error for t in self.targets.values() if t.max_rel_error is not None]
        return max(errs) if errs else None

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "seed": self.seed,
            "n_points": self.n_points,
            "tol": self.tol,
            "generator": self.generator,
            "points_skipped": self.points_skipped,
            "skipped": self.skipped,
            "targets": {k: asdict(v) for k, v in self.targets.items()},
        }


def _poly_on_grid(p: IndexPoly, bindings, grid) -> np.ndarray:
    shape = next(iter(grid.values())).shape
    total = np.zeros(shape)
    for deg, coeff in p.items():
        term = np.full(shape, eval_numeric(coeff, bindings))
        for ix, k in zip(p.indices, deg):
            if k:
                term = term * grid[ix] ** k
        total = total + term
    return total


def condition_number(F: np.ndarray) -> float:
    s = np.linalg.svd(F, compute_uv=False)
    if s.size == 0 or s[-1] == 0 or not np.all(np.isfinite(s)):
        return math.inf
    return float(s[0] / s[-1])


def _rel(got: float, want: float, scale: float | None = None) -> float:
    scale = abs(want) if scale is None else scale
    if scale == 0:
        return 0.0 if got == 0 else math.inf
    return float(abs(got - want) / scale)


def _point_errors(derived, spec, bindings, F: np.ndarray) -> dict[str, float]:
    errs = {}
    inv = None
    for target, value in derived.items():
        role = spec.role(target)
        if role.kind == "dphi":
            grid = index_grid(spec, bindings)
            want = phase_derivative_grid(spec, bindings, spec.params[role.params[0]])
            got = _poly_on_grid(value, bindings, grid)
            errs[target] = _rel(0, 0) if want.size == 0 else float(
                np.max(np.abs(got - want)) / max(np.max(np.abs(want)), 1e-300))
            continue
        got = eval_numeric(_as_expr(value), bindings)
        if role.kind == "fim":
            i, j = role.params
            # Off-diagonal entries are compared on the scale of their diagonal neighbours.
            scale = None if i == j else math.sqrt(abs(F[i, i] * F[j, j]))
            errs[target] = _rel(got, F[i, j], scale)
        elif role.kind == "det":
            errs[target] = _rel(got, float(np.linalg.det(F)))
        else:
            if inv is None:
                inv = np.linalg.inv(F)
            i = role.params[0]
            errs[target] = _rel(got, inv[i, i])
    return errs


def validate_numeric(derived, spec, n_points: int = DEFAULT_POINTS, tol: float = DEFAULT_TOL,
                     seed: int = 0, points: list[SamplePoint] | None = None) -> ValidationReport:
    """Compare derived targets against the finite-difference oracle."""
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    points = points if points is not None else sample_points(spec, n_points, seed)
    report = ValidationReport(spec.id, seed, len(points), tol)
    for target in spec.targets:
        report.targets[target] = TargetReport(target, spec.role(target).kind)
        if target not in derived:
            report.targets[target].error = "missing"
    present = {t: v for t, v in derived.items() if t in spec.targets}
    for pt in points:
        try:
            F = oracle_fim(spec, pt)
            cond = condition_number(F)
        except NonFinitePoint:
            cond = math.inf
        if cond > COND_LIMIT:
            report.skipped.append({"point": pt.id, "cond": cond if math.isfinite(cond) else "inf"})
            for t in report.targets.values():
                t.points_skipped += 1
            continue
        try:
            errs = _point_errors(present, spec, pt.bindings, F)
        except CrbError as exc:
            for target in present:
                report.targets[target].error = f"{exc.kind}: {exc}"
            continue
        for target, err in errs.items():
            tr = report.targets[target]
            tr.points_tested += 1
            tr.max_rel_error = err if tr.max_rel_error is None else max(tr.max_rel_error, err)
    if report.points_skipped == len(points):
        raise AllPointsSkipped(
            f"all {len(points)} points have oracle condition number above {COND_LIMIT:g}",
            skipped=report.skipped,
        )
    return report


def validate(derived, spec, n_points: int = DEFAULT_POINTS, tol: float = DEFAULT_TOL,
             seed: int = 0) -> ValidationReport:
    """Symbolic checks against references plus numeric oracle checks."""
    report = validate_numeric(derived, spec, n_points, tol, seed)
    refs = spec.reference_set
    for target, ref in refs.items():
        if target not in derived:
            continue
        check = verify_symbolic(derived[target], ref, seed=seed)
        tr = report.targets[target]
        tr.symbolic = check.verdict.value
        tr.diagnostic = check.diagnostic
    return report


__all__ = [
    "COND_LIMIT", "DEFAULT_POINTS", "DEFAULT_TOL", "Lcg64", "SamplePoint", "SymbolicCheck", "TargetReport",
    "ValidationReport", "condition_number", "oracle_fim", "ratio_diagnostic", "sample_points", "validate",
    "validate_numeric", "verify_symbolic",
]
