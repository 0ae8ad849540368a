"""What each plan op does to the workspace."""

from __future__ import annotations

from ..calculus import SplitProduct, differentiate, differentiate_poly, mul_poly, sum_index
from ..errors import MissingIndex, NotEqualError, PlanInvalid
from ..expr import Expr, IndexPoly, canonicalize, substitute
from ..fisher import SymMatrix, crb, determinant, fim_from_sums, fim_prefactor
from .workspace import Workspace


def _expect(value, types, step, what):
    if not isinstance(value, types):
        names = "/".join(t.__name__ for t in types)
        raise PlanInvalid(f"step {step.index} ({step.op}): {what} must be {names}, got {type(value).__name__}")
    return value


def upper_pairs(dim: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(dim) for j in range(i, dim)]


def run_op(step, ws: Workspace):
    args = [ws[name] for name in step.inputs]
    p = step.params
    op = step.op
    if op == "define":
        return ws.parse(p["text"], field=f"step{step.index}.text")
    if op == "differentiate":
        e = args[0]
        if isinstance(e, IndexPoly):
            return differentiate_poly(e, p["wrt"], ws.symbols)
        return differentiate(_expect(e, (Expr,), step, "input"), p["wrt"], ws.symbols)
    if op == "differentiate_poly":
        ws.symbols.require(p["wrt"])
        return differentiate_poly(_expect(args[0], (IndexPoly,), step, "input"), p["wrt"], ws.symbols)
    if op == "mul_poly":
        a = _expect(args[0], (IndexPoly,), step, "left input")
        b = _expect(args[1], (IndexPoly,), step, "right input")
        return SplitProduct(a, b) if p.get("split") else mul_poly(a, b)
    if op == "sum_index":
        ix = p["index"]
        if ix not in ws.spec.index_ranges:
            raise MissingIndex(f"{ix!r} has no declared range", index=ix)
        src = _expect(args[0], (IndexPoly, SplitProduct), step, "input")
        return sum_index(src, ix, ws.spec.range_length(ix))
    if op == "assemble_fim":
        dim = int(p["dim"])
        gain, noise, *sums = args
        pairs = upper_pairs(dim)
        if len(sums) != len(pairs):
            raise PlanInvalid(f"assemble_fim of dim {dim} needs {len(pairs)} sums, got {len(sums)}")
        for s in sums:
            _expect(s, (Expr,), step, "summed entry")
        return fim_from_sums(dict(zip(pairs, sums)), dim, fim_prefactor(gain, noise))
    if op == "determinant":
        return determinant(_expect(args[0], (SymMatrix,), step, "input"))
    if op == "crb":
        F = _expect(args[0], (SymMatrix,), step, "input")
        det = _expect(args[1], (Expr,), step, "determinant") if len(args) > 1 else None
        i = int(p["param"])
        if not 0 <= i < F.dim:
            raise PlanInvalid(f"crb param {i} outside a {F.dim}x{F.dim} matrix")
        return crb(F, i, det)
    if op == "simplify":
        v = args[0]
        if isinstance(v, IndexPoly):
            return v.map_coeffs(canonicalize)
        if isinstance(v, SymMatrix):
            return SymMatrix(v.entries)
        return canonicalize(_expect(v, (Expr,), step, "input"))
    if op == "substitute":
        bindings = {name: ws.parse(text) for name, text in dict(p["bindings"]).items()}
        v = args[0]
        if isinstance(v, IndexPoly):
            return v.map_coeffs(lambda c: substitute(c, bindings, ws.symbols))
        return substitute(_expect(v, (Expr,), step, "input"), bindings, ws.symbols)
    if op == "assert_equal":
        from ..validation import verify_symbolic

        check = verify_symbolic(args[0], args[1])
        if not check.verdict.passes:
            raise NotEqualError(
                f"{step.inputs[0]} != {step.inputs[1]}" + (f" ({check.diagnostic})" if check.diagnostic else ""),
                diagnostic=check.diagnostic,
            )
        return args[0]
    raise PlanInvalid(f"unknown op {op!r}")
