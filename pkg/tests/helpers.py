"""Small builders shared across test modules."""

import numpy as np

from crbforge.expr import parse
from crbforge.fisher import PhaseModel, adjugate, assemble_fim, determinant
from crbforge.pipeline.workspace import analyze
from crbforge.validation.oracle import _values


def model_of(spec) -> PhaseModel:
    ws = analyze(spec)
    lengths = {ix: parse(spec.index_ranges[ix], spec.symbols) for ix in spec.indices}
    return PhaseModel(ws.values["phi"], spec.params, ws.values["gain_sq"], ws.values["noise"], lengths)


def bindings(spec, point) -> dict:
    """Numeric values for every symbol, derived ones included."""
    return _values(spec, point.bindings, {})


def adjugate_residual(spec, points) -> float:
    """Worst ``|adj(F) F - det I| / |det|`` over ``points``."""
    F = assemble_fim(model_of(spec))
    A, D = adjugate(F), determinant(F)
    from crbforge.expr import eval_numeric

    worst = 0.0
    for pt in points:
        b = bindings(spec, pt)
        Fn, An = np.array(F.evaluate(b)), np.array(A.evaluate(b))
        dn = eval_numeric(D, b)
        worst = max(worst, float(np.abs(An @ Fn - dn * np.eye(len(Fn))).max() / abs(dn)))
    return worst
