"""A constructed corpus of failing traces, one root cause per trace.

Counts per category: 5 summation, 4 incomplete, 4 constant/sign,
2 modelling, 1 FIM formulation, 1 no output.
"""

from pathlib import Path

from crbforge.pipeline.trace import DerivationTrace, StepRecord

S01_OPS = ["differentiate_poly", "differentiate_poly", "mul_poly", "mul_poly", "mul_poly", "sum_index",
           "sum_index", "sum_index", "assemble_fim", "determinant", "crb", "crb", "simplify", "simplify"]
S01_TARGETS = ["d_phi_m_d_theta", "d_phi_m_d_R", "F_thetatheta", "F_RR", "F_thetaR", "det_F", "crb_theta", "crb_R"]

# (category, failing step, error kind, status, outputs written before the failure)
RECIPES = (
    [("SummationClosedForm", 5, "ExponentOutOfTable", "abandoned", 2)] * 3
    + [("SummationClosedForm", 6, "MissingIndex", "abandoned", 2)] * 2
    + [("IncompleteDerivation", 10, "PatchExhausted", "abandoned", 6)] * 2
    + [("IncompleteDerivation", 12, "ExpansionBlowup", "abandoned", 6)] * 2
    + [("ConstantOrSign", 2, "StepCheckFailed", "failed", 2)] * 3
    + [("ConstantOrSign", 13, "NotEqual", "failed", 7)]
    + [("ModelingMismatch", 0, "UnknownSymbol", "abandoned", 1)]
    + [("ModelingMismatch", 1, "IndexDifferentiation", "abandoned", 1)]
    + [("FimFormulation", 8, "SingularFim", "abandoned", 2)]
    + [("NoValidOutput", 0, "PlanInvalid", "abandoned", 0)]
)


def make_trace(i: int, category: str, at: int, kind: str, status: str, n_outputs: int) -> DerivationTrace:
    steps = [StepRecord(k, op, f"v{k}") for k, op in enumerate(S01_OPS[:at])]
    steps.append(StepRecord(at, S01_OPS[at], f"v{at}", status, {"kind": kind, "message": f"constructed {kind}"},
                            category, revisions=1 if status == "abandoned" else 0))
    outputs = {t: "1" for t in S01_TARGETS[:n_outputs]}
    return DerivationTrace("S01", "template", seed=i, steps=steps, outputs=outputs, targets=list(S01_TARGETS))


def build_corpus(directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, recipe in enumerate(RECIPES):
        path = directory / f"trace_{i:02d}.json"
        path.write_text(make_trace(i, *recipe).to_json())
        paths.append(path)
    return paths


EXPECTED = {
    "SummationClosedForm": "29.4",
    "IncompleteDerivation": "23.5",
    "ConstantOrSign": "23.5",
    "ModelingMismatch": "11.8",
    "FimFormulation": "5.9",
    "NoValidOutput": "5.9",
}
