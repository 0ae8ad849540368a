import json
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crbforge.errors import PlanInvalid
from crbforge.pipeline import (
    Amendment,
    DerivationTrace,
    FailureClass,
    Plan,
    PlanStep,
    STEP_BUDGET,
    TemplatePlanner,
    analyze,
    classify_failure,
    derive,
    execute,
    plan,
    root_cause,
)
from crbforge.pipeline.trace import StepRecord
from crbforge.scenarios import builtin, load_scenario

from conftest import minimal_json

S01_COUNTS = {"differentiate_poly": 2, "mul_poly": 3, "sum_index": 3, "assemble_fim": 1, "determinant": 1,
              "crb": 2, "simplify": 2}


def step(i, op, inputs, output, **params):
    return PlanStep(i, op, tuple(inputs), output, params)


class TestPlan:
    def test_s01_template(self, s01):
        p = plan(s01, analyze(s01))
        assert len(p) == 14
        assert p.counts() == S01_COUNTS
        assert set(p.targets) == set(s01.targets)

    def test_single_parameter(self):
        spec = load_scenario(minimal_json())
        p = plan(spec, analyze(spec))
        assert [s.op for s in p.steps] == ["differentiate_poly", "mul_poly", "sum_index", "assemble_fim", "crb",
                                           "simplify"]

    @pytest.mark.parametrize("sid,n", [("S02", 17), ("S03", 14), ("S04", 29), ("S05", 14)])
    def test_builtin_sizes(self, sid, n):
        spec = builtin(sid)
        assert len(plan(spec, analyze(spec))) == n

    def test_undefined_input_rejected(self, s01):
        class Sloppy:
            id = "sloppy"

            def plan(self, spec, ws):
                return Plan((step(0, "differentiate_poly", ["psi"], "dphi_theta", wrt="theta"),), {}, self.id)

        with pytest.raises(PlanInvalid, match="undefined name 'psi'"):
            plan(s01, analyze(s01), Sloppy())

    @pytest.mark.parametrize("bad", [
        step(0, "integrate", ["phi"], "x"),
        step(0, "mul_poly", ["phi"], "x"),
        step(0, "sum_index", ["phi"], "x"),
        step(0, "simplify", ["phi"], "Bad-Name"),
        step(0, "simplify", ["phi"], "phi"),
    ])
    def test_shape_rules(self, s01, bad):
        from crbforge.pipeline import validate_plan

        with pytest.raises(PlanInvalid):
            validate_plan(Plan((bad,)), analyze(s01).names())

    def test_round_trip(self, s01):
        p = plan(s01, analyze(s01))
        assert Plan.from_dict(json.loads(json.dumps(p.to_dict()))) == p


class TestExecute:
    def test_s01_all_ok(self, s01):
        trace = derive(s01, validate=False)
        assert [r.status for r in trace.steps] == ["ok"] * 14
        assert sorted(trace.outputs) == sorted(s01.targets)
        assert root_cause(trace) is None

    def test_empty_plan(self, s01):
        trace = execute(Plan(()), analyze(s01))
        assert trace.steps == [] and trace.outputs == {}
        assert root_cause(trace) is FailureClass.NO_VALID_OUTPUT

    def test_sign_flip_repaired(self, s01):
        trace = derive(s01, inject=["sign-flip"])
        patched = [r for r in trace.steps if r.status == "patched-ok"]
        assert len(patched) == 1 and patched[0].revisions == 1
        assert patched[0].patches == ["strict-trig"]
        assert patched[0].failure_class == "ConstantOrSign"
        assert trace.passed

    def test_low_cap_repaired_by_streaming(self, s01):
        trace = derive(s01, inject=["low-cap"])
        patched = [r for r in trace.steps if r.status == "patched-ok"]
        assert [r.patches for r in patched] == [["expand-streamed"]]
        assert patched[0].error["kind"] == "ExpansionBlowup"
        assert trace.passed

    def test_degree_cap_repaired_by_split(self, s01):
        trace = derive(s01, inject=["degree-cap"])
        patched = [r for r in trace.steps if r.status == "patched-ok"]
        assert patched and all(r.op == "mul_poly" and r.patches == ["split-product"] for r in patched)
        assert trace.passed

    def test_degree_five_phase_abandoned_in_summation(self):
        spec = load_scenario(minimal_json(phase_text="m^5*k*theta", references={}))
        trace = derive(spec, validate=False)
        by_op = {r.op: r for r in trace.steps}
        assert by_op["mul_poly"].status == "patched-ok"
        assert by_op["mul_poly"].patches == ["split-product"]
        assert by_op["sum_index"].status == "abandoned"
        assert by_op["sum_index"].error["kind"] == "ExponentOutOfTable"
        assert root_cause(trace) is FailureClass.SUMMATION_CLOSED_FORM

    def test_single_element_array_abandoned(self, s01):
        trace = derive(s01.with_ranges(m=1))
        last = trace.steps[-1]
        assert last.op == "crb" and last.status == "abandoned"
        assert last.error["kind"] == "SingularFim"
        assert root_cause(trace) is FailureClass.FIM_FORMULATION
        assert "AllPointsSkipped" in trace.validation["error"]

    def test_budget_exhaustion(self, s01):
        class Stubborn:
            id = "stubborn"

            def patch(self, record, step, error, ws, rules):
                return Amendment((step,), {}, "again")

        trace = derive(s01, patcher=Stubborn(), inject=["sign-flip"], validate=False)
        rec = next(r for r in trace.steps if r.status != "ok")
        assert rec.status == "abandoned"
        assert rec.revisions == STEP_BUDGET
        assert rec.patches[-1] == "budget-exhausted"

    def test_no_patcher_means_failed(self, s01):
        ws = analyze(s01)
        from crbforge.pipeline import injected_rules

        trace = execute(plan(s01, ws), ws, rules=injected_rules(["sign-flip"]))
        assert trace.steps[-1].status == "failed"
        assert trace.steps[-1].revisions == 0

    def test_amendment_with_undefined_name_abandons(self, s01):
        class Broken:
            id = "broken"

            def patch(self, record, failed, error, ws, rules):
                return Amendment((step(failed.index, "simplify", ["nowhere"], failed.output),), {}, "x")

        trace = derive(s01, patcher=Broken(), inject=["sign-flip"], validate=False)
        rec = next(r for r in trace.steps if r.status != "ok")
        assert rec.status == "abandoned"
        assert "PlanInvalid" in rec.patches[-1]


class TestTaxonomy:
    @pytest.mark.parametrize("kind,op,expected", [
        ("ExponentOutOfTable", "sum_index", "SummationClosedForm"),
        ("MissingIndex", "sum_index", "SummationClosedForm"),
        ("NotEqual", "assert_equal", "ConstantOrSign"),
        ("UnknownSymbol", "define", "ModelingMismatch"),
        ("IndexDifferentiation", "differentiate_poly", "ModelingMismatch"),
        ("SingularFim", "crb", "FimFormulation"),
        ("ExpansionBlowup", "assemble_fim", "FimFormulation"),
        ("PatchExhausted", "simplify", "IncompleteDerivation"),
    ])
    def test_examples(self, kind, op, expected):
        assert classify_failure(kind, op).value == expected

    @given(st.one_of(st.none(), st.text(max_size=20)), st.one_of(st.none(), st.sampled_from(
        ["define", "sum_index", "assemble_fim", "crb", "mul_poly", "simplify", "bogus"])))
    def test_total(self, kind, op):
        assert isinstance(classify_failure(kind, op), FailureClass)

    def test_no_outputs(self):
        trace = DerivationTrace("S01", "template", steps=[StepRecord(0, "define", "x", "abandoned")])
        assert root_cause(trace) is FailureClass.NO_VALID_OUTPUT

    def test_first_failure_wins(self):
        trace = DerivationTrace("S01", "template", outputs={"a": "1"}, targets=["a", "b"], steps=[
            StepRecord(0, "mul_poly", "p", "patched-ok", failure_class="SummationClosedForm"),
            StepRecord(1, "crb", "c", "abandoned", failure_class="FimFormulation"),
        ])
        assert root_cause(trace) is FailureClass.SUMMATION_CLOSED_FORM

    def test_missing_targets(self):
        trace = DerivationTrace("S01", "template", outputs={"a": "1"}, targets=["a", "b"],
                                steps=[StepRecord(0, "define", "a")])
        assert root_cause(trace) is FailureClass.INCOMPLETE_DERIVATION


class TestTrace:
    def test_json_round_trip(self, s01):
        trace = derive(s01, inject=["sign-flip"])
        again = DerivationTrace.from_json(trace.to_json())
        assert again.to_json() == trace.to_json()

    def test_timing_excluded_by_default(self, s01):
        d = derive(s01, validate=False).to_dict()
        assert "wall_time" not in d
        assert all("elapsed" not in s for s in d["steps"])

    def test_deterministic_across_hash_seeds(self):
        code = ("from crbforge.pipeline import derive; from crbforge.scenarios import builtin; "
                "print(derive(builtin('S02'), seed=3, inject=['low-cap']).to_json())")
        outs = {
            subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True,
                           env={"PYTHONHASHSEED": seed, "PATH": ""}).stdout
            for seed in ("0", "12345")
        }
        assert len(outs) == 1


NAMES = ["a", "b", "c", "d", "e"]
SSA_TEXTS = ["theta", "k*theta^2", "M + 1"]


@st.composite
def random_steps(draw):
    n = draw(st.integers(1, 6))
    steps = []
    for i in range(n):
        op = draw(st.sampled_from(["define", "simplify", "differentiate"]))
        out = draw(st.sampled_from(NAMES))
        if op == "define":
            steps.append(step(i, op, [], out, text=draw(st.sampled_from(SSA_TEXTS))))
        else:
            src = draw(st.sampled_from(NAMES + ["phi", "noise"]))
            extra = {"wrt": "theta"} if op == "differentiate" else {}
            steps.append(step(i, op, [src], out, **extra))
    return tuple(steps)


class TestSsa:
    @settings(max_examples=200, deadline=None)
    @given(random_steps())
    def test_valid_plans_never_read_undefined(self, steps):
        spec = load_scenario(minimal_json())
        ws = analyze(spec)
        try:
            plan(spec, ws, _Fixed(steps))
        except PlanInvalid:
            return
        trace = execute(Plan(steps), ws, check=False)
        for rec in trace.steps:
            assert rec.error is None or rec.error["kind"] not in ("KeyError", "PlanInvalid")


class _Fixed:
    id = "fixed"

    def __init__(self, steps):
        self.steps = steps

    def plan(self, spec, ws):
        return Plan(self.steps, {}, self.id)
