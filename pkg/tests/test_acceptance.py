"""The numbered acceptance criteria, one test each, at their stated tolerances."""

import csv
import math
import os
import random
import socket
import subprocess
import sys
import time
from fractions import Fraction

import pytest

from crbforge.calculus import MAX_POWER, differentiate, faulhaber
from crbforge.cli import main
from crbforge.errors import AllPointsSkipped, SingularFim
from crbforge.expr import const_value, eval_numeric
from crbforge.fisher import assemble_fim, crb
from crbforge.llm import BridgeConfig, LlmPatcher, LlmPlanner
from crbforge.pipeline import derive
from crbforge.scenarios import BUILTIN_IDS, builtin, load_scenario
from crbforge.validation import oracle_fim, sample_points, validate_numeric

from conftest import NetworkBlocked, minimal_json
from corpus import EXPECTED, build_corpus
from exprgen import random_expr, random_point
from helpers import adjugate_residual, bindings, model_of

TOL = 1e-6
POINTS = 20


def report(number, ok, detail):
    print(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def assert_validated(trace, tol=TOL):
    v = trace.validation
    assert v is not None and "error" not in v, v
    assert v["n_points"] == POINTS
    for name, t in v["targets"].items():
        assert t["error"] is None, (name, t)
        assert t["points_tested"] > 0, name
        assert t["max_rel_error"] <= tol, (name, t["max_rel_error"])
    assert trace.passed


@pytest.mark.acceptance(1, "S01 end-to-end template derivation")
def test_criterion_01_s01_end_to_end(s01):
    t0 = time.perf_counter()
    trace = derive(s01, n_points=POINTS, tol=TOL)
    elapsed = time.perf_counter() - t0
    assert sorted(trace.outputs) == sorted(s01.targets) and len(trace.outputs) == 8
    assert trace.total_revisions == 0
    assert all(r.status == "ok" for r in trace.steps)
    assert_validated(trace)
    assert elapsed < 2.0
    report(1, True, f"8 targets, 0 patches, {elapsed:.2f} s")


@pytest.mark.acceptance(2, "all five built-in scenarios within the bench budget")
def test_criterion_02_suite(tmp_path):
    t0 = time.perf_counter()
    code = main(["bench", "--planner", "template", "--jobs", "1", "--out", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    assert code == 0
    with open(tmp_path / "bench.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["scenario"] for r in rows] == list(BUILTIN_IDS)
    assert all(r["passed"] == "true" and r["revisions"] == "0" for r in rows)
    from crbforge.pipeline import DerivationTrace

    for sid in BUILTIN_IDS:
        assert_validated(DerivationTrace.from_json((tmp_path / "traces" / f"{sid}.trace.json").read_text()))
    assert elapsed < 10.0
    report(2, True, f"5/5 pass in {elapsed:.2f} s single-threaded")


@pytest.mark.acceptance(3, "power-sum closed forms are exact")
def test_criterion_03_faulhaber():
    for k in range(MAX_POWER + 1):
        for M in range(1, 51):
            assert const_value(faulhaber(k, M)) == sum(Fraction(m) ** k for m in range(M)), (k, M)
    report(3, True, "k = 0..8, M = 1..50")


@pytest.mark.acceptance(4, "symbolic derivatives agree with central differences")
def test_criterion_04_derivative_oracle():
    rng = random.Random(404)
    h = 1e-6
    worst = 0.0
    for _ in range(200):
        e = random_expr(rng, depth=4)
        wrt = rng.choice("xyz")
        pt = random_point(rng)
        up, down = dict(pt), dict(pt)
        up[wrt] += h
        down[wrt] -= h
        fd = (eval_numeric(e, up) - eval_numeric(e, down)) / (2 * h)
        exact = eval_numeric(differentiate(e, wrt), pt)
        err = abs(exact - fd) / max(1.0, abs(fd))
        worst = max(worst, err)
        assert err <= 1e-6, (e, wrt, pt, exact, fd)
    report(4, True, f"200 cases, worst {worst:.1e}")


@pytest.mark.acceptance(5, "complex-steering oracle matches the phase-only FIM")
def test_criterion_05_reduction():
    worst = 0.0
    for sid in BUILTIN_IDS:
        spec = builtin(sid)
        values = derive(spec, validate=False).values
        for pt in sample_points(spec, POINTS, seed=0):
            F = oracle_fim(spec, pt)
            b = bindings(spec, pt)
            for target in spec.targets:
                role = spec.role(target)
                if role.kind != "fim":
                    continue
                i, j = role.params
                got = eval_numeric(values[target], b)
                scale = abs(F[i, j]) if i == j else math.sqrt(F[i, i] * F[j, j])
                err = abs(got - F[i, j]) / scale
                worst = max(worst, err)
                assert err <= TOL, (sid, target, pt.id, err)
    report(5, True, f"5 scenarios x {POINTS} points, worst {worst:.1e}")


@pytest.mark.acceptance(6, "adjugate and determinant identities")
def test_criterion_06_matrix_identities(s01):
    worst = 0.0
    for spec in (load_scenario(minimal_json()), s01, builtin("S04")):
        worst = max(worst, adjugate_residual(spec, sample_points(spec, POINTS, seed=6)))
    assert worst <= 1e-8
    F = assemble_fim(model_of(s01))
    from crbforge.fisher import determinant

    assert determinant(F) == F[0, 0] * F[1, 1] - F[0, 1] * F[0, 1]
    report(6, True, f"P = 1, 2, 3; worst {worst:.1e}")


@pytest.mark.acceptance(7, "singular geometries are reported, not crashed on")
def test_criterion_07_singularity(s01):
    single = s01.with_ranges(m=1)
    with pytest.raises(SingularFim):
        crb(assemble_fim(model_of(single)), 0)
    trace = derive(single)
    assert trace.steps[-1].error["kind"] == "SingularFim" and not trace.passed

    endfire = s01.with_sampling(theta={"value": math.pi / 2})
    values = derive(s01, validate=False).values
    with pytest.raises(AllPointsSkipped):
        validate_numeric(values, endfire, n_points=POINTS)
    trace = derive(endfire)
    assert "AllPointsSkipped" in trace.validation["error"] and not trace.passed
    report(7, True, "SingularFim at M = 1; AllPointsSkipped at theta = 90 deg")


@pytest.mark.acceptance(8, "patcher recovers from injected faults")
def test_criterion_08_patcher(s01):
    trace = derive(s01, inject=["sign-flip", "low-cap"], n_points=POINTS, tol=TOL)
    failed = [r for r in trace.steps if r.error is not None]
    assert len(failed) >= 1
    assert trace.total_revisions >= 1
    assert all(r.status == "patched-ok" for r in failed)
    assert not trace.abandoned
    assert_validated(trace)
    report(8, True, f"{len(failed)} failed steps, {trace.total_revisions} revisions, all patched-ok")


@pytest.mark.acceptance(9, "failure report over the constructed corpus")
def test_criterion_09_report(tmp_path):
    build_corpus(tmp_path / "corpus")
    assert main(["report", str(tmp_path / "corpus"), "--out", str(tmp_path / "out")]) == 0
    with open(tmp_path / "out" / "failure_distribution.csv", newline="") as fh:
        got = {r["failure_class"]: r["percent"] for r in csv.DictReader(fh)}
    assert got == EXPECTED
    report(9, True, " / ".join(got[k] for k in EXPECTED))


@pytest.mark.acceptance(10, "identical inputs give byte-identical outputs")
def test_criterion_10_determinism(tmp_path):
    def cli(hash_seed, *argv):
        env = dict(os.environ, PYTHONHASHSEED=hash_seed)
        proc = subprocess.run([sys.executable, "-m", "crbforge", *argv], env=env, capture_output=True, text=True)
        return proc.returncode

    runs = {}
    for label, hash_seed in (("a", "1"), ("b", "2024")):
        out = tmp_path / label
        assert cli(hash_seed, "derive", "S02", "--seed", "11", "--inject", "low-cap", "--out", str(out)) == 0
        assert cli(hash_seed, "report", str(out), "--out", str(out / "report")) == 0
        runs[label] = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
    assert runs["a"] == runs["b"]
    assert len(runs["a"]) == 5
    report(10, True, f"{len(runs['a'])} files identical across two runs")


@pytest.mark.acceptance(11, "everything runs offline from recorded fixtures")
def test_criterion_11_offline(fixtures_dir, tmp_path, monkeypatch):
    monkeypatch.delenv("CRBFORGE_LLM_API_KEY", raising=False)
    with pytest.raises(NetworkBlocked):
        socket.create_connection(("192.0.2.1", 80), timeout=1)
    cfg = BridgeConfig(fixtures=str(fixtures_dir), max_retries=0)
    for sid in BUILTIN_IDS:
        assert derive(builtin(sid), planner=LlmPlanner(cfg)).passed
    patched = derive(builtin("S01"), patcher=LlmPatcher(cfg), inject=["degree-cap"])
    assert patched.passed and patched.total_revisions > 0
    assert main(["bench", "--planner", "llm", "--fixtures", str(fixtures_dir), "--jobs", "1",
                 "--out", str(tmp_path)]) == 0
    report(11, True, "llm planner and patcher replayed from fixtures with sockets blocked")
