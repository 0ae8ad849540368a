import csv
import json

import pytest

from crbforge.errors import NoTraces
from crbforge.pipeline import derive, root_cause
from crbforge.report import (
    FAILURE_HEADERS,
    SUMMARY_HEADERS,
    build_report,
    failure_distribution,
    load_traces,
    write_report,
)
from crbforge.scenarios import builtin

from corpus import EXPECTED, RECIPES, build_corpus


@pytest.fixture
def corpus(tmp_path):
    build_corpus(tmp_path / "corpus")
    return tmp_path / "corpus"


class TestCorpus:
    def test_each_trace_has_intended_cause(self, corpus):
        traces = load_traces(corpus)
        assert len(traces) == 17
        for (_, trace), recipe in zip(traces, RECIPES):
            assert root_cause(trace).value == recipe[0]

    def test_distribution(self, corpus):
        rows = failure_distribution(load_traces(corpus))
        assert {r["failure_class"]: r["percent"] for r in rows} == EXPECTED
        assert sum(r["count"] for r in rows) == 17

    def test_written_files(self, corpus, tmp_path):
        out = tmp_path / "report"
        write_report(build_report(corpus), out)
        with open(out / "failure_distribution.csv", newline="") as fh:
            reader = csv.DictReader(fh)
            assert reader.fieldnames == FAILURE_HEADERS
            assert {r["failure_class"]: r["percent"] for r in reader} == EXPECTED
        with open(out / "trace_summary.csv", newline="") as fh:
            reader = csv.DictReader(fh)
            assert reader.fieldnames == SUMMARY_HEADERS
            assert len(list(reader)) == 17
        assert json.loads((out / "report.json").read_text())["failing_traces"] == 17

    def test_byte_identical(self, corpus, tmp_path):
        write_report(build_report(corpus), tmp_path / "a")
        write_report(build_report(corpus), tmp_path / "b")
        for name in ("failure_distribution.csv", "trace_summary.csv", "report.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestEdges:
    def test_all_ok_trace(self, tmp_path):
        (tmp_path / "ok.json").write_text(derive(builtin("S01")).to_json())
        rows = failure_distribution(load_traces(tmp_path))
        assert all(r["percent"] == "0.0" and r["count"] == 0 for r in rows)
        assert len(rows) == 6

    def test_empty_directory(self, tmp_path):
        with pytest.raises(NoTraces):
            load_traces(tmp_path)

    def test_ignores_non_trace_json(self, tmp_path, corpus):
        (corpus / "bench.json").write_text('{"passed": 5}')
        assert len(load_traces(corpus)) == 17
