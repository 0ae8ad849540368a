"""Failure-distribution and per-trace summary tables from trace files."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .errors import NoTraces
from .pipeline import DerivationTrace, FailureClass, root_cause

FAILURE_HEADERS = ["failure_class", "count", "percent"]
SUMMARY_HEADERS = ["trace", "scenario", "planner", "steps", "failed_steps", "revisions", "passed", "root_cause"]


def load_traces(directory: str | Path) -> list[tuple[str, DerivationTrace]]:
    """Every ``*.json`` file in ``directory`` that holds a trace, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise NoTraces(f"{directory} is not a directory")
    out = []
    for path in sorted(directory.glob("*.json")):
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            continue
        if isinstance(raw, dict) and "trace_version" in raw:
            out.append((path.name, DerivationTrace.from_dict(raw)))
    if not out:
        raise NoTraces(f"no trace files in {directory}")
    return out


def failure_distribution(traces) -> list[dict]:
    """Count each trace's root cause once; percentages are of failing traces."""
    counts = {fc: 0 for fc in FailureClass}
    for _, trace in traces:
        cause = root_cause(trace)
        if cause is not None:
            counts[cause] += 1
    failing = sum(counts.values())
    return [
        {
            "failure_class": fc.value,
            "count": n,
            "percent": f"{(100.0 * n / failing if failing else 0.0):.1f}",
        }
        for fc, n in counts.items()
    ]


def trace_summary(traces) -> list[dict]:
    rows = []
    for name, trace in traces:
        cause = root_cause(trace)
        rows.append({
            "trace": name,
            "scenario": trace.scenario,
            "planner": trace.planner,
            "steps": len(trace.steps),
            "failed_steps": ";".join(str(r.index) for r in trace.steps if r.status != "ok"),
            "revisions": trace.total_revisions,
            "passed": str(trace.passed).lower(),
            "root_cause": cause.value if cause else "",
        })
    return rows


def to_csv(rows: list[dict], headers: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=headers, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def render_table(rows: list[dict], headers: list[str]) -> str:
    widths = [max(len(h), *(len(str(r[h])) for r in rows)) if rows else len(h) for h in headers]
    line = lambda cells: "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()
    return "\n".join([line(headers), line("-" * w for w in widths)] + [line(r[h] for h in headers) for r in rows])


def build_report(directory: str | Path) -> dict:
    traces = load_traces(directory)
    return {
        "traces": len(traces),
        "failing_traces": sum(1 for _, t in traces if root_cause(t) is not None),
        "failure_distribution": failure_distribution(traces),
        "trace_summary": trace_summary(traces),
    }


def write_report(report: dict, out: str | Path) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "failure_distribution.csv": to_csv(report["failure_distribution"], FAILURE_HEADERS),
        "trace_summary.csv": to_csv(report["trace_summary"], SUMMARY_HEADERS),
        "report.json": json.dumps(report, indent=2, sort_keys=True) + "\n",
    }
    paths = []
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        paths.append(path)
    return paths
