"""Command-line entry point: ``crbforge derive | bench | report``.

Exit codes: 0 pass, 1 usage or configuration error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import AuthMissing, CrbError, NoTraces, SchemaError
from .pipeline import INJECTIONS, DeterministicPatcher, TemplatePlanner, derive
from .report import build_report, render_table, to_csv, write_report, FAILURE_HEADERS, SUMMARY_HEADERS
from .scenarios import BUILTIN_IDS, resolve

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
PLANNERS = ("template", "llm")
BENCH_HEADERS = [
    "scenario", "planner", "passed", "steps", "ok_steps", "patched_steps", "abandoned_steps", "revisions",
    "max_rel_error", "points_skipped",
]
TIMING_HEADERS = ["scenario", "wall_time_s"]


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    scenarios: list[str] = field(default_factory=list)
    planner: str = "template"
    seed: int = 0
    points: int = 20
    tol: float = 1e-6
    out: str = "crbforge-out"
    jobs: int = 0
    inject: list[str] = field(default_factory=list)
    fixtures: str | None = None
    endpoint: str = ""
    model: str | None = None
    timeout: float = 60.0
    api_key_env: str | None = None
    max_retries: int = 2
    temperature: float = 0.0

    def bridge(self):
        from .llm import DEFAULT_KEY_ENV, DEFAULT_MODEL, BridgeConfig

        return BridgeConfig(
            endpoint=self.endpoint,
            model=self.model or DEFAULT_MODEL,
            api_key_env=self.api_key_env or DEFAULT_KEY_ENV,
            timeout=self.timeout,
            max_retries=self.max_retries,
            temperature=self.temperature,
            fixtures=self.fixtures,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _run_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--scenario", action="append", metavar="ID_OR_PATH",
                   help=f"built-in id ({', '.join(BUILTIN_IDS)}) or scenario file; repeatable")
    p.add_argument("--planner", help="template (default) or llm")
    p.add_argument("--seed", type=int, help="sampling seed (default 0)")
    p.add_argument("--points", type=int, help="numeric validation points (default 20)")
    p.add_argument("--tol", type=float, help="relative tolerance for numeric validation (default 1e-6)")
    p.add_argument("--out", help="output directory (created if absent)")
    p.add_argument("--jobs", type=int, help="parallel workers for bench (default: logical cores)")
    p.add_argument("--inject", action="append", choices=INJECTIONS, help="fault injection; repeatable")
    p.add_argument("--fixtures", help="replay LLM replies from this fixture directory (no network)")
    p.add_argument("--endpoint", help="chat-completion endpoint URL")
    p.add_argument("--model", help="model name sent to the endpoint")
    p.add_argument("--timeout", type=float, help="request timeout in seconds, 1..600")
    p.add_argument("--config", help="JSON config file; flags override it")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crbforge", description="Exact CRB derivations with verification and reports.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    flags = _run_flags()
    d = sub.add_parser("derive", parents=[flags], help="derive and validate one scenario")
    d.add_argument("target", nargs="?", metavar="SCENARIO", help="built-in id or scenario file")
    sub.add_parser("bench", parents=[flags], help="derive and validate the built-in suite")
    r = sub.add_parser("report", help="failure distribution and summaries from a trace directory")
    r.add_argument("trace_dir", help="directory of trace JSON files")
    r.add_argument("--out", help="where to write CSV/JSON (default: the trace directory)")
    r.add_argument("--config", help="JSON config file")
    return parser


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return raw


def run_config(args) -> RunConfig:
    merged = _load_config(getattr(args, "config", None))
    for f in fields(RunConfig):
        flag = "scenario" if f.name == "scenarios" else f.name
        value = getattr(args, flag, None)
        if value is not None:
            merged[f.name] = value
    if getattr(args, "target", None):
        merged["scenarios"] = [args.target] + list(merged.get("scenarios") or [])
    cfg = RunConfig(**merged)
    if cfg.planner not in PLANNERS:
        raise UsageError(f"unknown planner {cfg.planner!r}; choose from {', '.join(PLANNERS)}")
    if cfg.points < 1:
        raise UsageError("--points must be at least 1")
    if not cfg.tol > 0:
        raise UsageError("--tol must be positive")
    if cfg.jobs < 0:
        raise UsageError("--jobs must be non-negative")
    bad = [i for i in cfg.inject if i not in INJECTIONS]
    if bad:
        raise UsageError(f"unknown injections {bad}")
    return cfg


def _roles(cfg: RunConfig):
    if cfg.planner == "template":
        return TemplatePlanner(), DeterministicPatcher()
    from .llm import LlmPatcher, LlmPlanner

    bridge = cfg.bridge()
    if not bridge.fixtures:
        bridge.url  # raises when no endpoint is configured
        if not os.environ.get(bridge.api_key_env):
            raise AuthMissing(f"environment variable {bridge.api_key_env} is not set")
    return LlmPlanner(bridge), LlmPatcher(bridge)


def _derive_one(spec_ref: str, cfg: RunConfig):
    spec = resolve(spec_ref)
    planner, patcher = _roles(cfg)
    t0 = time.perf_counter()
    trace = derive(spec, planner=planner, patcher=patcher, seed=cfg.seed, inject=cfg.inject,
                   n_points=cfg.points, tol=cfg.tol)
    return trace, time.perf_counter() - t0


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _summary(trace) -> str:
    counts = trace.status_counts()
    parts = [f"{trace.scenario}: {len(trace.steps)} steps ({counts['ok']} ok, {counts['patched-ok']} patched, "
             f"{counts['abandoned']} abandoned), {trace.total_revisions} revisions"]
    v = trace.validation
    if v is None:
        parts.append("not validated")
    elif "error" in v:
        parts.append(f"validation failed: {v['error']}")
    else:
        errs = [t["max_rel_error"] for t in v["targets"].values() if t["max_rel_error"] is not None]
        worst = f"{max(errs):.2e}" if errs else "n/a"
        parts.append(f"validation {'pass' if v['passed'] else 'FAIL'} (max rel err {worst})")
    if trace.missing_targets:
        parts.append(f"missing {', '.join(trace.missing_targets)}")
    parts.extend(trace.notes)
    return "; ".join(parts)


def cmd_derive(cfg: RunConfig) -> int:
    if len(cfg.scenarios) != 1:
        raise UsageError("derive needs exactly one scenario")
    ref = cfg.scenarios[0]
    if ref not in BUILTIN_IDS and not Path(ref).is_file():
        raise UsageError(f"no such scenario: {ref}")
    trace, _ = _derive_one(ref, cfg)
    out = Path(cfg.out)
    _write(out / f"{trace.scenario}.trace.json", trace.to_json())
    if trace.validation is not None:
        _write(out / f"{trace.scenario}.validation.json", json.dumps(trace.validation, indent=2, sort_keys=True) + "\n")
    print(_summary(trace), file=sys.stderr)
    return EXIT_OK if trace.passed else EXIT_FAIL


def _bench_worker(args):
    ref, cfg_dict = args
    cfg = RunConfig(**cfg_dict)
    trace, wall = _derive_one(ref, cfg)
    return trace.to_json(), wall


def cmd_bench(cfg: RunConfig) -> int:
    from .pipeline import DerivationTrace

    refs = cfg.scenarios or list(BUILTIN_IDS)
    for ref in refs:
        if ref not in BUILTIN_IDS and not Path(ref).is_file():
            raise UsageError(f"no such scenario: {ref}")
    _roles(cfg)  # surface configuration errors before any work
    jobs = cfg.jobs or os.cpu_count() or 1
    work = [(ref, asdict(cfg)) for ref in refs]
    t0 = time.perf_counter()
    if jobs == 1 or len(work) == 1:
        results = [_bench_worker(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            results = list(pool.map(_bench_worker, work))
    total = time.perf_counter() - t0
    out = Path(cfg.out)
    rows, timing = [], []
    all_pass = True
    for text, wall in results:
        trace = DerivationTrace.from_json(text)
        _write(out / "traces" / f"{trace.scenario}.trace.json", text)
        counts = trace.status_counts()
        v = trace.validation or {}
        errs = [t["max_rel_error"] for t in v.get("targets", {}).values() if t["max_rel_error"] is not None]
        rows.append({
            "scenario": trace.scenario,
            "planner": trace.planner,
            "passed": str(trace.passed).lower(),
            "steps": len(trace.steps),
            "ok_steps": counts["ok"],
            "patched_steps": counts["patched-ok"],
            "abandoned_steps": counts["abandoned"],
            "revisions": trace.total_revisions,
            "max_rel_error": f"{max(errs):.3e}" if errs else "",
            "points_skipped": v.get("points_skipped", ""),
        })
        timing.append({"scenario": trace.scenario, "wall_time_s": f"{wall:.3f}"})
        all_pass &= trace.passed
    summary = {"seed": cfg.seed, "tol": cfg.tol, "points": cfg.points, "planner": cfg.planner,
               "inject": cfg.inject, "passed": all_pass, "scenarios": rows}
    _write(out / "bench.csv", to_csv(rows, BENCH_HEADERS))
    _write(out / "bench.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    # Wall times vary run to run, so they live apart from the deterministic outputs.
    _write(out / "bench_timing.csv", to_csv(timing + [{"scenario": "total", "wall_time_s": f"{total:.3f}"}],
                                           TIMING_HEADERS))
    print(render_table(rows, BENCH_HEADERS))
    print(f"{sum(r['passed'] == 'true' for r in rows)}/{len(rows)} pass; wall time {total:.2f} s", file=sys.stderr)
    return EXIT_OK if all_pass else EXIT_FAIL


def cmd_report(args) -> int:
    _load_config(args.config)
    report = build_report(args.trace_dir)
    write_report(report, args.out or args.trace_dir)
    print(render_table(report["failure_distribution"], FAILURE_HEADERS))
    print()
    print(render_table(report["trace_summary"], SUMMARY_HEADERS))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "report":
            return cmd_report(args)
        cfg = run_config(args)
        if args.command == "derive":
            return cmd_derive(cfg)
        return cmd_bench(cfg)
    except (UsageError, SchemaError, AuthMissing, NoTraces, FileNotFoundError) as exc:
        print(f"crbforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CrbError as exc:
        print(f"crbforge: {exc.kind}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
