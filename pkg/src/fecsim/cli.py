"""Command-line entry point: ``fecsim run|preset|trace-report|verify``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import checks, scenarios, traces
from .core import ConfigError, load_config, save_config
from .engine import PolicyViolation, SimulationError, replicate, run_summary
from .oracles import Unstable
from .stats import replication_ci
from .servicemodels import ModelError

FORMATS = ("table", "csv", "json")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--out", type=Path, default=None, help="directory for result files")
    p.add_argument("--format", choices=FORMATS, default="table")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fecsim", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run the replications described by a config file")
    run.add_argument("config", type=Path)
    _add_common(run)

    pre = sub.add_parser("preset", help="run a figure-style preset")
    pre.add_argument("name", choices=scenarios.PRESETS)
    pre.add_argument("--arrivals", type=int, default=None, help="arrivals per replication")
    _add_common(pre)

    rep = sub.add_parser("trace-report", help="summarise a chunk-delay trace")
    rep.add_argument("path", type=Path)
    rep.add_argument("--out", type=Path, default=None)
    rep.add_argument("--format", choices=FORMATS, default="table")
    rep.add_argument("--max-lag", type=int, default=10)

    ver = sub.add_parser("verify", help="run the oracle and property acceptance checks")
    ver.add_argument("--tier", choices=sorted(checks.TIERS), default="smoke")
    ver.add_argument("--only", type=int, nargs="*", default=None, help="criterion numbers")
    ver.add_argument("--format", choices=FORMATS, default="table")
    return parser


def _emit(text: str, out: Path | None, filename: str):
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / filename).write_text(text, encoding="utf-8")
    print(f"wrote {out / filename}", file=sys.stderr)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(master_seed=args.seed)
    if args.replications is not None:
        cfg = cfg.replace(replications=args.replications)
    sets = replicate(cfg, workers=args.workers)
    means = [float(np.mean(s.delays)) for s in sets]
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        save_config(cfg, args.out / "config.ini")
        for s in sets:
            (args.out / f"records_rep{s.replication:04d}.csv").write_text(s.to_csv(), encoding="utf-8")
    if args.format == "json":
        _emit(run_summary(cfg, sets) + "\n", args.out, "summary.json")
    elif args.format == "csv":
        lines = ["replication,records,mean_delay_ms,fingerprint,master_seed"]
        lines += [f"{s.replication},{len(s)},{m!r},{s.fingerprint},{cfg.master_seed}" for s, m in zip(sets, means)]
        _emit("\n".join(lines) + "\n", args.out, "summary.csv")
    else:
        grand = float(np.mean(means))
        ci = f" +/- {replication_ci(means)[1]:.6g}" if len(means) >= 2 else ""
        text = (f"config {cfg.fingerprint()}  seed {cfg.master_seed}  policy {cfg.policy}\n"
                f"replications {len(sets)}  requests/replication {len(sets[0])}\n"
                f"mean delay {grand:.6g}{ci} ms\n")
        if cfg.model_extension:
            text += "note: non-exponential service model (outside the closed-form oracles)\n"
        _emit(text, args.out, "summary.txt")
    return 0


def cmd_preset(args) -> int:
    seed = scenarios.DEFAULT_SEED if args.seed is None else args.seed
    result = scenarios.run_preset(args.name, seed=seed, replications=args.replications,
                                  num_arrivals=args.arrivals, workers=args.workers)
    ext = {"table": "txt"}.get(args.format, args.format)
    _emit(result.render(args.format), args.out, f"{args.name}.{ext}")
    return 0


def cmd_trace_report(args) -> int:
    trace = traces.load_trace(args.path)
    report = traces.trace_report(trace, max_lag=args.max_lag)
    if args.format == "json":
        _emit(traces.report_json(report) + "\n", args.out, "trace_report.json")
    elif args.format == "csv":
        from .stats import ccdf_csv

        _emit(ccdf_csv(report["ccdf"]), args.out, "trace_ccdf.csv")
    else:
        lines = [f"source   {report['source']}", f"samples  {report['samples']}",
                 f"mean     {report['mean_ms']:.6g} ms"]
        lines += [f"{k:8s} {v:.6g} ms" for k, v in report["percentiles_ms"].items()]
        fit = report["fit"]
        lines.append(f"fit      shift={fit['shift_ms']:.6g} ms rate={fit['rate_per_ms']:.6g}/ms"
                     if "error" not in fit else f"fit      unavailable ({fit['detail']})")
        lines += [f"acf[{lag}]   {'-' if v is None else f'{v:.4f}'}" for lag, v in report["autocorrelation"].items()]
        _emit("\n".join(lines) + "\n", args.out, "trace_report.txt")
    return 0


def cmd_verify(args) -> int:
    failed = 0
    results = []
    for result in checks.run_checks(args.tier, args.only):
        failed += not result.passed
        results.append(result)
        if args.format == "table":
            print(result.line(), flush=True)
    if args.format != "table":
        payload = [{"criterion": r.number, "title": r.title, "passed": r.passed, "detail": r.detail} for r in results]
        print(json.dumps(payload, indent=2, default=str))
    return 1 if failed else 0


COMMANDS = {"run": cmd_run, "preset": cmd_preset, "trace-report": cmd_trace_report, "verify": cmd_verify}
USER_ERRORS = (ConfigError, Unstable, PolicyViolation, SimulationError, ModelError, traces.ParseError,
               traces.EmptyTrace, FileNotFoundError, ValueError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except USER_ERRORS as exc:
        print(f"fecsim {args.verb}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
