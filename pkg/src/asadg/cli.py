"""Command line entry point: ``asadg {solve,sample,benchmark,report}``.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .exceptions import ASADGError, ConfigError
from .experiments import (
    build_problem,
    run_benchmark,
    run_sample,
    run_threshold_sweep,
    write_fig3a,
    write_table1_summary,
)
from .problems import Case2Problem

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--out", type=Path, help="output directory, overrides the config")
    common.add_argument("--mode", choices=["low", "high"], help="input dimensionality")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="asadg", description="Residual-driven adaptive sampling")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="solve one input and write the solution")
    p.add_argument("--input", type=_floats, required=True,
                   help="low: mach,x_m; high: Chebyshev coefficients of mach, Re g, Im g")
    sub.add_parser("sample", parents=[common], help="run the configured sampler")
    sub.add_parser("benchmark", parents=[common], help="ASADG against the one-shot baseline")
    p = sub.add_parser("report", parents=[common], help="figure and table data from a run")
    p.add_argument("--sweep", type=_floats, help="initial thresholds for a point-count sweep")
    return parser


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    out = None if args.out is None else str(args.out)
    return config.with_overrides(mode=args.mode, seed=args.seed, output_dir=out)


def cmd_solve(config: ExperimentConfig, values) -> Path:
    problem = build_problem(config)
    s = np.asarray(values, dtype=float)
    if isinstance(problem, Case2Problem):
        s = problem.expand(s)
    y = problem.solve(s)
    n = problem.node_count
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "solution.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "re_y", "im_y"])
        for x, re, im in zip(problem.grid.nodes.tolist(), y[:n].tolist(), y[n:].tolist()):
            writer.writerow([repr(x), repr(re), repr(im)])
    return path


def cmd_report(config: ExperimentConfig, sweep=None) -> list:
    out = Path(config.output_dir)
    written = []
    report_path = out / "run_report.json"
    if report_path.is_file():
        run_report = json.loads(report_path.read_text())
        timing_path = out / "timing.json"
        timing = json.loads(timing_path.read_text()) if timing_path.is_file() else None
        written.append(write_fig3a(run_report, out / "fig3a.csv"))
        written.append(write_table1_summary(run_report, timing, out / "table1_summary.csv"))
    if sweep:
        out.mkdir(parents=True, exist_ok=True)
        written.append(run_threshold_sweep(config, sweep, out / "fig3b.csv"))
    if not written:
        raise ConfigError(f"nothing to report: {report_path} is missing and no --sweep given")
    return written


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _config(args)
        if args.command == "solve":
            written = [cmd_solve(config, args.input)]
        elif args.command == "sample":
            written = list(run_sample(config).values())
        elif args.command == "benchmark":
            written = list(run_benchmark(config, progress=logging.getLogger("asadg").info)["paths"].values())
        else:
            written = cmd_report(config, args.sweep)
    except ConfigError as exc:
        print(f"asadg: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ASADGError, OSError) as exc:
        print(f"asadg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
