"""Experiment orchestration behind the command line: sampling runs, benchmarks, report files.

Every writer here emits deterministic bytes for a fixed config and seed.
Wall-clock numbers go to separate ``*timing*.json`` files.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, component_seed
from .core import AdaptiveSampler, RunReport
from .exceptions import ConfigError
from .problems import Case1Problem, Case2Problem, TransportProblem
from .reduced import GridEmbedding, fit_projector, save_embedding_csv
from .samplers import SampleSet, cartesian, lhs, uniform
from .surrogate import MlpConfig, mnre, predict, train

__all__ = [
    "build_problem",
    "build_embedding",
    "build_sampler",
    "one_shot_sample",
    "solve_all",
    "run_sample",
    "run_benchmark",
    "write_fig3a",
    "write_table1_summary",
    "run_threshold_sweep",
    "write_json",
]

logger = logging.getLogger(__name__)

BASELINE = {"low": "lhs", "high": "uniform"}


def write_json(data, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def build_problem(config: ExperimentConfig, mode=None) -> TransportProblem:
    mode = mode or config.mode
    s = config.solver
    common = dict(node_count=s.node_count, wave_number=s.wave_number,
                  solver_tolerance=s.solver_tolerance, mach_floor=s.mach_floor)
    if mode == "low":
        c = config.case1
        return Case1Problem(**common, a=c.a, alpha=c.alpha, sigma=c.sigma,
                            mach_range=tuple(c.mach_range), x_m_range=tuple(c.x_m_range))
    c = config.case2
    return Case2Problem(**common, degree=c.degree, mach_c0_range=tuple(c.mach_c0_range),
                        mach_higher_range=tuple(c.mach_higher_range),
                        source_range=tuple(c.source_range), grid_degree=c.grid_degree,
                        grid_points_per_dim=c.grid_points_per_dim)


def build_embedding(config: ExperimentConfig, problem: Case2Problem, seed=None) -> GridEmbedding:
    """Preprocessing grid plus projector for high-dimensional runs."""
    c = config.case2
    seed = config.seed if seed is None else seed
    if c.grid_sampler == "uniform":
        grid = problem.uniform_inputs(c.grid_size, component_seed(seed, "grid")).points
    else:
        grid = problem.preprocessing_grid()[1]
    return fit_projector(grid, c.projector, c.embedding_path,
                         random_state=component_seed(seed, "projector") % 2**32)


def build_sampler(config: ExperimentConfig, problem, embedding=None, **overrides) -> AdaptiveSampler:
    a = config.asadg
    params = dict(
        rho0=a.rho0, decay=a.decay, max_iterations=a.max_iterations, max_points=a.max_points,
        time_limit=a.time_limit, metric_floor=a.metric_floor, stability_window=a.stability_window,
        stability_tolerance=a.stability_tolerance,
        max_accept_per_iteration=a.max_accept_per_iteration,
    )
    params.update(overrides)
    return AdaptiveSampler(problem, embedding=embedding, **params)


def one_shot_sample(method: str, n: int, problem, seed) -> SampleSet:
    if isinstance(problem, Case2Problem):
        if method == "uniform":
            return problem.uniform_inputs(n, seed)
        if method == "cartesian":
            coeffs, nodal = problem.preprocessing_grid()
            return SampleSet(nodal, problem.input_box, "cartesian")
        raise ConfigError(f"sampler {method!r} is not available for high-dimensional inputs")
    box = problem.input_box
    if method == "lhs":
        return lhs(n, box, seed)
    if method == "uniform":
        return uniform(n, box, seed)
    if method == "cartesian":
        side = max(int(round(n ** (1.0 / box.dim))), 1)
        return cartesian([side] * box.dim, box)
    raise ConfigError(f"unknown sampler {method!r}")


def solve_all(problem, inputs):
    """Solve every input; returns ``(outputs, seconds)`` timing only the solver calls."""
    outputs, seconds = [], 0.0
    for s in inputs:
        t0 = time.perf_counter()
        outputs.append(problem.solve(s))
        seconds += time.perf_counter() - t0
    return np.array(outputs), seconds


def _write_solutions(problem, outputs, path):
    n = problem.node_count
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample"] + [f"re_y{i}" for i in range(n)] + [f"im_y{i}" for i in range(n)])
        for i, y in enumerate(outputs):
            writer.writerow([i] + [repr(float(v)) for v in y])


def run_sample(config: ExperimentConfig) -> dict:
    """Run the configured sampler and write its files into ``config.output_dir``."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(config)
    method = config.sampler.method
    written = {}
    if method == "asadg":
        embedding = build_embedding(config, problem) if config.mode == "high" else None
        sampler = build_sampler(config, problem, embedding)
        try:
            sampler.fit()
        finally:
            if hasattr(sampler, "report_"):
                written["run_report"] = sampler.save_report(out / "run_report.json", out / "timing.json")
                written["timing"] = out / "timing.json"
        written["manifold"] = sampler.save_manifold_csv(out / "manifold.csv")
        written["mesh"] = sampler.export_mesh(out / "mesh.obj")
        if embedding is not None:
            written["embedding"] = save_embedding_csv(embedding.embedded_, out / "embedding.csv")
        samples = sampler.sample_set()
        samples.seed = config.seed
        outputs = sampler.outputs_
    else:
        samples = one_shot_sample(method, config.sampler.n, problem,
                                  component_seed(config.seed, "sampler"))
        outputs, _ = solve_all(problem, samples.points)
    samples.metadata.pop("coefficients", None)
    written["samples"] = samples.to_csv(out / "samples.csv")
    _write_solutions(problem, outputs, out / "solutions.csv")
    written["solutions"] = out / "solutions.csv"
    written["config"] = config.save(out / "config.json")
    return written


# -- benchmark -------------------------------------------------------------


def _train_and_score(config, mode, seed, X, Y, X_test, Y_test):
    s = config.surrogate[mode]
    mlp = MlpConfig(X.shape[1], Y.shape[1], tuple(s.hidden_sizes), s.learning_rate, s.epochs,
                    s.batch_size, component_seed(seed, "surrogate"))
    model, trace = train(X, Y, mlp)
    report = mnre(predict(model, X_test), Y_test)
    return report, trace


def _benchmark_arm(config: ExperimentConfig, mode: str, seed: int) -> tuple[dict, dict, dict]:
    b = config.benchmark
    problem = build_problem(config, mode)
    embedding = build_embedding(config, problem, seed) if mode == "high" else None
    sampler = build_sampler(config, problem, embedding, max_points=b.train_size,
                            max_iterations=b.max_iterations, time_limit=None, metric_floor=None,
                            stability_window=None)
    sampler.fit()
    report: RunReport = sampler.report_
    X_a, Y_a = sampler.inputs_, sampler.outputs_
    n_train = X_a.shape[0]
    if n_train < b.train_size:
        logger.warning("ASADG stopped at %d of %d points (%s)", n_train, b.train_size,
                       report.stop_reason)
    baseline = BASELINE[mode]
    X_b = one_shot_sample(baseline, n_train, problem, component_seed(seed, "sampler")).points
    Y_b, baseline_seconds = solve_all(problem, X_b)

    n_test = max(1, int(round(b.test_fraction * b.train_size)))
    X_t = one_shot_sample("uniform", n_test, problem, component_seed(seed, "test_set")).points
    Y_t, _ = solve_all(problem, X_t)

    m_a, trace_a = _train_and_score(config, mode, seed, X_a, Y_a, X_t, Y_t)
    m_b, trace_b = _train_and_score(config, mode, seed, X_b, Y_b, X_t, Y_t)
    winner = "asadg" if m_a.mnre < m_b.mnre else baseline if m_b.mnre < m_a.mnre else "tie"
    table3 = {
        "seed": seed,
        "train_size": n_train,
        "test_size": n_test,
        "asadg": {**m_a.to_dict(), "final_training_loss": trace_a[-1] if trace_a else None},
        baseline: {**m_b.to_dict(), "final_training_loss": trace_b[-1] if trace_b else None},
        "winner": winner,
        "asadg_stop_reason": report.stop_reason,
        "asadg_budget_reached": n_train >= b.train_size,
    }
    table1 = {
        "seed": seed,
        "solver_calls": report.solver_calls,
        "residual_calls": report.residual_calls,
        "accepted": report.total_accepted,
        "rejected": report.total_rejected,
        "iterations": len(report.iterations),
        "baseline_solver_calls": len(X_b),
    }
    timing = {
        "seed": seed,
        "solver_seconds": report.solver_seconds,
        "residual_seconds": report.residual_seconds,
        "baseline_solver_seconds": baseline_seconds,
    }
    return table1, timing, table3


def _per_call(seconds, calls):
    return seconds / calls if calls else None


def run_benchmark(config: ExperimentConfig, progress=None) -> dict:
    """Both sampler arms for every mode and seed; writes Table-1 and Table-3 shaped JSON."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    b = config.benchmark
    table1, timing, table3 = {}, {}, {}
    for mode in b.modes:
        rows1, rows_t, rows3 = [], [], []
        for seed in b.seeds:
            if progress:
                progress(f"benchmark {mode} seed {seed}")
            r1, rt, r3 = _benchmark_arm(config, mode, seed)
            rows1.append(r1)
            rows_t.append(rt)
            rows3.append(r3)
        solver_calls = sum(r["solver_calls"] for r in rows1)
        residual_calls = sum(r["residual_calls"] for r in rows1)
        solver_s = sum(r["solver_seconds"] for r in rows_t)
        residual_s = sum(r["residual_seconds"] for r in rows_t)
        table1[mode] = {
            "solver": {"count": solver_calls},
            "residual": {"count": residual_calls},
            "rejected": sum(r["rejected"] for r in rows1),
            "per_seed": rows1,
        }
        timing[mode] = {
            "solver": {"seconds": solver_s, "seconds_per_call": _per_call(solver_s, solver_calls)},
            "residual": {"seconds": residual_s,
                         "seconds_per_call": _per_call(residual_s, residual_calls)},
            "total_seconds": solver_s + residual_s,
            "residual_faster_per_call": _per_call(residual_s, residual_calls)
            < _per_call(solver_s, solver_calls),
            "per_seed": rows_t,
        }
        baseline = BASELINE[mode]
        table3[mode] = {
            "baseline": baseline,
            "per_seed": rows3,
            "mean_over_seeds": {
                arm: {
                    "mnre": float(np.mean([r[arm]["mnre"] for r in rows3])),
                    "std": float(np.mean([r[arm]["std"] for r in rows3])),
                }
                for arm in ("asadg", baseline)
            },
            "asadg_wins": sum(r["winner"] == "asadg" for r in rows3),
        }
    paths = {
        "table1": write_json(table1, out / "table1.json"),
        "table1_timing": write_json(timing, out / "table1_timing.json"),
        "table3": write_json(table3, out / "table3.json"),
        "config": config.save(out / "config.json"),
    }
    return {"paths": paths, "table1": table1, "timing": timing, "table3": table3}


# -- report files ----------------------------------------------------------


def write_fig3a(run_report: dict, path) -> Path:
    """Point count and metric mean per iteration (iteration -1 is the initial state)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "threshold", "point_count", "metric_mean", "accepted", "rejected"])
        writer.writerow([-1, "", run_report["initial_points"], "", "", ""])
        for r in run_report["iterations"]:
            writer.writerow([r["iteration"], repr(r["threshold"]), r["point_count"],
                             repr(r["metric_mean"]), r["accepted"], r["rejected"]])
    return Path(path)


def write_table1_summary(run_report: dict, timing: dict | None, path) -> Path:
    totals = run_report["totals"]
    rows = [("solver", totals["solver_calls"], timing and timing["solver_seconds"]),
            ("residual", totals["residual_calls"], timing and timing["residual_seconds"])]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["category", "count", "seconds", "seconds_per_call"])
        for name, count, seconds in rows:
            per_call = seconds / count if seconds is not None and count else None
            writer.writerow([name, count, "" if seconds is None else repr(seconds),
                             "" if per_call is None else repr(per_call)])
        if timing:
            writer.writerow(["total", "", repr(timing["solver_seconds"] + timing["residual_seconds"]), ""])
    return Path(path)


def run_threshold_sweep(config: ExperimentConfig, rho0_values, path) -> Path:
    """Final point count for each initial threshold, everything else fixed."""
    problem = build_problem(config)
    embedding = build_embedding(config, problem) if config.mode == "high" else None
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rho0", "final_points", "stop_reason"])
        for rho0 in rho0_values:
            sampler = build_sampler(config, problem, embedding, rho0=float(rho0)).fit()
            writer.writerow([repr(float(rho0)), len(sampler.points_), sampler.report_.stop_reason])
    return Path(path)
