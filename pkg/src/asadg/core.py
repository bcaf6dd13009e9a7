"""Adaptive sampling by barycenter refinement of a triangulated response manifold.

The loop starts from the corners of the input box, triangulates the current
points in a 2-d working plane, and scores the barycenter of every triangle
by the equation residual of the linearly interpolated output there.  A
barycenter whose residual exceeds the relaxation threshold
``rho0 / decay**k`` is solved exactly and joins the manifold; the rest are
dropped.  The threshold shrinks every iteration, so the worst-represented
regions are refined first.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ASADGError, DimensionMismatch, InvalidParams, SolverToleranceExceeded
from .reduced import GridEmbedding, nu
from .samplers import BoundingBox, SampleSet, corners
from .triangulation import Triangulation, delaunay, export_surface

__all__ = [
    "RelaxationSchedule",
    "StoppingCriteria",
    "ManifoldPoint",
    "Candidate",
    "IterationRecord",
    "RunReport",
    "AdaptiveSampler",
    "relaxation_threshold",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RelaxationSchedule:
    rho0: float
    decay: float

    def __post_init__(self):
        if not (self.rho0 > 0 and math.isfinite(self.rho0)):
            raise InvalidParams(f"rho0 must be positive and finite, got {self.rho0!r}")
        if not self.decay > 1:
            raise InvalidParams(f"decay factor must exceed 1, got {self.decay!r}")

    def exact_threshold(self, k: int) -> Fraction:
        """``rho0 / decay**k`` as a rational; floats are dyadic so this is exact."""
        if k < 0:
            raise InvalidParams("iteration index must be non-negative")
        return Fraction(self.rho0) / Fraction(self.decay) ** k

    def threshold(self, k: int) -> float:
        # correctly rounded, unlike evaluating rho0 / decay**k in floating point
        return float(self.exact_threshold(k))

    def exceeds(self, rho: float, k: int) -> bool:
        """``rho > threshold(k)`` decided without rounding the threshold."""
        return _exceeds(rho, self.exact_threshold(k))


def _exceeds(rho: float, exact: Fraction) -> bool:
    if math.isnan(rho):
        return False
    if math.isinf(rho):
        return rho > 0
    return Fraction(rho) > exact


def relaxation_threshold(schedule: RelaxationSchedule, k: int) -> float:
    return schedule.threshold(k)


@dataclass(frozen=True)
class StoppingCriteria:
    """Run limits; ``None`` disables a criterion, at least one must be set."""

    max_iterations: Optional[int] = 20
    max_points: Optional[int] = 10_000
    time_limit: Optional[float] = None
    metric_floor: Optional[float] = None
    stability_window: Optional[int] = None
    stability_tolerance: float = 1e-3

    def __post_init__(self):
        limits = (self.max_iterations, self.max_points, self.time_limit, self.metric_floor,
                  self.stability_window)
        if all(v is None for v in limits):
            raise InvalidParams("at least one stopping criterion must be finite")
        if self.stability_window is not None and self.stability_window < 2:
            raise InvalidParams("stability_window must be at least 2")


@dataclass
class ManifoldPoint:
    input: np.ndarray
    working: np.ndarray
    output: np.ndarray
    residual: float
    iteration: int = 0
    grid_index: Optional[int] = None


@dataclass
class Candidate:
    working: np.ndarray
    input: np.ndarray
    interpolated_output: np.ndarray
    rho: float
    simplex: tuple
    iteration: int
    grid_index: Optional[int] = None


@dataclass
class IterationRecord:
    iteration: int
    threshold: float
    candidates: int
    accepted: int
    rejected: int
    duplicates: int
    point_count: int
    metric_mean: float
    metric_max: float
    solver_calls: int
    residual_calls: int
    solver_seconds: float
    residual_seconds: float


_TIMING_FIELDS = ("solver_seconds", "residual_seconds")


@dataclass
class RunReport:
    """Per-iteration counters of one run.

    ``to_dict`` leaves out wall-clock fields so that reruns serialise
    byte-identically; ``timing_dict`` carries them separately.
    """

    mode: str
    initial_points: int
    iterations: list = field(default_factory=list)
    stop_reason: Optional[str] = None
    complete: bool = True
    error: Optional[str] = None
    initial_solver_seconds: float = 0.0
    membership_checks: int = 0

    @property
    def solver_calls(self) -> int:
        return self.iterations[-1].solver_calls if self.iterations else self.initial_points

    @property
    def residual_calls(self) -> int:
        return self.iterations[-1].residual_calls if self.iterations else 0

    @property
    def solver_seconds(self) -> float:
        return self.iterations[-1].solver_seconds if self.iterations else self.initial_solver_seconds

    @property
    def residual_seconds(self) -> float:
        return self.iterations[-1].residual_seconds if self.iterations else 0.0

    @property
    def total_accepted(self) -> int:
        return sum(r.accepted for r in self.iterations)

    @property
    def total_rejected(self) -> int:
        return sum(r.rejected for r in self.iterations)

    def metric_means(self) -> list:
        return [r.metric_mean for r in self.iterations]

    def point_counts(self) -> list:
        return [self.initial_points] + [r.point_count for r in self.iterations]

    def to_dict(self) -> dict:
        records = []
        for r in self.iterations:
            d = asdict(r)
            for key in _TIMING_FIELDS:
                d.pop(key)
            records.append(d)
        return {
            "mode": self.mode,
            "initial_points": self.initial_points,
            "stop_reason": self.stop_reason,
            "complete": self.complete,
            "error": self.error,
            "membership_checks": self.membership_checks,
            "totals": {
                "solver_calls": self.solver_calls,
                "residual_calls": self.residual_calls,
                "accepted": self.total_accepted,
                "rejected": self.total_rejected,
                "points": self.point_counts()[-1],
            },
            "iterations": records,
        }

    def timing_dict(self) -> dict:
        return {
            "initial_solver_seconds": self.initial_solver_seconds,
            "solver_seconds": self.solver_seconds,
            "residual_seconds": self.residual_seconds,
            "per_iteration": [
                {"iteration": r.iteration, **{k: getattr(r, k) for k in _TIMING_FIELDS}}
                for r in self.iterations
            ],
        }

    def generation_table(self) -> dict:
        """Counts, cumulative seconds and per-call averages for solver and residual."""
        rows = {}
        for name, calls, seconds in (
            ("solver", self.solver_calls, self.solver_seconds),
            ("residual", self.residual_calls, self.residual_seconds),
        ):
            rows[name] = {
                "calls": calls,
                "seconds": seconds,
                "seconds_per_call": seconds / calls if calls else None,
            }
        rows["total_seconds"] = self.solver_seconds + self.residual_seconds
        return rows


class AdaptiveSampler(BaseEstimator):
    """Residual-driven adaptive sampler.

    Parameters
    ----------
    problem : TransportProblem
        Supplies ``solve(s)``, ``residual(s, y)``, ``box()`` and
        ``solver_tolerance``.
    rho0, decay : float
        Relaxation threshold ``rho0 / decay**k`` at iteration ``k``.
    max_iterations, max_points, time_limit, metric_floor, stability_window, stability_tolerance
        Stopping criteria, see :class:`StoppingCriteria`.  ``max_points`` is
        also a hard budget: an iteration that would overshoot it accepts only
        its highest-residual candidates.
    max_accept_per_iteration : int or None
        Optional cap on points added in one iteration.
    embedding : GridEmbedding or None
        When given, inputs are high-dimensional: triangulation happens in the
        embedded plane and barycenters are mapped back to grid inputs.
    dedup_tolerance : float
        Barycenters closer than this (in box-normalised working coordinates)
        to an existing point are skipped.
    """

    def __init__(
        self,
        problem=None,
        rho0=1e3,
        decay=1.5,
        max_iterations=20,
        max_points=10_000,
        time_limit=None,
        metric_floor=None,
        stability_window=None,
        stability_tolerance=1e-3,
        max_accept_per_iteration=None,
        embedding: Optional[GridEmbedding] = None,
        dedup_tolerance=1e-9,
    ):
        self.problem = problem
        self.rho0 = rho0
        self.decay = decay
        self.max_iterations = max_iterations
        self.max_points = max_points
        self.time_limit = time_limit
        self.metric_floor = metric_floor
        self.stability_window = stability_window
        self.stability_tolerance = stability_tolerance
        self.max_accept_per_iteration = max_accept_per_iteration
        self.embedding = embedding
        self.dedup_tolerance = dedup_tolerance

    # -- setup -------------------------------------------------------------

    @property
    def schedule(self) -> RelaxationSchedule:
        return RelaxationSchedule(self.rho0, self.decay)

    @property
    def stopping(self) -> StoppingCriteria:
        return StoppingCriteria(
            self.max_iterations, self.max_points, self.time_limit, self.metric_floor,
            self.stability_window, self.stability_tolerance,
        )

    @property
    def high_dim(self) -> bool:
        return self.embedding is not None

    def _working_box(self) -> BoundingBox:
        if self.high_dim:
            emb = self.embedding.embedded_
            return BoundingBox(emb.min(axis=0), emb.max(axis=0), ("u", "v"))
        box = self.problem.input_box
        if box.dim != 2:
            raise DimensionMismatch(
                f"low-dimensional mode needs a 2-d input box, got {box.dim}-d; supply an embedding"
            )
        return box

    def _timed_solve(self, s):
        t0 = time.perf_counter()
        y = self.problem.solve(s)
        self.solver_seconds_ += time.perf_counter() - t0
        self.solver_calls_ += 1
        r = self.problem.residual(s, y)
        self.report_.membership_checks += 1
        if r > self.problem.solver_tolerance:
            raise SolverToleranceExceeded(
                f"solved point has residual {r:.3g} > tolerance {self.problem.solver_tolerance:.3g}"
            )
        return y, r

    def _add_point(self, s, working, grid_index=None):
        y, r = self._timed_solve(s)
        self.points_.append(
            ManifoldPoint(np.asarray(s, dtype=float), np.asarray(working, dtype=float), y, r,
                          self.iteration_, grid_index)
        )
        if grid_index is not None:
            self._grid_members.add(int(grid_index))

    def initialize(self):
        """Reset state and solve at the corners of the working box."""
        self.stopping  # validates
        self.schedule
        self.working_box_ = self._working_box()
        self.points_ = []
        self.iteration_ = 0
        self.solver_calls_ = 0
        self.residual_calls_ = 0
        self.solver_seconds_ = 0.0
        self.residual_seconds_ = 0.0
        self._grid_members = set()
        self._started = time.perf_counter()
        self.report_ = RunReport("high" if self.high_dim else "low", 0)
        cset = corners(self.working_box_)
        if self.high_dim:
            seen = []
            for idx in np.atleast_1d(self.embedding.pseudo_inverse_index(cset.points)):
                if int(idx) not in seen:
                    seen.append(int(idx))
            for idx in seen:
                self._add_point(self.embedding.grid_inputs_[idx], self.embedding.embedded_[idx], idx)
        else:
            for s in cset.points:
                self._add_point(s, s)
        self.report_.initial_points = len(self.points_)
        self.report_.initial_solver_seconds = self.solver_seconds_
        self.candidates_ = []
        return self

    # -- one iteration -----------------------------------------------------

    def _normalized(self, working) -> np.ndarray:
        return self.working_box_.normalize(working)

    def triangulate(self) -> Triangulation:
        return delaunay(self._normalized(np.array([p.working for p in self.points_])))

    def score_candidates(self) -> list:
        """One candidate per triangle, scored by the residual of the interpolated output."""
        tri = self.triangulate()
        ids = tri.source_index[tri.triangles]
        working = np.array([p.working for p in self.points_])
        outputs = [p.output for p in self.points_]
        bary_working = working[ids].mean(axis=1)
        bary_norm = tri.vertices[tri.triangles].mean(axis=1)
        near, _ = cKDTree(tri.vertices).query(bary_norm, k=1)
        grid_idx = None
        if self.high_dim:
            grid_idx = np.atleast_1d(self.embedding.pseudo_inverse_index(bary_working))
        candidates = []
        for t, (i, j, k) in enumerate(ids.tolist()):
            if near[t] <= self.dedup_tolerance:
                continue
            if self.high_dim:
                s = self.embedding.grid_inputs_[grid_idx[t]]
                gi = int(grid_idx[t])
            else:
                s = bary_working[t]
                gi = None
            y = (outputs[i] + outputs[j] + outputs[k]) / 3.0
            t0 = time.perf_counter()
            rho = self.problem.residual(s, y)
            self.residual_seconds_ += time.perf_counter() - t0
            self.residual_calls_ += 1
            candidates.append(
                Candidate(bary_working[t], s, y, rho, (i, j, k), self.iteration_, gi)
            )
        return candidates

    def step(self) -> IterationRecord:
        """Score, accept above the current threshold, solve accepted candidates."""
        check_is_fitted(self, "points_")
        threshold = self.schedule.threshold(self.iteration_)
        candidates = self.score_candidates()
        exact = self.schedule.exact_threshold(self.iteration_)
        over = [c for c in candidates if _exceeds(c.rho, exact)]
        duplicates = 0
        if self.high_dim:
            fresh, taken = [], set(self._grid_members)
            for c in sorted(over, key=lambda c: -c.rho):
                if c.grid_index in taken:
                    duplicates += 1
                else:
                    taken.add(c.grid_index)
                    fresh.append(c)
            over = fresh
        limit = len(over)
        if self.max_points is not None:
            limit = min(limit, max(self.max_points - len(self.points_), 0))
        if self.max_accept_per_iteration is not None:
            limit = min(limit, self.max_accept_per_iteration)
        if limit < len(over):
            order = sorted(range(len(over)), key=lambda q: -over[q].rho)[:limit]
            over = [over[q] for q in sorted(order)]
        for c in over:
            self._add_point(c.input, self.embedding.embedded_[c.grid_index] if self.high_dim else c.working,
                            c.grid_index)
        rhos = np.array([c.rho for c in candidates]) if candidates else np.array([np.nan])
        record = IterationRecord(
            iteration=self.iteration_,
            threshold=threshold,
            candidates=len(candidates),
            accepted=len(over),
            rejected=len(candidates) - len(over),
            duplicates=duplicates,
            point_count=len(self.points_),
            metric_mean=float(np.mean(rhos)),
            metric_max=float(np.max(rhos)),
            solver_calls=self.solver_calls_,
            residual_calls=self.residual_calls_,
            solver_seconds=self.solver_seconds_,
            residual_seconds=self.residual_seconds_,
        )
        self.report_.iterations.append(record)
        self.candidates_ = candidates
        self.iteration_ += 1
        return record

    # -- driver ------------------------------------------------------------

    def _stop_reason(self) -> Optional[str]:
        crit = self.stopping
        if crit.max_iterations is not None and self.iteration_ >= crit.max_iterations:
            return "max_iterations"
        if crit.max_points is not None and len(self.points_) >= crit.max_points:
            return "max_points"
        if crit.time_limit is not None and time.perf_counter() - self._started >= crit.time_limit:
            return "time_limit"
        records = self.report_.iterations
        # every barycenter already satisfies the membership tolerance: refining cannot help
        if records and records[-1].metric_max <= self.problem.solver_tolerance:
            return "interpolant_exact"
        means = self.report_.metric_means()
        if crit.metric_floor is not None and means and means[-1] <= crit.metric_floor:
            return "metric_floor"
        w = crit.stability_window
        if w is not None and len(means) >= w:
            recent = np.array(means[-w:])
            scale = max(abs(float(np.mean(recent))), np.finfo(float).tiny)
            if float(np.ptp(recent)) / scale <= crit.stability_tolerance:
                return "metric_stable"
        return None

    def fit(self, X=None, y=None):
        """Run the adaptive loop until a stopping criterion fires.

        ``X`` and ``y`` are ignored; the sampler generates its own data.
        """
        self.initialize()
        try:
            while (reason := self._stop_reason()) is None:
                self.step()
        except ASADGError as exc:
            self.report_.complete = False
            self.report_.error = f"{type(exc).__name__}: {exc}"
            self.report_.stop_reason = "error"
            raise
        self.report_.stop_reason = reason
        logger.info(
            "adaptive run stopped (%s) after %d iterations with %d points",
            reason, self.iteration_, len(self.points_),
        )
        return self

    # -- results -----------------------------------------------------------

    @property
    def inputs_(self) -> np.ndarray:
        return np.array([p.input for p in self.points_])

    @property
    def outputs_(self) -> np.ndarray:
        return np.array([p.output for p in self.points_])

    def sample_set(self) -> SampleSet:
        check_is_fitted(self, "points_")
        box = self.problem.input_box
        return SampleSet(self.inputs_, box, "asadg", metadata={"stop_reason": self.report_.stop_reason})

    def save_manifold_csv(self, path) -> Path:
        """Snapshot: inputs, working coordinates, residual at creation, iteration, grid index."""
        check_is_fitted(self, "points_")
        path = Path(path)
        names = list(self.problem.input_box.names)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(names + ["u", "v", "residual", "iteration", "grid_index"])
            for p in self.points_:
                writer.writerow(
                    [repr(float(v)) for v in p.input]
                    + [repr(float(v)) for v in p.working]
                    + [repr(float(p.residual)), p.iteration, "" if p.grid_index is None else p.grid_index]
                )
        return path

    def export_mesh(self, path) -> Path:
        """OBJ surface over the working plane with the output norm as height."""
        check_is_fitted(self, "points_")
        tri = delaunay(np.array([p.working for p in self.points_]))
        heights = [nu(self.points_[i].output) for i in tri.source_index]
        return export_surface(tri, heights, path)

    def save_report(self, path, timing_path=None) -> Path:
        check_is_fitted(self, "report_")
        path = Path(path)
        path.write_text(json.dumps(self.report_.to_dict(), indent=2, sort_keys=True) + "\n")
        if timing_path is not None:
            Path(timing_path).write_text(
                json.dumps(self.report_.timing_dict(), indent=2, sort_keys=True) + "\n"
            )
        return path
