"""One-shot samplers: bounding-box corners, Latin hypercube, uniform, Cartesian.

All random draws go through :func:`make_rng`, a Philox-4x64 counter-based
generator, so a seed reproduces the same points on every platform.
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import BudgetExceeded, DimensionMismatch, DimensionTooLarge, InvalidParams

__all__ = [
    "BoundingBox",
    "SampleSet",
    "make_rng",
    "corners",
    "lhs",
    "uniform",
    "cartesian",
    "MAX_CORNER_DIM",
    "DEFAULT_CARTESIAN_BUDGET",
]

MAX_CORNER_DIM = 20
DEFAULT_CARTESIAN_BUDGET = 1_000_000


def make_rng(seed) -> np.random.Generator:
    """Philox counter-based generator keyed by a 64-bit seed."""
    if seed is None:
        raise InvalidParams("an explicit seed is required")
    return np.random.Generator(np.random.Philox(int(seed) % 2**64))


@dataclass(frozen=True)
class BoundingBox:
    lower: np.ndarray
    upper: np.ndarray
    names: Optional[tuple] = None

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lower.shape != upper.shape or lower.ndim != 1 or lower.size < 1:
            raise DimensionMismatch("lower and upper must be 1-d arrays of equal length")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise InvalidParams("box bounds must be finite")
        if not np.all(lower < upper):
            raise InvalidParams(f"box needs min < max in every dimension: {lower} vs {upper}")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        names = self.names
        if names is None:
            names = tuple(f"x{i}" for i in range(lower.size))
        names = tuple(str(n) for n in names)
        if len(names) != lower.size:
            raise DimensionMismatch("one name per dimension is required")
        object.__setattr__(self, "names", names)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]], names=None) -> "BoundingBox":
        pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(pairs[:, 0], pairs[:, 1], names)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.lower) & (points <= self.upper), axis=1)

    def normalize(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.lower) / self.width

    def denormalize(self, unit_points) -> np.ndarray:
        return self.lower + np.asarray(unit_points, dtype=float) * self.width

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
        }


@dataclass
class SampleSet:
    points: np.ndarray
    box: BoundingBox
    method: str
    seed: Optional[int] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, self.box.dim)

    def __len__(self):
        return self.points.shape[0]

    def to_csv(self, path) -> Path:
        """Write the points as CSV plus a ``.json`` sidecar holding seed and method."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.box.names)
            for row in self.points:
                writer.writerow([repr(float(v)) for v in row])
        sidecar = {
            "method": self.method,
            "seed": self.seed,
            "count": len(self),
            "box": self.box.to_dict(),
            **self.metadata,
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(".json").read_text())
        box = BoundingBox(sidecar["box"]["lower"], sidecar["box"]["upper"], sidecar["box"]["names"])
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        points = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
        extra = {k: v for k, v in sidecar.items() if k not in {"method", "seed", "count", "box"}}
        return cls(points.reshape(-1, box.dim), box, sidecar["method"], sidecar["seed"], extra)


def corners(box: BoundingBox) -> SampleSet:
    """The ``2**d`` vertices of ``box``, first dimension varying slowest."""
    if box.dim > MAX_CORNER_DIM:
        raise DimensionTooLarge(f"{box.dim} dimensions would give 2**{box.dim} corners")
    points = np.array(list(itertools.product(*zip(box.lower, box.upper))), dtype=float)
    return SampleSet(points, box, "corners")


def _check_count(n):
    if int(n) != n or n < 1:
        raise InvalidParams(f"sample count must be a positive integer, got {n!r}")
    return int(n)


def lhs(n: int, box: BoundingBox, seed) -> SampleSet:
    """Plain Latin hypercube: one point per bin and dimension, uniform jitter inside the bin."""
    n = _check_count(n)
    rng = make_rng(seed)
    unit = np.empty((n, box.dim))
    for j in range(box.dim):
        unit[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return SampleSet(box.denormalize(unit), box, "lhs", seed)


def uniform(n: int, box: BoundingBox, seed) -> SampleSet:
    n = _check_count(n)
    rng = make_rng(seed)
    return SampleSet(box.denormalize(rng.random((n, box.dim))), box, "uniform", seed)


def cartesian(counts, box: BoundingBox, budget: int = DEFAULT_CARTESIAN_BUDGET) -> SampleSet:
    """Full tensor grid including both endpoints, last dimension varying fastest."""
    counts = [int(c) for c in np.atleast_1d(counts)]
    if len(counts) != box.dim:
        raise DimensionMismatch(f"{len(counts)} counts for a {box.dim}-d box")
    if any(c < 1 for c in counts):
        raise InvalidParams("every count must be positive")
    total = int(np.prod(counts, dtype=object))
    if total > budget:
        raise BudgetExceeded(f"grid of {total} points exceeds budget {budget}")
    axes = [
        np.linspace(lo, hi, c) if c > 1 else np.array([0.5 * (lo + hi)])
        for lo, hi, c in zip(box.lower, box.upper, counts)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    return SampleSet(points, box, "cartesian", metadata={"counts": counts})
