"""Reduction of high-dimensional inputs to a 2-d working plane.

:class:`GridEmbedding` is fitted on a preprocessing grid of admissible
inputs.  ``transform`` maps inputs to 2-d, ``inverse_transform`` maps any
2-d point back to the grid input whose embedding is closest, so the
recovered input is always a member of the grid and therefore simulable.
"""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.extmath import randomized_svd, svd_flip
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, as_points
from .exceptions import DimensionMismatch, EmbeddingCollision, FormatError

__all__ = [
    "GridEmbedding",
    "fit_projector",
    "project",
    "pseudo_inverse",
    "nu",
    "reduced_residual",
    "load_embedding_csv",
    "save_embedding_csv",
    "save_grid",
    "grid_spacing",
]

logger = logging.getLogger(__name__)

_TIE_RTOL = 4 * np.finfo(float).eps


def grid_spacing(grid_inputs) -> float:
    """Coarsest per-dimension step: max over dimensions of the largest gap between levels."""
    X = np.asarray(grid_inputs, dtype=float)
    h = 0.0
    for column in X.T:
        levels = np.unique(column)
        if levels.size > 1:
            h = max(h, float(np.max(np.diff(levels))))
    return h


class GridEmbedding(TransformerMixin, BaseEstimator):
    """Projector to 2-d with a grid-backed pseudo-inverse.

    Parameters
    ----------
    kind : {"linear", "imported"}
        ``"linear"`` projects onto the two dominant principal directions of the
        centred grid, found by randomized subspace iteration with a fixed seed.
        ``"imported"`` uses 2-d coordinates computed elsewhere (for example by
        UMAP), passed to :meth:`fit` as ``embedding``.
    n_iter : int
        Power iterations of the subspace solver.
    random_state : int
        Seed of the subspace solver.
    collision_scale : float
        Relative size of the index perturbation that separates grid points
        whose embeddings coincide.
    """

    def __init__(self, kind="linear", n_iter=7, random_state=0, collision_scale=1e-12):
        self.kind = kind
        self.n_iter = n_iter
        self.random_state = random_state
        self.collision_scale = collision_scale

    def fit(self, X, y=None, embedding=None):
        X = as_matrix(X, name="grid_inputs", min_samples=3)
        if np.unique(X, axis=0).shape[0] != X.shape[0]:
            raise EmbeddingCollision("grid inputs contain duplicates; no injective embedding exists")
        self.mean_ = X.mean(axis=0)
        if self.kind == "linear":
            centred = X - self.mean_
            if not np.any(centred):
                raise EmbeddingCollision("grid inputs have zero spread")
            U, S, Vt = randomized_svd(
                centred, 2, n_iter=self.n_iter, random_state=self.random_state
            )
            U, Vt = svd_flip(U, Vt)
            self.components_ = Vt
            self.singular_values_ = S
            embedded = centred @ Vt.T
        elif self.kind == "imported":
            if embedding is None:
                raise FormatError("kind='imported' needs an embedding")
            embedded = np.asarray(embedding, dtype=float)
            if embedded.shape != (X.shape[0], 2) or not np.all(np.isfinite(embedded)):
                raise FormatError(
                    f"embedding must be finite with shape ({X.shape[0]}, 2), got {embedded.shape}"
                )
            embedded = embedded.copy()
        else:
            raise ValueError(f"unknown projector kind {self.kind!r}")
        self.embedded_ = self._separate(embedded)
        self.grid_inputs_ = X
        self.spacing_ = grid_spacing(X)
        self._tree = cKDTree(self.embedded_)
        self._members = {row.tobytes(): i for i, row in enumerate(X)}
        return self

    def _separate(self, embedded):
        """Perturb coinciding embedded points by their grid index until all are distinct."""
        extent = float(np.max(np.ptp(embedded, axis=0)))
        if extent == 0.0:
            raise EmbeddingCollision("every grid point embeds to the same location")
        tol = self.collision_scale * extent
        pairs = cKDTree(embedded).query_pairs(tol, output_type="ndarray")
        self.n_collisions_ = 0
        if len(pairs) == 0:
            return embedded
        # group colliding points; every point after the first in its group is shifted by rank
        clustered = np.unique(pairs.ravel())
        order = np.lexsort((clustered, embedded[clustered, 1], embedded[clustered, 0]))
        clustered = clustered[order]
        step = 2.0 * tol * np.array([1.0, np.sqrt(2.0) - 1.0])
        rank = 0
        prev = None
        shifted = embedded.copy()
        for i in clustered:
            if prev is not None and np.linalg.norm(embedded[i] - embedded[prev]) <= tol:
                rank += 1
                shifted[i] = embedded[i] + rank * step
            else:
                rank = 0
            prev = i
        self.n_collisions_ = int(len(clustered))
        if cKDTree(shifted).query_pairs(tol, output_type="ndarray").size:
            raise EmbeddingCollision("could not separate coinciding embedded grid points")
        logger.warning(
            "%d grid points shared embedded locations and were separated by index perturbation",
            self.n_collisions_,
        )
        return shifted

    @property
    def n_features_(self) -> int:
        return self.grid_inputs_.shape[1]

    def transform(self, X):
        check_is_fitted(self, "embedded_")
        X, single = as_points(X, self.n_features_)
        out = np.empty((X.shape[0], 2))
        for r, row in enumerate(X):
            i = self._members.get(row.tobytes())
            if i is not None:
                out[r] = self.embedded_[i]
            elif self.kind == "linear":
                out[r] = (row - self.mean_) @ self.components_.T
            else:
                out[r] = self.embedded_[self._nearest_input(row)]
        return out[0] if single else out

    def _nearest_input(self, row):
        d2 = np.sum((self.grid_inputs_ - row) ** 2, axis=1)
        return int(np.flatnonzero(d2 == d2.min())[0])

    def pseudo_inverse_index(self, Q) -> np.ndarray:
        """Grid index of the nearest embedded point, lowest index on ties."""
        check_is_fitted(self, "embedded_")
        Q, single = as_points(Q, 2, name="Q")
        k = min(4, self.embedded_.shape[0])
        dist, idx = self._tree.query(Q, k=k)
        dist, idx = np.atleast_2d(dist), np.atleast_2d(idx)
        out = np.empty(Q.shape[0], dtype=np.int64)
        for r, q in enumerate(Q):
            dmin = dist[r, 0]
            if dist[r, -1] > dmin * (1 + _TIE_RTOL) or k == self.embedded_.shape[0]:
                candidates = idx[r]
            else:
                candidates = np.asarray(self._tree.query_ball_point(q, dmin * (1 + _TIE_RTOL) + 1e-300))
            d2 = np.sum((self.embedded_[candidates] - q) ** 2, axis=1)
            ties = candidates[d2 <= d2.min() * (1 + _TIE_RTOL)]
            out[r] = int(ties.min())
        return out[0] if single else out

    def inverse_transform(self, Q):
        idx = self.pseudo_inverse_index(Q)
        return self.grid_inputs_[idx].copy()


def fit_projector(grid_inputs, kind="linear", embedding=None, **kwargs) -> GridEmbedding:
    """Fit a :class:`GridEmbedding`; ``embedding`` may be an array or a CSV path."""
    if isinstance(embedding, (str, Path)):
        embedding = load_embedding_csv(embedding, len(grid_inputs))
    return GridEmbedding(kind=kind, **kwargs).fit(grid_inputs, embedding=embedding)


def project(embedding: GridEmbedding, p) -> np.ndarray:
    return embedding.transform(p)


def pseudo_inverse(embedding: GridEmbedding, q) -> np.ndarray:
    return embedding.inverse_transform(q)


def nu(y) -> float:
    """Height of a manifold point: Euclidean norm of its output vector."""
    return float(np.linalg.norm(np.asarray(y, dtype=float).ravel()))


def reduced_residual(embedding: GridEmbedding, q, y_interp, problem) -> float:
    """Residual at the grid input recovered from ``q``, paired with an interpolated output."""
    return problem.residual(embedding.inverse_transform(q), y_interp)


def load_embedding_csv(path, n_grid=None) -> np.ndarray:
    """Read ``grid_index,u,v`` rows into an ``(n, 2)`` array ordered by grid index."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"grid_index", "u", "v"} <= set(reader.fieldnames):
                raise FormatError(f"{path}: header must contain grid_index,u,v")
            rows = [(int(r["grid_index"]), float(r["u"]), float(r["v"])) for r in reader]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    n = len(rows) if n_grid is None else n_grid
    indices = sorted(r[0] for r in rows)
    if indices != list(range(n)):
        raise FormatError(f"{path}: grid_index must cover 0..{n - 1} exactly once")
    out = np.empty((n, 2))
    for i, u, v in rows:
        out[i] = (u, v)
    return out


def save_embedding_csv(embedded, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["grid_index", "u", "v"])
        for i, (u, v) in enumerate(np.asarray(embedded, dtype=float).tolist()):
            writer.writerow([i, repr(u), repr(v)])
    return path


def save_grid(coefficients, descriptor: dict, path) -> Path:
    """Coefficient vectors as CSV plus a JSON descriptor (degree, ranges, node_count)."""
    path = Path(path)
    coefficients = np.atleast_2d(np.asarray(coefficients, dtype=float))
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(descriptor.get("names", [f"c{i}" for i in range(coefficients.shape[1])]))
        for row in coefficients.tolist():
            writer.writerow([repr(v) for v in row])
    path.with_suffix(".json").write_text(json.dumps(descriptor, indent=2, sort_keys=True) + "\n")
    return path
