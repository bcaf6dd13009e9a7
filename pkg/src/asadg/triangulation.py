"""Planar Delaunay triangulation, barycenters, interpolation and OBJ export.

The triangulation is built by Bowyer-Watson insertion.  The outside of the
convex hull is represented by *ghost* triangles that share a vertex at
infinity, so no bounding super-triangle is needed and hull edges are exact.

Geometric predicates use a floating-point filter (Shewchuk's static error
bounds) and fall back to exact rational arithmetic when the sign is
uncertain.  Exactly cocircular configurations are resolved by perturbing
the lifted height ``x**2 + y**2`` of each point by an infinitesimal that
decreases with the point's input index, which picks one triangulation
deterministically.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import DegenerateInput, DimensionMismatch, IndexOutOfRange, IoFailure

__all__ = [
    "Triangulation",
    "Simplex",
    "delaunay",
    "barycenter",
    "interpolate_output",
    "export_surface",
    "orient2d",
    "incircle",
    "MERGE_TOLERANCE",
]

logger = logging.getLogger(__name__)

MERGE_TOLERANCE = 1e-12

_EPSILON = 2.0**-53
_ORIENT_BOUND = (3.0 + 16.0 * _EPSILON) * _EPSILON
_INCIRCLE_BOUND = (10.0 + 96.0 * _EPSILON) * _EPSILON

GHOST = -1


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def _orient_exact(a, b, c) -> int:
    ax, ay = Fraction(a[0]), Fraction(a[1])
    bx, by = Fraction(b[0]), Fraction(b[1])
    cx, cy = Fraction(c[0]), Fraction(c[1])
    return _sign((ax - cx) * (by - cy) - (ay - cy) * (bx - cx))


def orient2d(a, b, c) -> int:
    """+1 if ``a, b, c`` turn counterclockwise, -1 if clockwise, 0 if collinear."""
    detleft = (a[0] - c[0]) * (b[1] - c[1])
    detright = (a[1] - c[1]) * (b[0] - c[0])
    det = detleft - detright
    if abs(det) > _ORIENT_BOUND * (abs(detleft) + abs(detright)):
        return 1 if det > 0 else -1
    return _orient_exact(a, b, c)


def _incircle_exact(a, b, c, d):
    dx, dy = Fraction(d[0]), Fraction(d[1])
    rows = []
    for p in (a, b, c):
        px, py = Fraction(p[0]) - dx, Fraction(p[1]) - dy
        rows.append((px, py, px * px + py * py))
    (adx, ady, al), (bdx, bdy, bl), (cdx, cdy, cl) = rows
    return (
        al * (bdx * cdy - cdx * bdy)
        + bl * (cdx * ady - adx * cdy)
        + cl * (adx * bdy - bdx * ady)
    )


def _incircle_float(a, b, c, d):
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    bdxcdy, cdxbdy = bdx * cdy, cdx * bdy
    cdxady, adxcdy = cdx * ady, adx * cdy
    adxbdy, bdxady = adx * bdy, bdx * ady
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady)
    permanent = (
        (abs(bdxcdy) + abs(cdxbdy)) * alift
        + (abs(cdxady) + abs(adxcdy)) * blift
        + (abs(adxbdy) + abs(bdxady)) * clift
    )
    return det, _INCIRCLE_BOUND * permanent


def incircle(a, b, c, d, ids=None) -> int:
    """Sign of the lifted determinant: +1 if ``d`` is inside the circle of ccw ``a, b, c``.

    With ``ids`` (the input indices of the four points) exact ties are broken
    symbolically and the result is never 0 for four distinct points.
    """
    det, bound = _incircle_float(a, b, c, d)
    if abs(det) > bound:
        return 1 if det > 0 else -1
    s = _sign(_incircle_exact(a, b, c, d))
    if s or ids is None:
        return s
    # d(det)/d(lift_r) is the (r, lift) cofactor: (-1)**(r + 2) * orient(other three rows)
    rows = (a, b, c, d)
    for r in sorted(range(4), key=lambda r: ids[r]):
        others = [rows[q] for q in range(4) if q != r]
        minor = _orient_exact(*others)
        if minor:
            return minor if r % 2 == 0 else -minor
    return 0


def _hilbert_key(x: int, y: int, order: int = 16) -> int:
    d = 0
    s = 1 << (order - 1)
    while s:
        rx = 1 if x & s else 0
        ry = 1 if y & s else 0
        d += s * s * ((3 * rx) ^ ry)
        if ry == 0:
            if rx == 1:
                x = s - 1 - x
                y = s - 1 - y
            x, y = y, x
        s >>= 1
    return d


@dataclass(frozen=True)
class Simplex:
    indices: tuple
    barycenter: tuple


@dataclass
class Triangulation:
    """Delaunay triangulation of distinct planar points.

    ``vertices`` holds the merged points, ``source_index[i]`` the position of
    vertex ``i`` in the caller's input, ``triangles`` ccw vertex triples, and
    ``hull`` the convex hull vertices in ccw order.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    source_index: np.ndarray
    hull: list

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def simplices(self) -> list:
        return [
            Simplex(tuple(int(i) for i in t), tuple(c))
            for t, c in zip(self.triangles, self.barycenters().tolist())
        ]

    def triangle_set(self) -> set:
        """Triangles as frozensets of *source* indices, for order-free comparison."""
        return {frozenset(int(self.source_index[i]) for i in t) for t in self.triangles}


def _merge_duplicates(points: np.ndarray):
    extent = float(np.max(points.max(axis=0) - points.min(axis=0)))
    if extent == 0.0:
        raise DegenerateInput("all points coincide")
    tol = MERGE_TOLERANCE * extent
    pairs = cKDTree(points).query_pairs(tol, output_type="ndarray")
    keep = np.ones(points.shape[0], dtype=bool)
    if len(pairs):
        parent = list(range(points.shape[0]))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, j in pairs:
            ri, rj = find(int(i)), find(int(j))
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
        for i in range(points.shape[0]):
            if find(i) != i:
                keep[i] = False
        logger.info("merged %d duplicate point(s)", int((~keep).sum()))
    return np.flatnonzero(keep)


class _BowyerWatson:
    def __init__(self, pts, ids):
        self.pts = pts
        self.ids = ids
        self.tris = {}
        self.edges = {}
        self.next_id = 0
        self.last = None

    def add(self, a, b, c):
        if c != GHOST and GHOST in (a, b):
            # rotate so the ghost vertex is last
            a, b, c = (b, c, a) if a == GHOST else (c, a, b)
        t = self.next_id
        self.next_id += 1
        self.tris[t] = (a, b, c)
        self.edges[(a, b)] = t
        self.edges[(b, c)] = t
        self.edges[(c, a)] = t
        return t

    def remove(self, t):
        a, b, c = self.tris.pop(t)
        del self.edges[(a, b)]
        del self.edges[(b, c)]
        del self.edges[(c, a)]

    def conflicts(self, t, p) -> bool:
        a, b, c = self.tris[t]
        pts = self.pts
        pp = pts[p]
        if c == GHOST:
            o = orient2d(pts[a], pts[b], pp)
            if o:
                return o > 0
            pa, pb = pts[a], pts[b]
            # collinear: conflict only strictly inside the hull edge
            return min(pa[0], pb[0]) <= pp[0] <= max(pa[0], pb[0]) and min(pa[1], pb[1]) <= pp[1] <= max(
                pa[1], pb[1]
            )
        ids = self.ids
        return incircle(pts[a], pts[b], pts[c], pp, (ids[a], ids[b], ids[c], ids[p])) > 0

    def locate(self, p, salt):
        pts = self.pts
        pp = pts[p]
        t = self.last
        a, b, c = self.tris[t]
        if c == GHOST:
            t = self.edges[(b, a)]
        for _ in range(4 * len(self.tris) + 8):
            tri = self.tris[t]
            if tri[2] == GHOST:
                return t
            moved = False
            for k in range(3):
                e = (salt + k) % 3
                u, v = tri[e], tri[(e + 1) % 3]
                if orient2d(pts[u], pts[v], pp) < 0:
                    t = self.edges[(v, u)]
                    moved = True
                    break
            if not moved:
                return t
            salt += 1
        raise RuntimeError("point location did not terminate")  # pragma: no cover

    def insert(self, p, salt=0):
        seed = self.locate(p, salt)
        cavity = {seed}
        stack = [seed]
        boundary = []
        rejected = set()
        while stack:
            t = stack.pop()
            tri = self.tris[t]
            for k in range(3):
                u, v = tri[k], tri[(k + 1) % 3]
                n = self.edges[(v, u)]
                if n in cavity:
                    continue
                if n not in rejected and self.conflicts(n, p):
                    cavity.add(n)
                    stack.append(n)
                else:
                    rejected.add(n)
                    boundary.append((u, v))
        for t in cavity:
            self.remove(t)
        for u, v in boundary:
            self.last = self.add(u, v, p)


def delaunay(points) -> Triangulation:
    """Delaunay triangulation of planar ``points`` (shape ``(n, 2)``).

    Points closer than ``MERGE_TOLERANCE`` times the bounding extent are
    merged (the lowest index survives).  Raises :class:`DegenerateInput` for
    fewer than three distinct points or collinear input.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise DimensionMismatch(f"expected points of shape (n, 2), got {points.shape}")
    if points.shape[0] < 3:
        raise DegenerateInput(f"need at least 3 points, got {points.shape[0]}")
    if not np.all(np.isfinite(points)):
        raise DegenerateInput("points must be finite")
    keep = _merge_duplicates(points)
    if keep.size < 3:
        raise DegenerateInput(f"need at least 3 distinct points, got {keep.size}")
    verts = points[keep]
    pts = [tuple(p) for p in verts.tolist()]
    ids = keep.tolist()
    n = len(pts)

    lo = verts.min(axis=0)
    span = np.maximum(verts.max(axis=0) - lo, np.finfo(float).tiny)
    grid = np.clip(((verts - lo) / span * 65535).astype(np.int64), 0, 65535)
    order = sorted(range(n), key=lambda i: (_hilbert_key(int(grid[i, 0]), int(grid[i, 1])), i))

    a, b = order[0], order[1]
    c_pos = next((k for k in range(2, n) if orient2d(pts[a], pts[b], pts[order[k]]) != 0), None)
    if c_pos is None:
        raise DegenerateInput("all points are collinear")
    c = order[c_pos]
    if orient2d(pts[a], pts[b], pts[c]) < 0:
        a, b = b, a
    bw = _BowyerWatson(pts, ids)
    bw.last = bw.add(a, b, c)
    bw.add(b, a, GHOST)
    bw.add(c, b, GHOST)
    bw.add(a, c, GHOST)
    for k, p in enumerate(order[2:c_pos] + order[c_pos + 1 :]):
        bw.insert(p, salt=k)

    real = []
    hull_next = {}
    for tri in bw.tris.values():
        if tri[2] == GHOST:
            # ghost (u, v) lies outside hull edge v -> u
            hull_next[tri[1]] = tri[0]
            continue
        r = min(range(3), key=lambda q: tri[q])
        real.append(tri[r:] + tri[:r])
    real.sort()
    start = min(hull_next)
    hull = [start]
    while hull_next[hull[-1]] != start:
        hull.append(hull_next[hull[-1]])
    return Triangulation(
        vertices=verts,
        triangles=np.array(real, dtype=np.int64).reshape(-1, 3),
        source_index=keep,
        hull=hull,
    )


def barycenter(simplex, vertices) -> np.ndarray:
    """Componentwise mean of the three vertices of ``simplex``."""
    indices = simplex.indices if isinstance(simplex, Simplex) else simplex
    vertices = np.asarray(vertices, dtype=float)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.shape != (3,) or np.any(idx < 0) or np.any(idx >= vertices.shape[0]):
        raise IndexOutOfRange(f"simplex {tuple(indices)} invalid for {vertices.shape[0]} vertices")
    return vertices[idx].mean(axis=0)


def interpolate_output(simplex, outputs) -> np.ndarray:
    """Equal-weight average of the three vertex outputs (linear interpolant at the barycenter).

    ``outputs`` is either the three vectors themselves or, when ``simplex``
    is given, a per-vertex sequence indexed by the simplex.
    """
    if simplex is not None and len(outputs) != 3:
        indices = simplex.indices if isinstance(simplex, Simplex) else simplex
        outputs = [outputs[i] for i in indices]
    vectors = [np.asarray(v, dtype=float).ravel() for v in outputs]
    if len(vectors) != 3:
        raise DimensionMismatch("exactly three vertex outputs are required")
    if not vectors[0].size == vectors[1].size == vectors[2].size:
        raise DimensionMismatch(f"output lengths differ: {[v.size for v in vectors]}")
    return (vectors[0] + vectors[1] + vectors[2]) / 3.0


def export_surface(triangulation: Triangulation, heights, path) -> Path:
    """Write an OBJ mesh: ``v x y h`` per vertex and 1-based ``f i j k`` per triangle."""
    heights = np.asarray(heights, dtype=float).ravel()
    if heights.size != triangulation.n_vertices:
        raise DimensionMismatch(
            f"{heights.size} heights for {triangulation.n_vertices} vertices"
        )
    lines = [
        f"v {x!r} {y!r} {h!r}"
        for (x, y), h in zip(triangulation.vertices.tolist(), heights.tolist())
    ]
    lines += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in triangulation.triangles.tolist()]
    path = Path(path)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"could not write mesh to {path}: {exc}") from exc
    return path
