"""Independent reference implementations shared by several test modules."""
import itertools
from fractions import Fraction

import numpy as np


def incircle_exact(a, b, c, d):
    rows = [(Fraction(p[0]) - Fraction(d[0]), Fraction(p[1]) - Fraction(d[1])) for p in (a, b, c)]
    m = [(x, y, x * x + y * y) for x, y in rows]
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def brute_force_delaunay(points):
    """All triples whose circumcircle has no other point strictly inside (O(n^4)).

    A float determinant screens every (triple, point) pair at once; pairs
    within 1e-9 of zero are re-decided in exact rational arithmetic.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    tri = np.array(list(itertools.combinations(range(n), 3)))
    a, b, c = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
    area = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = area < 0
    b[flip], c[flip] = c[flip].copy(), b[flip].copy()
    d = pts[None, :, :]
    ax, ay = a[:, None, 0] - d[..., 0], a[:, None, 1] - d[..., 1]
    bx, by = b[:, None, 0] - d[..., 0], b[:, None, 1] - d[..., 1]
    cx, cy = c[:, None, 0] - d[..., 0], c[:, None, 1] - d[..., 1]
    det = (
        (ax * ax + ay * ay) * (bx * cy - cx * by)
        - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay)
    )
    own = np.zeros_like(det, dtype=bool)
    own[np.arange(len(tri))[:, None], tri] = True
    close = (np.abs(det) < 1e-9) & ~own
    inside = (det > 0) & ~close & ~own
    found = set()
    for t in np.flatnonzero((area != 0) & ~inside.any(axis=1)):
        if any(incircle_exact(a[t], b[t], c[t], pts[o]) > 0 for o in np.flatnonzero(close[t])):
            continue
        found.add(frozenset(tri[t].tolist()))
    return found
