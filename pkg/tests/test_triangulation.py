import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_delaunay

from asadg.exceptions import DegenerateInput, DimensionMismatch, IndexOutOfRange, IoFailure
from asadg.triangulation import (
    Simplex,
    barycenter,
    delaunay,
    export_surface,
    incircle,
    interpolate_output,
    orient2d,
)


def hull_size(points):
    from scipy.spatial import ConvexHull

    return len(ConvexHull(points).vertices)


class TestDelaunay:
    def test_unit_square_two_triangles(self):
        tri = delaunay([[0, 0], [1, 0], [0, 1], [1, 1]])
        assert tri.n_triangles == 2
        assert tri.triangles.tolist() == [[0, 1, 2], [1, 3, 2]]

    def test_single_triangle(self):
        assert delaunay([[0, 0], [2, 0], [0, 1]]).n_triangles == 1

    def test_collinear_rejected(self):
        with pytest.raises(DegenerateInput):
            delaunay([[0, 0], [1, 1], [2, 2], [3, 3]])

    def test_too_few_distinct(self):
        with pytest.raises(DegenerateInput):
            delaunay([[0, 0], [1, 1], [1, 1 + 1e-15]])

    def test_duplicates_merged(self):
        tri = delaunay([[0, 0], [1, 0], [0, 1], [1, 0]])
        assert tri.n_vertices == 3 and tri.source_index.tolist() == [0, 1, 2]

    def test_wrong_shape(self):
        with pytest.raises(DimensionMismatch):
            delaunay(np.zeros((5, 3)))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force(self, seed):
        pts = np.random.default_rng(seed).random((30, 2))
        assert delaunay(pts).triangle_set() == brute_force_delaunay(pts)

    def test_oracle_agrees_with_qhull(self):
        from scipy.spatial import Delaunay

        for seed in range(100, 110):
            pts = np.random.default_rng(seed).random((25, 2))
            assert brute_force_delaunay(pts) == {frozenset(t.tolist()) for t in Delaunay(pts).simplices}

    def test_cocircular_lattice_is_deterministic_and_complete(self):
        g = np.arange(6.0)
        pts = np.array([(x, y) for x in g for y in g])
        a, b = delaunay(pts), delaunay(pts)
        np.testing.assert_array_equal(a.triangles, b.triangles)
        assert a.n_triangles == 2 * 36 - 2 - 20
        assert np.isclose(sum(_area(a.vertices[t]) for t in a.triangles), 25.0)

    @given(st.integers(0, 2**32 - 1), st.integers(3, 60))
    def test_euler_count_ccw_and_hull_cover(self, seed, n):
        pts = np.random.default_rng(seed).random((n, 2))
        tri = delaunay(pts)
        assert tri.n_triangles == 2 * n - 2 - hull_size(pts)
        for t in tri.triangles:
            assert orient2d(*tri.vertices[t]) > 0
        from scipy.spatial import ConvexHull

        assert np.isclose(sum(_area(tri.vertices[t]) for t in tri.triangles), ConvexHull(pts).volume)

    def test_incircle_sign(self):
        assert incircle((0, 0), (1, 0), (0, 1), (0.4, 0.4)) > 0
        assert incircle((0, 0), (1, 0), (0, 1), (2, 2)) < 0


def _area(tri):
    (ax, ay), (bx, by), (cx, cy) = tri
    return 0.5 * ((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))


class TestBarycenterAndInterpolation:
    def test_right_triangle(self):
        np.testing.assert_allclose(barycenter((0, 1, 2), [[0, 0], [1, 0], [0, 1]]), [1 / 3, 1 / 3])

    def test_equilateral_centered(self):
        ang = np.array([0, 2, 4]) * np.pi / 3
        v = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        np.testing.assert_allclose(barycenter((0, 1, 2), v), [0, 0], atol=1e-15)

    def test_integer_mean(self):
        assert barycenter(Simplex((0, 1, 2), ()), [[2, 2], [4, 2], [3, 5]]).tolist() == [3, 3]

    def test_bad_index(self):
        with pytest.raises(IndexOutOfRange):
            barycenter((0, 1, 5), np.zeros((3, 2)))

    def test_identical_vectors(self):
        v = np.arange(5.0)
        np.testing.assert_array_equal(interpolate_output(None, [v, v, v]), v)

    def test_cancelling(self):
        v = np.arange(4.0)
        np.testing.assert_array_equal(interpolate_output(None, [v, -v, 0 * v]), 0)

    def test_basis_vectors(self):
        e = np.eye(5)[:3]
        np.testing.assert_allclose(interpolate_output(None, list(e)), [1 / 3] * 3 + [0, 0])

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            interpolate_output(None, [np.ones(3), np.ones(3), np.ones(4)])

    @given(st.integers(0, 2**32 - 1))
    def test_exact_for_affine_outputs(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.random((12, 2))
        A, c = rng.normal(size=(2, 6)), rng.normal(size=6)
        outputs = pts @ A + c
        tri = delaunay(pts)
        for s in tri.simplices():
            got = interpolate_output(s, outputs[tri.source_index])
            np.testing.assert_allclose(got, np.asarray(s.barycenter) @ A + c, atol=1e-12)


class TestExport:
    def test_single_triangle(self, tmp_path):
        tri = delaunay([[0, 0], [1, 0], [0, 1]])
        lines = export_surface(tri, [1, 2, 3], tmp_path / "m.obj").read_text().splitlines()
        assert sum(l.startswith("v ") for l in lines) == 3
        assert sum(l.startswith("f ") for l in lines) == 1

    def test_square_and_determinism(self, tmp_path):
        tri = delaunay([[0, 0], [1, 0], [0, 1], [1, 1]])
        a = export_surface(tri, [0, 1, 2, 3], tmp_path / "a.obj").read_bytes()
        b = export_surface(tri, [0, 1, 2, 3], tmp_path / "b.obj").read_bytes()
        assert a == b
        assert a.decode().count("\nf ") == 2 and a.decode().count("v ") == 4
        assert "f 1 2 3" in a.decode()

    def test_unwritable_path(self, tmp_path):
        tri = delaunay([[0, 0], [1, 0], [0, 1]])
        with pytest.raises(IoFailure):
            export_surface(tri, [0, 0, 0], tmp_path / "missing" / "m.obj")
