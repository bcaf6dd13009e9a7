import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asadg.exceptions import BudgetExceeded, DimensionTooLarge, InvalidParams
from asadg.samplers import BoundingBox, SampleSet, cartesian, corners, lhs, make_rng, uniform


def unit_box(d):
    return BoundingBox(np.zeros(d), np.ones(d))


def bin_counts(points, box, n):
    """Per-dimension occupancy of n equal bins."""
    unit = box.normalize(points)
    bins = np.minimum((unit * n).astype(int), n - 1)
    return [np.bincount(bins[:, j], minlength=n) for j in range(box.dim)]


boxes = st.integers(1, 6).flatmap(
    lambda d: st.tuples(
        st.lists(st.floats(-100, 100), min_size=d, max_size=d),
        st.lists(st.floats(0.01, 50), min_size=d, max_size=d),
    ).map(lambda lw: BoundingBox(lw[0], np.add(lw[0], lw[1])))
)


class TestBoundingBox:
    def test_degenerate_dimension_rejected(self):
        with pytest.raises(InvalidParams):
            BoundingBox([0.0, 1.0], [1.0, 1.0])

    def test_default_names(self):
        assert BoundingBox([0, 0], [1, 1]).names == ("x0", "x1")

    def test_normalize_round_trip(self):
        box = BoundingBox([1, -2], [3, 2])
        p = np.array([[2.0, 0.0], [1.0, 2.0]])
        np.testing.assert_allclose(box.denormalize(box.normalize(p)), p)

    def test_bounds_are_read_only(self):
        box = unit_box(2)
        with pytest.raises(ValueError):
            box.lower[0] = 5


class TestCorners:
    def test_two_dimensional(self):
        pts = corners(BoundingBox([0, 2], [1, 3])).points
        assert {tuple(p) for p in pts} == {(0, 2), (0, 3), (1, 2), (1, 3)}

    def test_one_dimensional(self):
        assert corners(BoundingBox([5], [6])).points.ravel().tolist() == [5, 6]

    def test_cube_has_eight_distinct(self):
        pts = corners(unit_box(3)).points
        assert len({tuple(p) for p in pts}) == 8

    def test_too_many_dimensions(self):
        with pytest.raises(DimensionTooLarge):
            corners(unit_box(21))

    @given(boxes)
    def test_size_and_containment(self, box):
        pts = corners(box).points
        assert len(pts) == 2**box.dim == len({tuple(p) for p in pts})
        assert box.contains(pts).all()


class TestLhs:
    def test_single_point(self):
        box = BoundingBox([0, 10], [1, 20])
        assert box.contains(lhs(1, box, seed=0).points).all()

    def test_four_points_two_dims(self):
        box = unit_box(2)
        for counts in bin_counts(lhs(4, box, seed=1).points, box, 4):
            assert counts.tolist() == [1, 1, 1, 1]

    def test_two_seeds_differ_and_both_stratified(self):
        box = unit_box(2)
        a, b = lhs(500, box, seed=1).points, lhs(500, box, seed=2).points
        assert not np.array_equal(a, b)
        for pts in (a, b):
            assert all((c == 1).all() for c in bin_counts(pts, box, 500))

    @given(st.integers(1, 120), boxes, st.integers(0, 2**64 - 1))
    def test_stratified_and_inside(self, n, box, seed):
        pts = lhs(n, box, seed).points
        assert pts.shape == (n, box.dim)
        assert box.contains(pts).all()
        assert all((c == 1).all() for c in bin_counts(pts, box, n))

    def test_deterministic(self):
        box = unit_box(3)
        np.testing.assert_array_equal(lhs(17, box, 5).points, lhs(17, box, 5).points)

    def test_nonpositive_count_rejected(self):
        with pytest.raises(InvalidParams):
            lhs(0, unit_box(2), seed=0)


class TestUniform:
    def test_zero_rejected(self):
        with pytest.raises(InvalidParams):
            uniform(0, unit_box(1), seed=0)

    def test_mean_within_three_standard_errors(self):
        # 3 * sqrt(1/12) / sqrt(10000) ~ 0.0087 < 0.02
        assert abs(uniform(10_000, unit_box(1), seed=4).points.mean() - 0.5) < 0.02

    def test_same_seed_same_points(self):
        box = unit_box(2)
        np.testing.assert_array_equal(uniform(50, box, 9).points, uniform(50, box, 9).points)

    @given(st.integers(1, 200), boxes, st.integers(0, 2**64 - 1))
    def test_inside(self, n, box, seed):
        assert box.contains(uniform(n, box, seed).points).all()

    def test_seed_is_required(self):
        with pytest.raises(InvalidParams):
            make_rng(None)


class TestCartesian:
    def test_corners_of_square(self):
        pts = cartesian([2, 2], unit_box(2)).points
        np.testing.assert_array_equal(pts, [[0, 0], [0, 1], [1, 0], [1, 1]])

    def test_three_levels(self):
        assert cartesian([3], unit_box(1)).points.ravel().tolist() == [0, 0.5, 1]

    def test_nine_points_spacing(self):
        pts = cartesian([3, 3], unit_box(2)).points
        assert len(pts) == 9
        assert sorted(set(np.diff(np.unique(pts[:, 0])))) == [0.5]

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            cartesian([100, 100, 100], unit_box(3), budget=999_999)


class TestSampleSetCsv:
    def test_round_trip(self, tmp_path):
        box = BoundingBox([0, -1], [1, 1], ("mach", "x_m"))
        s = lhs(7, box, seed=3)
        path = s.to_csv(tmp_path / "s.csv")
        back = SampleSet.from_csv(path)
        np.testing.assert_array_equal(back.points, s.points)
        assert back.seed == 3 and back.method == "lhs"
        assert path.read_text().splitlines()[0] == "mach,x_m"
        assert json.loads((tmp_path / "s.json").read_text())["count"] == 7
