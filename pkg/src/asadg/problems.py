"""Parameterised transport problems: map an input vector ``s`` to a solve.

A problem owns the grid, the fixed constants and the input bounding box, and
exposes ``solve(s)`` / ``residual(s, y)`` so samplers never touch
:class:`~asadg.transport.TransportParams` directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import DimensionMismatch, InvalidParams
from .samplers import BoundingBox, SampleSet, cartesian, make_rng
from .transport import (
    Case1Source,
    SpatialGrid,
    TransportParams,
    residual,
    solve,
    unpack_case2_input,
)

__all__ = ["TransportProblem", "Case1Problem", "AmplitudeProblem", "Case2Problem"]

DEFAULT_MACH_FLOOR = 0.1
DEFAULT_SOLVER_TOLERANCE = 1e-8


@dataclass
class TransportProblem:
    """Common base; subclasses implement :meth:`params` and :meth:`box`."""

    node_count: int = 129
    wave_number: float = 20.0
    solver_tolerance: float = DEFAULT_SOLVER_TOLERANCE
    mach_floor: float = DEFAULT_MACH_FLOOR

    def __post_init__(self):
        self.grid = SpatialGrid(self.node_count)
        if not self.solver_tolerance > 0:
            raise InvalidParams("solver_tolerance must be positive")

    @cached_property
    def input_box(self) -> BoundingBox:
        return self.box()

    @property
    def input_dim(self) -> int:
        return self.input_box.dim

    @property
    def output_dim(self) -> int:
        return self.grid.output_dim

    def _check_input(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float).ravel()
        if s.size != self.input_dim:
            raise DimensionMismatch(f"expected {self.input_dim} inputs, got {s.size}")
        return s

    def _check_mach(self, mach):
        if np.min(np.abs(mach)) < self.mach_floor:
            raise InvalidParams(
                f"|mach| must stay >= {self.mach_floor}, got min {np.min(np.abs(mach)):.4g}"
            )

    def params(self, s) -> TransportParams:
        raise NotImplementedError

    def box(self) -> BoundingBox:
        raise NotImplementedError

    def solve(self, s) -> np.ndarray:
        return solve(self.params(s), self.grid)

    def residual(self, s, y) -> float:
        return residual(self.params(s), y, self.grid)


@dataclass
class Case1Problem(TransportProblem):
    """Scalar mach and Gaussian-modulated source; inputs ``(mach, x_m)``."""

    a: float = 1.0
    alpha: float = 30.0
    sigma: float = 0.05
    mach_range: tuple = (0.3, 1.0)
    x_m_range: tuple = (0.2, 0.8)

    def box(self) -> BoundingBox:
        return BoundingBox.from_pairs([self.mach_range, self.x_m_range], ("mach", "x_m"))

    def params(self, s) -> TransportParams:
        mach, x_m = self._check_input(s)
        self._check_mach(mach)
        return TransportParams(
            self.wave_number, mach, Case1Source(self.a, self.alpha, self.sigma, x_m)
        )


@dataclass
class AmplitudeProblem(TransportProblem):
    """Fixed mach; inputs are the amplitudes of the two case-1 source terms.

    ``g(x) = s0 exp(i alpha x) + s1 exp(i alpha x - (x - x_m)^2 / (2 sigma^2))``.
    The solution is linear in ``s``, so barycentric interpolation is exact.
    """

    mach: float = 0.5
    alpha: float = 30.0
    sigma: float = 0.05
    x_m: float = 0.5
    amplitude_range: tuple = (0.0, 1.0)

    def box(self) -> BoundingBox:
        return BoundingBox.from_pairs([self.amplitude_range] * 2, ("a_wave", "a_pulse"))

    def params(self, s) -> TransportParams:
        a_wave, a_pulse = self._check_input(s)
        self._check_mach(self.mach)
        alpha, sigma, x_m = self.alpha, self.sigma, self.x_m

        def source(x):
            return np.exp(1j * alpha * x) * (a_wave + a_pulse * np.exp(-((x - x_m) ** 2) / (2 * sigma**2)))

        return TransportParams(self.wave_number, self.mach, source)


@dataclass
class Case2Problem(TransportProblem):
    """Field-valued mach and source given as nodal vectors of length ``3 * node_count``.

    Inputs are generated in Chebyshev-coefficient space (``degree + 1``
    coefficients for each of mach, Re g, Im g) and expanded to nodes.
    """

    degree: int = 5
    mach_c0_range: tuple = (0.5, 1.0)
    mach_higher_range: tuple = (-0.1, 0.1)
    source_range: tuple = (-1.0, 1.0)
    grid_degree: int = 1
    grid_points_per_dim: int = 4
    _expansion: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        super().__post_init__()
        if self.degree < 0 or not 0 <= self.grid_degree <= self.degree:
            raise InvalidParams("need 0 <= grid_degree <= degree")
        t = 2.0 * self.grid.nodes - 1.0
        # columns are T_0..T_degree evaluated at the nodes
        self._expansion = np.polynomial.chebyshev.chebvander(t, self.degree)

    @property
    def n_coefficients(self) -> int:
        return 3 * (self.degree + 1)

    def box(self) -> BoundingBox:
        """Nodal-space box implied by the coefficient ranges (``|T_n| <= 1``)."""
        n = self.node_count
        cbox = self.coefficient_box()
        d = self.degree + 1
        lower, upper, names = [], [], []
        for f, fname in enumerate(("mach", "re_g", "im_g")):
            lo, hi = cbox.lower[f * d : (f + 1) * d], cbox.upper[f * d : (f + 1) * d]
            spread = np.sum(np.maximum(np.abs(lo[1:]), np.abs(hi[1:])))
            lower += [lo[0] - spread] * n
            upper += [hi[0] + spread] * n
            names += [f"{fname}_{i}" for i in range(n)]
        return BoundingBox(lower, upper, tuple(names))

    def coefficient_box(self) -> BoundingBox:
        pairs, names = [], []
        for fname in ("mach", "re_g", "im_g"):
            for i in range(self.degree + 1):
                if fname == "mach":
                    pairs.append(self.mach_c0_range if i == 0 else self.mach_higher_range)
                else:
                    pairs.append(self.source_range)
                names.append(f"{fname}_c{i}")
        return BoundingBox.from_pairs(pairs, tuple(names))

    def grid_mask(self) -> np.ndarray:
        """Coefficients varied by the preprocessing grid (degree <= grid_degree)."""
        per_field = np.arange(self.degree + 1) <= self.grid_degree
        return np.tile(per_field, 3)

    def expand(self, coefficients) -> np.ndarray:
        """Coefficient vectors (k, 3*(degree+1)) -> nodal inputs (k, 3*node_count)."""
        c = np.atleast_2d(np.asarray(coefficients, dtype=float))
        if c.shape[1] != self.n_coefficients:
            raise DimensionMismatch(f"expected {self.n_coefficients} coefficients, got {c.shape[1]}")
        d = self.degree + 1
        V = self._expansion
        out = np.concatenate([c[:, :d] @ V.T, c[:, d : 2 * d] @ V.T, c[:, 2 * d :] @ V.T], axis=1)
        return out if np.ndim(coefficients) > 1 else out[0]

    def params(self, s) -> TransportParams:
        s = self._check_input(s)
        mach, re_g, im_g = unpack_case2_input(s)
        self._check_mach(mach)
        return TransportParams(self.wave_number, mach, re_g + 1j * im_g)

    def preprocessing_grid(self, points_per_dim=None) -> tuple[np.ndarray, np.ndarray]:
        """Cartesian grid over the gridded coefficients; others sit at their range midpoint.

        Returns ``(coefficients, nodal_inputs)``.
        """
        ppd = self.grid_points_per_dim if points_per_dim is None else points_per_dim
        cbox = self.coefficient_box()
        mask = self.grid_mask()
        sub = BoundingBox(cbox.lower[mask], cbox.upper[mask], tuple(np.array(cbox.names)[mask]))
        grid = cartesian([ppd] * int(mask.sum()), sub).points
        coeffs = np.tile(0.5 * (cbox.lower + cbox.upper), (grid.shape[0], 1))
        coeffs[:, mask] = grid
        return coeffs, self.expand(coeffs)

    def uniform_inputs(self, n: int, seed) -> SampleSet:
        """``n`` uniform draws in coefficient space, expanded to nodal inputs.

        Draws whose mach field dips below ``mach_floor`` are redrawn.
        """
        cbox = self.coefficient_box()
        rng = make_rng(seed)
        kept = []
        while len(kept) < n:
            c = cbox.denormalize(rng.random(cbox.dim))
            nodal = self.expand(c)
            if np.min(np.abs(nodal[: self.node_count])) >= self.mach_floor:
                kept.append(c)
        coeffs = np.array(kept)
        nodal = self.expand(coeffs)
        sample = SampleSet(nodal, self.input_box, "uniform", seed)
        sample.metadata["coefficients"] = coeffs.tolist()
        return sample

