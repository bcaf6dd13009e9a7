"""One-dimensional harmonic transport equation.

Solves ``m(x) y'(x) - i k y(x) - g(x) = 0`` on ``x in [0, 1]`` with
``y(0) = 0`` and evaluates the discrete residual of a candidate solution.

Solutions are exchanged as real vectors of length ``2 * node_count`` laid out
as ``(Re y at every node, Im y at every node)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

from .exceptions import DimensionMismatch, InvalidParams, NonFiniteResult

__all__ = [
    "SpatialGrid",
    "Case1Source",
    "ChebyshevField",
    "TransportParams",
    "eval_case1_source",
    "expand_chebyshev",
    "pack_case2_input",
    "unpack_case2_input",
    "to_complex",
    "to_real",
    "solve",
    "residual",
    "step_coefficients",
]


@dataclass(frozen=True)
class SpatialGrid:
    """Equally spaced nodes on ``[0, 1]`` including both endpoints."""

    node_count: int

    def __post_init__(self):
        if int(self.node_count) != self.node_count or self.node_count < 2:
            raise InvalidParams(f"node_count must be an integer >= 2, got {self.node_count!r}")

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.linspace(0.0, 1.0, self.node_count)
        nodes.flags.writeable = False
        return nodes

    @cached_property
    def half_nodes(self) -> np.ndarray:
        """Nodes and step midpoints interleaved (``2 * node_count - 1`` points)."""
        half = np.linspace(0.0, 1.0, 2 * self.node_count - 1)
        half.flags.writeable = False
        return half

    @property
    def spacing(self) -> float:
        return 1.0 / (self.node_count - 1)

    @property
    def output_dim(self) -> int:
        return 2 * self.node_count


@dataclass(frozen=True)
class Case1Source:
    """``g(x) = a exp(i alpha x) + exp(i alpha x - (x - x_m)^2 / (2 sigma^2))``."""

    a: float
    alpha: float
    sigma: float
    x_m: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParams(f"sigma must be positive, got {self.sigma!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        gauss = np.exp(-((x - self.x_m) ** 2) / (2.0 * self.sigma**2))
        return np.exp(1j * self.alpha * x) * (self.a + gauss)


def eval_case1_source(src: Case1Source, x: float) -> complex:
    return complex(src(x))


@dataclass(frozen=True)
class ChebyshevField:
    coefficients: tuple

    def __post_init__(self):
        coefficients = tuple(float(c) for c in np.atleast_1d(self.coefficients))
        if not coefficients:
            raise InvalidParams("a Chebyshev field needs at least one coefficient")
        object.__setattr__(self, "coefficients", coefficients)


def expand_chebyshev(field, grid: SpatialGrid) -> np.ndarray:
    """Evaluate ``sum_n c_n T_n(2x - 1)`` at every node of ``grid``."""
    coefficients = field.coefficients if isinstance(field, ChebyshevField) else field
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.size == 0:
        raise InvalidParams("a Chebyshev field needs at least one coefficient")
    return np.polynomial.chebyshev.chebval(2.0 * grid.nodes - 1.0, coefficients)


def pack_case2_input(mach_nodes, re_g_nodes, im_g_nodes) -> np.ndarray:
    parts = [np.asarray(v, dtype=float).ravel() for v in (mach_nodes, re_g_nodes, im_g_nodes)]
    if not parts[0].size == parts[1].size == parts[2].size:
        raise DimensionMismatch(
            f"field lengths differ: {[p.size for p in parts]}"
        )
    return np.concatenate(parts)


def unpack_case2_input(packed) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    packed = np.asarray(packed, dtype=float).ravel()
    if packed.size % 3:
        raise DimensionMismatch(f"packed length {packed.size} is not a multiple of 3")
    n = packed.size // 3
    return packed[:n].copy(), packed[n : 2 * n].copy(), packed[2 * n :].copy()


def to_complex(y_real) -> np.ndarray:
    y_real = np.asarray(y_real, dtype=float).ravel()
    if y_real.size % 2:
        raise DimensionMismatch(f"solution vector length {y_real.size} is odd")
    n = y_real.size // 2
    return y_real[:n] + 1j * y_real[n:]


def to_real(y) -> np.ndarray:
    y = np.asarray(y, dtype=complex).ravel()
    return np.concatenate([y.real, y.imag])


Source = Union[Case1Source, np.ndarray, Callable]


@dataclass(frozen=True)
class TransportParams:
    """Coefficients of one transport problem instance.

    ``mach`` is a scalar or a nodal vector; ``source`` is a
    :class:`Case1Source`, any vectorised callable of ``x``, or a complex nodal
    vector.  Nodal data are interpolated to step midpoints with a cubic rule.
    """

    wave_number: float
    mach: Union[float, np.ndarray]
    source: Source

    def __post_init__(self):
        mach = self.mach
        if np.ndim(mach) == 0:
            mach = float(mach)
        else:
            mach = np.asarray(mach, dtype=float).ravel()
        if not np.all(np.isfinite(mach)) or np.any(np.asarray(mach) == 0.0):
            raise InvalidParams("mach values must be finite and nonzero")
        object.__setattr__(self, "mach", mach)
        if not (callable(self.source)):
            object.__setattr__(self, "source", np.asarray(self.source, dtype=complex).ravel())
        if not np.isfinite(self.wave_number):
            raise InvalidParams("wave_number must be finite")

    def _check_grid(self, grid: SpatialGrid):
        if np.ndim(self.mach) and self.mach.size != grid.node_count:
            raise DimensionMismatch(
                f"mach has {self.mach.size} nodes, grid has {grid.node_count}"
            )
        if not callable(self.source) and self.source.size != grid.node_count:
            raise DimensionMismatch(
                f"source has {self.source.size} nodes, grid has {grid.node_count}"
            )


def _midpoints(values: np.ndarray) -> np.ndarray:
    """Cubic Lagrange interpolation of nodal values to interval midpoints."""
    f = values
    n = f.size
    if n == 2:
        return 0.5 * (f[:-1] + f[1:])
    if n == 3:
        return np.array(
            [(3 * f[0] + 6 * f[1] - f[2]) / 8, (-f[0] + 6 * f[1] + 3 * f[2]) / 8]
        )
    mid = np.empty(n - 1, dtype=f.dtype)
    mid[1:-1] = (-f[:-3] + 9 * f[1:-2] + 9 * f[2:-1] - f[3:]) / 16
    mid[0] = (5 * f[0] + 15 * f[1] - 5 * f[2] + f[3]) / 16
    mid[-1] = (f[-4] - 5 * f[-3] + 15 * f[-2] + 5 * f[-1]) / 16
    return mid


def _stage_values(values, grid: SpatialGrid, dtype):
    """Return (left, midpoint, right, nodal) values for the step intervals.

    Scalars stay scalars so the RK4 algebra broadcasts cheaply.
    """
    if callable(values):
        half = np.asarray(values(grid.half_nodes), dtype=dtype)
        if half.ndim == 0:
            half = np.full(grid.half_nodes.size, half, dtype=dtype)
        nodal = half[::2]
        return nodal[:-1], half[1::2], nodal[1:], nodal
    if np.ndim(values) == 0:
        value = dtype(values)
        return value, value, value, np.full(grid.node_count, value, dtype=dtype)
    nodal = np.asarray(values, dtype=dtype)
    return nodal[:-1], _midpoints(nodal), nodal[1:], nodal


def step_coefficients(params: TransportParams, grid: SpatialGrid):
    """Per-step affine map of classical RK4: ``y[j+1] = A[j] * y[j] + B[j]``.

    Also returns the midpoint mach values and the nodal source, which the
    residual uses for scaling.
    """
    params._check_grid(grid)
    h = grid.spacing
    m0, mh, m1, _ = _stage_values(params.mach, grid, float)
    g0, gh, g1, g_nodal = _stage_values(params.source, grid, complex)
    ik = 1j * params.wave_number
    a0, ah, a1 = ik / m0, ik / mh, ik / m1
    b0, bh, b1 = g0 / m0, gh / mh, g1 / m1

    alpha1, beta1 = a0, b0
    alpha2 = ah * (1 + 0.5 * h * alpha1)
    beta2 = ah * 0.5 * h * beta1 + bh
    alpha3 = ah * (1 + 0.5 * h * alpha2)
    beta3 = ah * 0.5 * h * beta2 + bh
    alpha4 = a1 * (1 + h * alpha3)
    beta4 = a1 * h * beta3 + b1
    A = 1 + h / 6 * (alpha1 + 2 * alpha2 + 2 * alpha3 + alpha4)
    B = h / 6 * (beta1 + 2 * beta2 + 2 * beta3 + beta4)
    steps = grid.node_count - 1
    if np.ndim(A) == 0:
        A = np.full(steps, A)
    if np.ndim(B) == 0:
        B = np.full(steps, B)
    return A, B, mh, g_nodal


def solve(params: TransportParams, grid: SpatialGrid) -> np.ndarray:
    """March ``y' = (i k y + g) / m`` from ``y(0) = 0`` with classical RK4.

    Returns the real solution vector ``(Re y, Im y)``.
    """
    A, B, _, _ = step_coefficients(params, grid)
    y = [0j] * grid.node_count
    current = 0j
    for j, (a, b) in enumerate(zip(A.tolist(), B.tolist()), start=1):
        current = a * current + b
        y[j] = current
    out = np.array(y, dtype=complex)
    if not np.all(np.isfinite(out)):
        raise NonFiniteResult(
            "solution is not finite; mach may be too close to zero or the source pathological"
        )
    return to_real(out)


def residual(params: TransportParams, y, grid: SpatialGrid, scheme: str = "rk4") -> float:
    """Discrete residual of a candidate solution ``y`` (real layout).

    ``scheme="rk4"`` measures the defect of each RK4 step,
    ``m(x_{j+1/2}) * (y[j+1] - A[j] y[j] - B[j]) / h``, which is a
    fourth-order consistent discretisation of ``m y' - i k y - g`` and
    vanishes to round-off on the output of :func:`solve`.

    ``scheme="central"`` applies second-order central differences (one-sided
    second order at the ends) and evaluates ``m Dy - i k y - g`` at every node
    except ``x = 0``.  Its value on exact solutions decays like ``h**2``.

    Both return the root mean square of the pointwise defect plus ``|y(0)|``.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != grid.output_dim:
        raise DimensionMismatch(
            f"solution has length {y.size}, grid needs {grid.output_dim}"
        )
    yc = to_complex(y)
    if scheme == "rk4":
        A, B, mh, _ = step_coefficients(params, grid)
        defect = mh * (yc[1:] - A * yc[:-1] - B) / grid.spacing
    elif scheme == "central":
        params._check_grid(grid)
        _, _, _, m = _stage_values(params.mach, grid, float)
        _, _, _, g = _stage_values(params.source, grid, complex)
        dy = np.gradient(yc, grid.spacing, edge_order=2)
        defect = (m * dy - 1j * params.wave_number * yc - g)[1:]
    else:
        raise ValueError(f"unknown residual scheme {scheme!r}")
    return float(np.sqrt(np.vdot(defect, defect).real / defect.size) + abs(yc[0]))
