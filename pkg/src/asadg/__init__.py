"""Residual-driven adaptive sampling of parametric transport solutions, with surrogate benchmarks."""
from .core import AdaptiveSampler, RelaxationSchedule, RunReport, StoppingCriteria, relaxation_threshold
from .problems import AmplitudeProblem, Case1Problem, Case2Problem
from .reduced import GridEmbedding, fit_projector
from .samplers import BoundingBox, SampleSet, cartesian, corners, lhs, uniform
from .surrogate import MLPSurrogate, MlpConfig, mnre
from .transport import SpatialGrid, TransportParams, residual, solve
from .triangulation import Triangulation, delaunay

__version__ = "0.1.0"

__all__ = [
    "AdaptiveSampler",
    "AmplitudeProblem",
    "BoundingBox",
    "Case1Problem",
    "Case2Problem",
    "GridEmbedding",
    "MLPSurrogate",
    "MlpConfig",
    "RelaxationSchedule",
    "RunReport",
    "SampleSet",
    "SpatialGrid",
    "StoppingCriteria",
    "TransportParams",
    "Triangulation",
    "cartesian",
    "corners",
    "delaunay",
    "fit_projector",
    "lhs",
    "mnre",
    "relaxation_threshold",
    "residual",
    "solve",
    "uniform",
]
