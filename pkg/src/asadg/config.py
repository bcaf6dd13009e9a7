"""Experiment configuration: one JSON document validated against :data:`CONFIG_SCHEMA`.

Every constant that the runs depend on lives here with its default, so a
config file plus a master seed pins down an experiment completely.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import jsonschema

from .exceptions import ConfigError

__all__ = [
    "SolverSettings",
    "Case1Settings",
    "Case2Settings",
    "SamplerSettings",
    "AsadgSettings",
    "SurrogateSettings",
    "BenchmarkSettings",
    "ExperimentConfig",
    "CONFIG_SCHEMA",
    "SEED_OFFSETS",
    "component_seed",
    "load_config",
]

# per-component seeds are master + offset, so each stream can be reproduced on its own
SEED_OFFSETS = {"sampler": 1, "test_set": 2, "grid": 3, "surrogate": 4, "projector": 5}


def component_seed(master: int, component: str) -> int:
    return (int(master) + SEED_OFFSETS[component]) % 2**64


_range = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_pos_int = {"type": "integer", "minimum": 1}
_opt_pos_int = {"type": ["integer", "null"], "minimum": 1}
_opt_nonneg = {"type": ["number", "null"], "minimum": 0}
_pos = {"type": "number", "exclusiveMinimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_surrogate_schema = _obj({
    "hidden_sizes": {"type": "array", "items": _pos_int, "minItems": 1},
    "learning_rate": {"type": "number", "minimum": 0},
    "epochs": {"type": "integer", "minimum": 0},
    "batch_size": _pos_int,
})

CONFIG_SCHEMA = _obj({
    "mode": {"enum": ["low", "high"]},
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "output_dir": {"type": "string"},
    "solver": _obj({
        "node_count": {"type": "integer", "minimum": 2},
        "wave_number": {"type": "number"},
        "solver_tolerance": _pos,
        "mach_floor": _pos,
    }),
    "case1": _obj({
        "a": {"type": "number"},
        "alpha": {"type": "number"},
        "sigma": _pos,
        "mach_range": _range,
        "x_m_range": _range,
    }),
    "case2": _obj({
        "degree": {"type": "integer", "minimum": 0},
        "mach_c0_range": _range,
        "mach_higher_range": _range,
        "source_range": _range,
        "grid_degree": {"type": "integer", "minimum": 0},
        "grid_sampler": {"enum": ["uniform", "cartesian"]},
        "grid_size": _pos_int,
        "grid_points_per_dim": {"type": "integer", "minimum": 2},
        "projector": {"enum": ["linear", "imported"]},
        "embedding_path": {"type": ["string", "null"]},
    }),
    "sampler": _obj({
        "method": {"enum": ["asadg", "lhs", "uniform", "cartesian"]},
        "n": _pos_int,
    }),
    "asadg": _obj({
        "rho0": _pos,
        "decay": {"type": "number", "exclusiveMinimum": 1},
        "max_iterations": {"type": ["integer", "null"], "minimum": 0},
        "max_points": _opt_pos_int,
        "time_limit": _opt_nonneg,
        "metric_floor": _opt_nonneg,
        "stability_window": {"type": ["integer", "null"], "minimum": 2},
        "stability_tolerance": {"type": "number", "minimum": 0},
        "max_accept_per_iteration": _opt_pos_int,
    }),
    "surrogate": _obj({"low": _surrogate_schema, "high": _surrogate_schema}),
    "benchmark": _obj({
        "modes": {"type": "array", "items": {"enum": ["low", "high"]}, "minItems": 1,
                  "uniqueItems": True},
        "train_size": {"type": "integer", "minimum": 4},
        "test_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "max_iterations": {"type": "integer", "minimum": 1},
    }),
})


@dataclass(frozen=True)
class SolverSettings:
    node_count: int = 129
    wave_number: float = 20.0
    solver_tolerance: float = 1e-8
    mach_floor: float = 0.1


@dataclass(frozen=True)
class Case1Settings:
    a: float = 1.0
    alpha: float = 30.0
    sigma: float = 0.05
    mach_range: tuple = (0.3, 1.0)
    x_m_range: tuple = (0.2, 0.8)


@dataclass(frozen=True)
class Case2Settings:
    degree: int = 5
    mach_c0_range: tuple = (0.5, 1.0)
    mach_higher_range: tuple = (-0.1, 0.1)
    source_range: tuple = (-1.0, 1.0)
    grid_degree: int = 1
    grid_sampler: str = "uniform"
    grid_size: int = 4096
    grid_points_per_dim: int = 4
    projector: str = "linear"
    embedding_path: Optional[str] = None


@dataclass(frozen=True)
class SamplerSettings:
    method: str = "asadg"
    n: int = 500


@dataclass(frozen=True)
class AsadgSettings:
    rho0: float = 1e3
    decay: float = 1.5
    max_iterations: Optional[int] = 20
    max_points: Optional[int] = 10_000
    time_limit: Optional[float] = None
    metric_floor: Optional[float] = None
    stability_window: Optional[int] = None
    stability_tolerance: float = 1e-3
    max_accept_per_iteration: Optional[int] = None


@dataclass(frozen=True)
class SurrogateSettings:
    hidden_sizes: tuple = (64, 512)
    learning_rate: float = 0.01
    epochs: int = 300
    batch_size: int = 100


def _default_surrogates():
    return {"low": SurrogateSettings(), "high": SurrogateSettings(hidden_sizes=(3000, 2500))}


@dataclass(frozen=True)
class BenchmarkSettings:
    modes: tuple = ("low", "high")
    train_size: int = 500
    test_fraction: float = 0.1
    seeds: tuple = (0,)
    # ASADG in the benchmark stops on the training budget; this only bounds the loop
    max_iterations: int = 200


_SECTIONS = {
    "solver": SolverSettings,
    "case1": Case1Settings,
    "case2": Case2Settings,
    "sampler": SamplerSettings,
    "asadg": AsadgSettings,
    "benchmark": BenchmarkSettings,
}


def _tuplify(cls, data: dict):
    out = {}
    for f in fields(cls):
        if f.name in data:
            v = data[f.name]
            out[f.name] = tuple(v) if isinstance(v, list) else v
    return cls(**out)


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "low"
    seed: int = 0
    output_dir: str = "runs/default"
    solver: SolverSettings = field(default_factory=SolverSettings)
    case1: Case1Settings = field(default_factory=Case1Settings)
    case2: Case2Settings = field(default_factory=Case2Settings)
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    asadg: AsadgSettings = field(default_factory=AsadgSettings)
    surrogate: dict = field(default_factory=_default_surrogates)
    benchmark: BenchmarkSettings = field(default_factory=BenchmarkSettings)

    @classmethod
    def from_dict(cls, data: dict, check_files: bool = True) -> "ExperimentConfig":
        try:
            jsonschema.validate(data, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {where}: {exc.message}") from None
        kwargs = {k: data[k] for k in ("mode", "seed", "output_dir") if k in data}
        for name, section in _SECTIONS.items():
            kwargs[name] = _tuplify(section, data.get(name, {}))
        surrogates = _default_surrogates()
        for mode, values in data.get("surrogate", {}).items():
            surrogates[mode] = _tuplify(SurrogateSettings, {**asdict(surrogates[mode]), **values})
        kwargs["surrogate"] = surrogates
        config = cls(**kwargs)
        config.check(check_files)
        return config

    def check(self, check_files: bool = True):
        for name in ("mach_range", "x_m_range"):
            lo, hi = getattr(self.case1, name)
            if not lo < hi:
                raise ConfigError(f"case1.{name} needs min < max")
        if self.case2.grid_degree > self.case2.degree:
            raise ConfigError("case2.grid_degree cannot exceed case2.degree")
        if self.case2.projector == "imported":
            path = self.case2.embedding_path
            if path is None:
                raise ConfigError("projector 'imported' needs case2.embedding_path")
            if check_files and not Path(path).is_file():
                raise ConfigError(f"embedding file not found: {path}")

    def to_dict(self) -> dict:
        d = {"mode": self.mode, "seed": self.seed, "output_dir": self.output_dir}
        for name in _SECTIONS:
            d[name] = _plain(asdict(getattr(self, name)))
        d["surrogate"] = {m: _plain(asdict(s)) for m, s in sorted(self.surrogate.items())}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return ExperimentConfig.from_dict(data)
