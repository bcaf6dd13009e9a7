"""Fully connected regression network trained with SGD on mean absolute error, plus MNRE.

The network uses tanh on hidden layers and an identity output layer.
Weights start uniform in ``+-1/sqrt(fan_in)`` and mini-batches are shuffled
by a seeded generator, so training is bit-reproducible.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix
from .exceptions import DimensionMismatch, EmptyTestSet, InvalidParams, NonFiniteLoss
from .samplers import make_rng

__all__ = [
    "MlpConfig",
    "MlpModel",
    "MLPSurrogate",
    "MnreReport",
    "init_model",
    "train",
    "predict",
    "mnre",
]


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    output_dim: int
    hidden_sizes: tuple = (64, 512)
    learning_rate: float = 0.01
    epochs: int = 300
    batch_size: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.input_dim < 1 or self.output_dim < 1:
            raise InvalidParams("input_dim and output_dim must be positive")
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise InvalidParams("hidden_sizes must be a nonempty list of positive integers")
        if self.learning_rate < 0 or not np.isfinite(self.learning_rate):
            raise InvalidParams("learning_rate must be finite and non-negative")
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidParams("epochs must be >= 0 and batch_size >= 1")

    @property
    def layer_sizes(self) -> tuple:
        return (self.input_dim, *self.hidden_sizes, self.output_dim)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d


@dataclass
class MlpModel:
    weights: list
    biases: list
    config: Optional[MlpConfig] = None

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionMismatch("need one bias vector per weight matrix")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise DimensionMismatch(f"layer {i}: weight {W.shape} and bias {b.shape} disagree")
            if i and self.weights[i - 1].shape[1] != W.shape[0]:
                raise DimensionMismatch(f"layer {i} input size does not chain with layer {i - 1}")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def _forward(self, X):
        activations = [X]
        a = X
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            a = z if i == last else np.tanh(z)
            activations.append(a)
        return activations

    def forward(self, X) -> np.ndarray:
        return self._forward(X)[-1]

    def loss_and_gradients(self, X, Y, smoothing: float = 0.0):
        """Batch loss and its gradients.

        With ``smoothing = 0`` the loss is the mean absolute error and the
        gradient uses ``sign(0) = 0``.  A positive value swaps in the smooth
        surrogate ``sqrt(r**2 + s**2) - s``, which is what finite-difference
        checks need.
        """
        acts = self._forward(X)
        r = acts[-1] - Y
        n = r.size
        if smoothing > 0:
            root = np.sqrt(r * r + smoothing * smoothing)
            loss = float(np.mean(root - smoothing))
            delta = r / root / n
        else:
            loss = float(np.mean(np.abs(r)))
            delta = np.sign(r) / n
        grads_w, grads_b = [None] * len(self.weights), [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = acts[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i].T) * (1.0 - acts[i] ** 2)
        return loss, grads_w, grads_b

    def to_dict(self) -> dict:
        return {
            "config": None if self.config is None else self.config.to_dict(),
            "layers": [
                {"shape": list(W.shape), "weight": W.ravel().tolist(), "bias": b.tolist()}
                for W, b in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "MlpModel":
        weights = [np.asarray(l["weight"], dtype=float).reshape(l["shape"]) for l in d["layers"]]
        biases = [np.asarray(l["bias"], dtype=float) for l in d["layers"]]
        config = None if d.get("config") is None else MlpConfig(**d["config"])
        return cls(weights, biases, config)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "MlpModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init_model(config: MlpConfig) -> MlpModel:
    rng = make_rng(config.seed)
    sizes = config.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, fan_out))
    return MlpModel(weights, biases, config)


def _check_pairs(X, Y, config: MlpConfig):
    X = as_matrix(X, config.input_dim, name="inputs")
    Y = as_matrix(Y, config.output_dim, name="outputs")
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} inputs but {Y.shape[0]} outputs")
    return X, Y


def train(X, Y, config: MlpConfig, model: Optional[MlpModel] = None):
    """Run ``config.epochs`` passes of mini-batch SGD; returns ``(model, loss_trace)``.

    ``loss_trace[e]`` is the sample-weighted mean batch loss of epoch ``e``.
    ``batch_size`` is clipped to the dataset size.
    """
    X, Y = _check_pairs(X, Y, config)
    model = init_model(config) if model is None else model
    # shuffles use a stream independent of the initialisation stream
    rng = make_rng(config.seed + 1)
    n = X.shape[0]
    batch = min(config.batch_size, n)
    lr = config.learning_rate
    trace = []
    # overflow shows up as a non-finite loss, which is reported below
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, batch):
                idx = order[start : start + batch]
                loss, gw, gb = model.loss_and_gradients(X[idx], Y[idx])
                if not np.isfinite(loss):
                    raise NonFiniteLoss(f"loss became {loss} in epoch {epoch}; lower the learning rate")
                total += loss * idx.size
                for W, b, dW, db in zip(model.weights, model.biases, gw, gb):
                    W -= lr * dW
                    b -= lr * db
            trace.append(total / n)
    if not all(np.all(np.isfinite(W)) for W in model.weights):
        raise NonFiniteLoss("weights are no longer finite")
    return model, trace


def predict(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = as_matrix(np.atleast_2d(X), model.input_dim, name="inputs")
    out = model.forward(X)
    return out[0] if single else out


class MLPSurrogate(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`train` and :func:`predict`."""

    def __init__(self, hidden_sizes=(64, 512), learning_rate=0.01, epochs=300, batch_size=100,
                 random_state=0):
        self.hidden_sizes = hidden_sizes
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y):
        X = as_matrix(X, name="X")
        y = np.asarray(y, dtype=float)
        y = y.reshape(-1, 1) if y.ndim == 1 else y
        self.config_ = MlpConfig(
            X.shape[1], y.shape[1], tuple(self.hidden_sizes), self.learning_rate, self.epochs,
            self.batch_size, self.random_state,
        )
        self.model_ = init_model(self.config_)
        self.initial_loss_ = float(np.mean(np.abs(self.model_.forward(X) - y)))
        self.model_, self.loss_curve_ = train(X, y, self.config_, self.model_)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return predict(self.model_, X)


@dataclass
class MnreReport:
    mnre: float
    std: float
    epsilon: float
    y_min: np.ndarray
    y_max: np.ndarray
    per_sample: np.ndarray = field(repr=False)
    excluded_components: list = field(default_factory=list)
    std_population: str = "per-component terms over all test samples"

    @property
    def has_excluded(self) -> bool:
        return bool(self.excluded_components)

    def to_dict(self, include_ranges: bool = False) -> dict:
        d = {
            "mnre": self.mnre,
            "std": self.std,
            "std_population": self.std_population,
            "epsilon": self.epsilon,
            "n_samples": int(self.per_sample.size),
            "excluded_components": list(self.excluded_components),
        }
        if include_ranges:
            d["y_min"] = self.y_min.tolist()
            d["y_max"] = self.y_max.tolist()
        return d


def mnre(predictions, targets, epsilon: float = 0.1) -> MnreReport:
    """Mean normalised relative error with min/max taken per component from ``targets``.

    Each component is mapped to ``u = epsilon + (y - min) / (max - min)``, the
    same map is applied to the predictions, and the per-sample error is the
    mean of ``|u_hat - u| / |u|``.  Components with ``max == min`` cannot be
    normalised and are dropped; their indices are listed in the report.
    """
    if not 0 < epsilon < 1:
        raise InvalidParams("epsilon must lie in (0, 1)")
    P = np.asarray(predictions, dtype=float)
    T = np.asarray(targets, dtype=float)
    if T.size == 0 or T.shape[0] == 0:
        raise EmptyTestSet("no test samples")
    P, T = np.atleast_2d(P), np.atleast_2d(T)
    if P.shape != T.shape:
        raise DimensionMismatch(f"predictions {P.shape} vs targets {T.shape}")
    y_min, y_max = T.min(axis=0), T.max(axis=0)
    span = y_max - y_min
    keep = span > 0
    if not keep.any():
        raise EmptyTestSet("every output component is constant over the test set")
    u = epsilon + (T[:, keep] - y_min[keep]) / span[keep]
    u_hat = epsilon + (P[:, keep] - y_min[keep]) / span[keep]
    terms = np.abs(u_hat - u) / np.abs(u)
    per_sample = terms.mean(axis=1)
    return MnreReport(
        mnre=float(per_sample.mean()),
        std=float(terms.std()),
        epsilon=epsilon,
        y_min=y_min,
        y_max=y_max,
        per_sample=per_sample,
        excluded_components=np.flatnonzero(~keep).tolist(),
    )
