"""Reference victim survival models.

Both models predict the mean lifetime, the integral of the survival curve:

* exponential: S(t) = exp(-lambda t) with log lambda = w.x + b, so T = 1/lambda.
* discrete-time: per-interval hazards h_k = logistic(w_k.x + b_k) on K
  equal-width intervals; T = sum_k S(t_k) * width.
"""
from __future__ import annotations

import json
from typing import Optional

import numpy as np

from ..errors import ParseError, UntrainedModel
from ..records import PatientRecord
from .features import Vocabulary, featurize


def _logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class ExponentialHazardModel:
    kind = "exponential"

    def __init__(self, vocab: Vocabulary, rho: float = 0.7,
                 weights: Optional[np.ndarray] = None, bias: Optional[float] = None):
        self.vocab = vocab
        self.rho = rho
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        self.bias = None if bias is None else float(bias)

    @property
    def trained(self) -> bool:
        return self.weights is not None and self.bias is not None

    def _check(self):
        if not self.trained:
            raise UntrainedModel("exponential model has no parameters")

    def log_rate(self, x: np.ndarray) -> np.ndarray:
        self._check()
        return x @ self.weights + self.bias

    def predict_time(self, record: PatientRecord) -> float:
        x = featurize(record, self.vocab, self.rho)
        return float(np.exp(-self.log_rate(x)))

    def predict_from_features(self, X: np.ndarray) -> np.ndarray:
        return np.exp(-self.log_rate(X))

    def survival_function(self, record: PatientRecord, t: float) -> float:
        x = featurize(record, self.vocab, self.rho)
        return float(np.exp(-np.exp(self.log_rate(x)) * t))

    def params(self) -> dict:
        self._check()
        return {"weights": self.weights.tolist(), "bias": self.bias}


class DiscreteTimeHazardModel:
    kind = "discrete"

    def __init__(self, vocab: Vocabulary, boundaries, rho: float = 0.7,
                 weights: Optional[np.ndarray] = None, biases: Optional[np.ndarray] = None):
        b = np.asarray(boundaries, dtype=float)
        if b.ndim != 1 or len(b) < 2:
            raise ValueError("discrete model needs K >= 2 interval boundaries")
        if np.any(np.diff(b) <= 0) or b[0] <= 0:
            raise ValueError("interval boundaries must be positive and strictly increasing")
        self.vocab = vocab
        self.rho = rho
        self.boundaries = b
        self.widths = np.diff(np.concatenate([[0.0], b]))
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        self.biases = None if biases is None else np.asarray(biases, dtype=float)

    @classmethod
    def uniform(cls, vocab, horizon: float, k: int = 20, **kw) -> "DiscreteTimeHazardModel":
        width = horizon / k
        return cls(vocab, width * np.arange(1, k + 1), **kw)

    @property
    def n_intervals(self) -> int:
        return len(self.boundaries)

    @property
    def trained(self) -> bool:
        return self.weights is not None and self.biases is not None

    def hazards(self, X: np.ndarray) -> np.ndarray:
        """Per-interval hazards, shape (..., K)."""
        if not self.trained:
            raise UntrainedModel("discrete model has no parameters")
        return _logistic(X @ self.weights.T + self.biases)

    def survival_curve(self, X: np.ndarray) -> np.ndarray:
        """S at each interval boundary, shape (..., K)."""
        return np.cumprod(1.0 - self.hazards(X), axis=-1)

    def predict_from_features(self, X: np.ndarray) -> np.ndarray:
        return self.survival_curve(X) @ self.widths

    def predict_time(self, record: PatientRecord) -> float:
        return float(self.predict_from_features(featurize(record, self.vocab, self.rho)))

    def survival_function(self, record: PatientRecord, t: float) -> float:
        """Right-continuous step function through the boundary values; 1 before t_1."""
        curve = self.survival_curve(featurize(record, self.vocab, self.rho))
        k = int(np.searchsorted(self.boundaries, t, side="right"))
        return 1.0 if k == 0 else float(curve[k - 1])

    def params(self) -> dict:
        if not self.trained:
            raise UntrainedModel("discrete model has no parameters")
        return {"boundaries": self.boundaries.tolist(), "weights": self.weights.tolist(),
                "biases": self.biases.tolist()}


VictimModel = ExponentialHazardModel | DiscreteTimeHazardModel


def model_to_dict(model) -> dict:
    return {"kind": model.kind, "vocab": list(model.vocab.codes),
            "featurizer": {"rho": model.rho}, **model.params()}


def model_from_dict(d: dict):
    try:
        kind = d["kind"]
        vocab = Vocabulary(tuple(d["vocab"]))
        rho = float(d["featurizer"]["rho"])
        if kind == "exponential":
            return ExponentialHazardModel(vocab, rho, np.asarray(d["weights"], dtype=float),
                                          float(d["bias"]))
        if kind == "discrete":
            return DiscreteTimeHazardModel(vocab, d["boundaries"], rho,
                                           np.asarray(d["weights"], dtype=float),
                                           np.asarray(d["biases"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed model file: {exc}") from None
    raise ParseError(f"unknown model kind {kind!r}")


def save_model(model, path, extra: Optional[dict] = None) -> None:
    d = model_to_dict(model)
    if extra:
        d.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(d, fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
