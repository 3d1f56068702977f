"""Scoring models: a linear classifier and a two-hidden-layer residual MLP.

Both expose forward scores, exact parameter gradients for a given upstream
d(loss)/d(score), and an L2-regularized gradient step that never penalizes
bias terms.  Parameters serialize to a flat named-array JSON document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class ModelError(ValueError):
    pass


def _check_features(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise ModelError(f"feature dimension {x.shape[-1]} != model dimension {d}")
    return x


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float

    @classmethod
    def zeros(cls, d: int) -> "LinearModel":
        return cls(np.zeros(d), 0.0)

    @property
    def dim(self) -> int:
        return self.weights.size

    def forward(self, x) -> float:
        x = _check_features(x, self.dim)
        return float(x @ self.weights + self.bias)

    def forward_batch(self, X) -> np.ndarray:
        X = _check_features(X, self.dim)
        return X @ self.weights + self.bias

    def backward(self, x, upstream: float) -> dict:
        x = _check_features(x, self.dim)
        return {"weights": upstream * x, "bias": float(upstream)}

    def backward_batch(self, X, upstream) -> dict:
        """Gradient of sum_i upstream_i * score_i, summed over the batch."""
        X = _check_features(X, self.dim)
        upstream = np.asarray(upstream, dtype=float)
        return {"weights": X.T @ upstream, "bias": float(upstream.sum())}

    def zero_grads(self) -> dict:
        return {"weights": np.zeros(self.dim), "bias": 0.0}

    def apply_update(self, grads: dict, step: float, lam: float) -> "LinearModel":
        w = self.weights - step * (grads["weights"] + 2.0 * lam * self.weights)
        b = self.bias - step * grads["bias"]
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise ModelError("non-finite parameter update")
        return LinearModel(w, float(b))

    def params_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.weights)) and np.isfinite(self.bias))

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias}


def _relu(z):
    return np.maximum(0.0, z)


def _relu_grad(z):
    return (z > 0.0).astype(float)


@dataclass(frozen=True)
class ResidualMlpModel:
    """Two hidden layers of width d with a residual skip of the raw input.

    score = w_out . (relu(W2 relu(W1 x + b1) + b2) + x) + b_out
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    w_out: np.ndarray
    b_out: float

    @classmethod
    def init(cls, d: int, rng: np.random.Generator) -> "ResidualMlpModel":
        # scaled-uniform keeps initial scores O(1) on standardized features
        scale = 1.0 / np.sqrt(d)
        return cls(
            W1=rng.uniform(-scale, scale, size=(d, d)),
            b1=np.zeros(d),
            W2=rng.uniform(-scale, scale, size=(d, d)),
            b2=np.zeros(d),
            w_out=rng.uniform(-scale, scale, size=d),
            b_out=0.0,
        )

    @property
    def dim(self) -> int:
        return self.w_out.size

    def forward(self, x) -> float:
        return float(self.forward_batch(np.asarray(x, dtype=float)[None, :])[0])

    def forward_batch(self, X) -> np.ndarray:
        X = _check_features(X, self.dim)
        h1 = _relu(X @ self.W1.T + self.b1)
        h2 = _relu(h1 @ self.W2.T + self.b2)
        return (h2 + X) @ self.w_out + self.b_out

    def backward(self, x, upstream: float) -> dict:
        x = np.asarray(x, dtype=float)
        return self.backward_batch(x[None, :], np.array([upstream]))

    def backward_batch(self, X, upstream) -> dict:
        """Gradient of sum_i upstream_i * score_i, summed over the batch."""
        X = _check_features(X, self.dim)
        upstream = np.asarray(upstream, dtype=float)
        z1 = X @ self.W1.T + self.b1
        h1 = _relu(z1)
        z2 = h1 @ self.W2.T + self.b2
        h2 = _relu(z2)

        g_wout = (h2 + X).T @ upstream
        g_bout = float(upstream.sum())
        d2 = (upstream[:, None] * self.w_out) * _relu_grad(z2)
        g_W2 = d2.T @ h1
        g_b2 = d2.sum(axis=0)
        d1 = (d2 @ self.W2) * _relu_grad(z1)
        g_W1 = d1.T @ X
        g_b1 = d1.sum(axis=0)
        return {"W1": g_W1, "b1": g_b1, "W2": g_W2, "b2": g_b2,
                "w_out": g_wout, "b_out": g_bout}

    def zero_grads(self) -> dict:
        d = self.dim
        return {"W1": np.zeros((d, d)), "b1": np.zeros(d),
                "W2": np.zeros((d, d)), "b2": np.zeros(d),
                "w_out": np.zeros(d), "b_out": 0.0}

    def apply_update(self, grads: dict, step: float, lam: float) -> "ResidualMlpModel":
        # L2 decay on weight matrices/vectors only; all biases excluded
        new = ResidualMlpModel(
            W1=self.W1 - step * (grads["W1"] + 2.0 * lam * self.W1),
            b1=self.b1 - step * grads["b1"],
            W2=self.W2 - step * (grads["W2"] + 2.0 * lam * self.W2),
            b2=self.b2 - step * grads["b2"],
            w_out=self.w_out - step * (grads["w_out"] + 2.0 * lam * self.w_out),
            b_out=self.b_out - step * grads["b_out"],
        )
        if not new.params_finite():
            raise ModelError("non-finite parameter update")
        return new

    def params_finite(self) -> bool:
        return all(
            np.all(np.isfinite(a))
            for a in (self.W1, self.b1, self.W2, self.b2, self.w_out, [self.b_out])
        )

    def to_dict(self) -> dict:
        return {
            "W1": self.W1.tolist(), "b1": self.b1.tolist(),
            "W2": self.W2.tolist(), "b2": self.b2.tolist(),
            "w_out": self.w_out.tolist(), "b_out": self.b_out,
        }


Model = LinearModel | ResidualMlpModel


def weight_norm_sq(model: Model) -> float:
    """Squared L2 norm of the regularized parameters (biases excluded)."""
    if isinstance(model, LinearModel):
        return float(model.weights @ model.weights)
    return float(
        np.sum(model.W1 ** 2) + np.sum(model.W2 ** 2) + model.w_out @ model.w_out
    )


def save_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "W1" in doc:
        return ResidualMlpModel(
            W1=np.asarray(doc["W1"], dtype=float),
            b1=np.asarray(doc["b1"], dtype=float),
            W2=np.asarray(doc["W2"], dtype=float),
            b2=np.asarray(doc["b2"], dtype=float),
            w_out=np.asarray(doc["w_out"], dtype=float),
            b_out=float(doc["b_out"]),
        )
    return LinearModel(np.asarray(doc["weights"], dtype=float), float(doc["bias"]))


def init_model(family: str, d: int, seed) -> Model:
    if family == "linear":
        return LinearModel.zeros(d)
    if family == "mlp":
        return ResidualMlpModel.init(d, np.random.default_rng(seed))
    raise ModelError(f"unknown model family {family!r}")
