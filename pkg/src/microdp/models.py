"""Small trainable classifiers with exact, hand-written gradients.

Both models expose the same surface: `predict_proba` / `forward` for
posteriors, `grad_mean_loss` / `grad_per_example` for cross-entropy
gradients keyed by layer id, `loss` for the mean cross-entropy, and
flat-array access so optimizer updates stay model-agnostic.
"""

from __future__ import annotations

import numpy as np

from .gradients import GradientSet

_INIT_RANGE = 0.1


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _check_batch(x: np.ndarray, y: np.ndarray | None, dimension: int, classes: int):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != dimension:
        raise ValueError(
            f"bad-input: expected feature matrix with {dimension} columns, got shape {x.shape}"
        )
    if y is None:
        return x, None
    y = np.asarray(y)
    if y.shape != (x.shape[0],):
        raise ValueError(f"bad-input: labels shape {y.shape} does not match {x.shape[0]} rows")
    if y.size and (y.min() < 0 or y.max() >= classes):
        raise ValueError(f"bad-input: labels must lie in [0, {classes})")
    return x, y.astype(np.int64)


def _uniform_init(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.uniform(-_INIT_RANGE, _INIT_RANGE, size=shape)


class SoftmaxRegressor:
    """Multinomial logistic regression; layer ids "w" and "b"."""

    kind = "softmax"

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        self.weights = np.array(weights, dtype=np.float64)
        self.bias = np.array(bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError("bad-input: weights must be (classes, features), bias (classes,)")

    @classmethod
    def init(cls, classes: int, features: int, seed: int) -> "SoftmaxRegressor":
        rng = np.random.default_rng(seed)
        return cls(_uniform_init(rng, (classes, features)), _uniform_init(rng, (classes,)))

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dimension(self) -> int:
        return self.weights.shape[1]

    @property
    def layer_ids(self) -> tuple[str, ...]:
        return ("w", "b")

    def _layer_arrays(self) -> dict[str, np.ndarray]:
        return {"w": self.weights, "b": self.bias}

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x, _ = _check_batch(x, None, self.dimension, self.classes)
        return _softmax(x @ self.weights.T + self.bias)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Posterior vector for a single example."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError(f"bad-input: expected vector of length {self.dimension}, got {x.shape}")
        return self.predict_proba(x[None, :])[0]

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        x, y = _check_batch(x, y, self.dimension, self.classes)
        if x.shape[0] == 0:
            raise ValueError("empty-batch: need at least one example")
        logits = x @ self.weights.T + self.bias
        log_z = np.log(np.exp(logits - logits.max(axis=1, keepdims=True)).sum(axis=1))
        log_z += logits.max(axis=1)
        return float(np.mean(log_z - logits[np.arange(len(y)), y]))

    def grad_mean_loss(self, x: np.ndarray, y: np.ndarray) -> GradientSet:
        x, y = _check_batch(x, y, self.dimension, self.classes)
        n = x.shape[0]
        if n == 0:
            raise ValueError("empty-batch: need at least one example")
        probs = _softmax(x @ self.weights.T + self.bias)
        probs[np.arange(n), y] -= 1.0
        probs /= n
        d_w = probs.T @ x
        d_b = probs.sum(axis=0)
        return GradientSet({"w": d_w.ravel(), "b": d_b})

    def grad_per_example(self, x: np.ndarray, y: np.ndarray) -> list[GradientSet]:
        x, y = _check_batch(x, y, self.dimension, self.classes)
        if x.shape[0] == 0:
            raise ValueError("empty-batch: need at least one example")
        return [self.grad_mean_loss(x[i : i + 1], y[i : i + 1]) for i in range(x.shape[0])]

    def add_flat(self, layer_id: str, delta: np.ndarray) -> None:
        arr = self._layer_arrays()[layer_id]
        arr += delta.reshape(arr.shape)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "classes": self.classes,
            "features": self.dimension,
            "weights": {"w": self.weights.ravel().tolist(), "b": self.bias.tolist()},
        }

    @classmethod
    def from_json(cls, payload: dict) -> "SoftmaxRegressor":
        k, d = payload["classes"], payload["features"]
        w = np.array(payload["weights"]["w"], dtype=np.float64).reshape(k, d)
        b = np.array(payload["weights"]["b"], dtype=np.float64)
        return cls(w, b)


class Mlp2:
    """Two affine layers with a tanh in between; ids l1.w, l1.b, l2.w, l2.b."""

    kind = "mlp"

    def __init__(self, w1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: np.ndarray):
        self.w1 = np.array(w1, dtype=np.float64)
        self.b1 = np.array(b1, dtype=np.float64)
        self.w2 = np.array(w2, dtype=np.float64)
        self.b2 = np.array(b2, dtype=np.float64)
        if (
            self.w1.ndim != 2
            or self.b1.shape != (self.w1.shape[0],)
            or self.w2.shape[1] != self.w1.shape[0]
            or self.b2.shape != (self.w2.shape[0],)
        ):
            raise ValueError("bad-input: inconsistent layer shapes")

    @classmethod
    def init(cls, classes: int, features: int, hidden: int, seed: int) -> "Mlp2":
        rng = np.random.default_rng(seed)
        return cls(
            _uniform_init(rng, (hidden, features)),
            _uniform_init(rng, (hidden,)),
            _uniform_init(rng, (classes, hidden)),
            _uniform_init(rng, (classes,)),
        )

    @property
    def classes(self) -> int:
        return self.w2.shape[0]

    @property
    def dimension(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def layer_ids(self) -> tuple[str, ...]:
        return ("l1.w", "l1.b", "l2.w", "l2.b")

    def _layer_arrays(self) -> dict[str, np.ndarray]:
        return {"l1.w": self.w1, "l1.b": self.b1, "l2.w": self.w2, "l2.b": self.b2}

    def _hidden_activations(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(x @ self.w1.T + self.b1)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x, _ = _check_batch(x, None, self.dimension, self.classes)
        return _softmax(self._hidden_activations(x) @ self.w2.T + self.b2)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError(f"bad-input: expected vector of length {self.dimension}, got {x.shape}")
        return self.predict_proba(x[None, :])[0]

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        x, y = _check_batch(x, y, self.dimension, self.classes)
        if x.shape[0] == 0:
            raise ValueError("empty-batch: need at least one example")
        logits = self._hidden_activations(x) @ self.w2.T + self.b2
        log_z = np.log(np.exp(logits - logits.max(axis=1, keepdims=True)).sum(axis=1))
        log_z += logits.max(axis=1)
        return float(np.mean(log_z - logits[np.arange(len(y)), y]))

    def grad_mean_loss(self, x: np.ndarray, y: np.ndarray) -> GradientSet:
        x, y = _check_batch(x, y, self.dimension, self.classes)
        n = x.shape[0]
        if n == 0:
            raise ValueError("empty-batch: need at least one example")
        h = self._hidden_activations(x)
        probs = _softmax(h @ self.w2.T + self.b2)
        probs[np.arange(n), y] -= 1.0
        probs /= n
        d_w2 = probs.T @ h
        d_b2 = probs.sum(axis=0)
        d_h = probs @ self.w2
        d_pre = d_h * (1.0 - h * h)
        d_w1 = d_pre.T @ x
        d_b1 = d_pre.sum(axis=0)
        return GradientSet(
            {"l1.w": d_w1.ravel(), "l1.b": d_b1, "l2.w": d_w2.ravel(), "l2.b": d_b2}
        )

    def grad_per_example(self, x: np.ndarray, y: np.ndarray) -> list[GradientSet]:
        x, y = _check_batch(x, y, self.dimension, self.classes)
        if x.shape[0] == 0:
            raise ValueError("empty-batch: need at least one example")
        return [self.grad_mean_loss(x[i : i + 1], y[i : i + 1]) for i in range(x.shape[0])]

    def add_flat(self, layer_id: str, delta: np.ndarray) -> None:
        arr = self._layer_arrays()[layer_id]
        arr += delta.reshape(arr.shape)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "classes": self.classes,
            "features": self.dimension,
            "hidden": self.hidden,
            "weights": {
                "l1.w": self.w1.ravel().tolist(),
                "l1.b": self.b1.tolist(),
                "l2.w": self.w2.ravel().tolist(),
                "l2.b": self.b2.tolist(),
            },
        }

    @classmethod
    def from_json(cls, payload: dict) -> "Mlp2":
        k, d, h = payload["classes"], payload["features"], payload["hidden"]
        w = payload["weights"]
        return cls(
            np.array(w["l1.w"], dtype=np.float64).reshape(h, d),
            np.array(w["l1.b"], dtype=np.float64),
            np.array(w["l2.w"], dtype=np.float64).reshape(k, h),
            np.array(w["l2.b"], dtype=np.float64),
        )


def build_model(kind: str, classes: int, features: int, seed: int, hidden: int = 32):
    if kind == "softmax":
        return SoftmaxRegressor.init(classes, features, seed)
    if kind == "mlp":
        return Mlp2.init(classes, features, hidden, seed)
    raise ValueError(f"bad-config: unknown model kind {kind!r}")


def model_from_json(payload: dict):
    kind = payload.get("kind")
    if kind == "softmax":
        return SoftmaxRegressor.from_json(payload)
    if kind == "mlp":
        return Mlp2.from_json(payload)
    raise ValueError(f"bad-config: unknown model kind {kind!r}")
