"""Two-layer perceptron scorer with manual gradients and EMA parameter updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DetectorParams", "ema_update", "flatten_params", "unflatten_params"]


@dataclass
class DetectorParams:
    """Weights of score = sigmoid(relu(x W1^T + b1) . w2 + b2).

    The object is callable on an (n, d) feature matrix and returns scores in
    (0, 1). Teacher and student share this architecture.
    """

    w1: np.ndarray  # (hidden, d_in)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float

    def __post_init__(self) -> None:
        self.w1 = np.asarray(self.w1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        self.b2 = float(self.b2)
        if self.w1.ndim != 2 or self.b1.shape != (self.w1.shape[0],) or self.w2.shape != (
            self.w1.shape[0],
        ):
            raise ValueError("inconsistent parameter shapes")
        if not (
            np.all(np.isfinite(self.w1))
            and np.all(np.isfinite(self.b1))
            and np.all(np.isfinite(self.w2))
            and np.isfinite(self.b2)
        ):
            raise ValueError("parameters must be finite")

    @classmethod
    def init(cls, rng: np.random.Generator, d_in: int, hidden: int) -> "DetectorParams":
        scale = 1.0 / np.sqrt(d_in)
        return cls(
            w1=rng.normal(0.0, scale, size=(hidden, d_in)),
            b1=np.zeros(hidden),
            w2=rng.normal(0.0, 1.0 / np.sqrt(hidden), size=hidden),
            b2=0.0,
        )

    def copy(self) -> "DetectorParams":
        return DetectorParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2)

    def __call__(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        hidden = np.maximum(features @ self.w1.T + self.b1, 0.0)
        logits = hidden @ self.w2 + self.b2
        return _sigmoid(logits)

    def score_gradients(
        self, features: np.ndarray, dloss_dscore: np.ndarray
    ) -> "DetectorParams":
        """Backpropagate a loss gradient on the scores into parameter gradients."""
        features = np.atleast_2d(np.asarray(features, dtype=float))
        pre = features @ self.w1.T + self.b1
        hidden = np.maximum(pre, 0.0)
        scores = _sigmoid(hidden @ self.w2 + self.b2)
        dlogits = np.asarray(dloss_dscore, dtype=float) * scores * (1.0 - scores)
        g_w2 = hidden.T @ dlogits
        g_b2 = float(dlogits.sum())
        d_hidden = np.outer(dlogits, self.w2) * (pre > 0.0)
        g_w1 = d_hidden.T @ features
        g_b1 = d_hidden.sum(axis=0)
        return DetectorParams(g_w1, g_b1, g_w2, g_b2)

    def sgd_step(self, grads: "DetectorParams", learning_rate: float) -> None:
        self.w1 -= learning_rate * grads.w1
        self.b1 -= learning_rate * grads.b1
        self.w2 -= learning_rate * grads.w2
        self.b2 -= learning_rate * grads.b2


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def ema_update(
    teacher: DetectorParams, student: DetectorParams, momentum: float
) -> DetectorParams:
    """teacher' = momentum * teacher + (1 - momentum) * student, elementwise."""
    if not 0.0 <= momentum <= 1.0:
        raise ValueError(f"momentum must be in [0, 1], got {momentum!r}")
    if teacher.w1.shape != student.w1.shape or teacher.w2.shape != student.w2.shape:
        raise ValueError("teacher and student parameter shapes differ")
    m = momentum
    return DetectorParams(
        m * teacher.w1 + (1.0 - m) * student.w1,
        m * teacher.b1 + (1.0 - m) * student.b1,
        m * teacher.w2 + (1.0 - m) * student.w2,
        m * teacher.b2 + (1.0 - m) * student.b2,
    )


def flatten_params(params: DetectorParams) -> np.ndarray:
    return np.concatenate([params.w1.ravel(), params.b1, params.w2, [params.b2]])


def unflatten_params(template: DetectorParams, vec: np.ndarray) -> DetectorParams:
    vec = np.asarray(vec, dtype=float)
    h, d = template.w1.shape
    w1 = vec[: h * d].reshape(h, d)
    b1 = vec[h * d : h * d + h]
    w2 = vec[h * d + h : h * d + 2 * h]
    b2 = float(vec[-1])
    return DetectorParams(w1.copy(), b1.copy(), w2.copy(), b2)
