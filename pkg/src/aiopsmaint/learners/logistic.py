from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .base import HyperParams, IntRange, LogUniform, SingleClassData, check_features

LR_DEFAULTS: HyperParams = {"learning_rate": 0.5, "l2": 1e-4, "epochs": 200}
LR_SPACE = {
    "learning_rate": LogUniform(1e-3, 1.0),
    "l2": LogUniform(1e-6, 1.0),
    "epochs": IntRange(50, 500),
}


@dataclass
class LogisticModel:
    n_features: int
    mean: np.ndarray
    scale: np.ndarray   # 0 marks a constant (ignored) feature
    weights: np.ndarray
    bias: float

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        safe = np.where(self.scale > 0, self.scale, 1.0)
        Z = (X - self.mean) / safe
        Z[:, self.scale == 0] = 0.0
        return Z

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = check_features(self, X)
        return expit(self._standardize(X) @ self.weights + self.bias)


def fit_logistic(X: np.ndarray, y: np.ndarray, hp: HyperParams | None = None,
                 seed: int = 0) -> LogisticModel:
    """Full-batch gradient descent on L2-penalised log-loss over standardized features.

    ``seed`` is accepted for contract uniformity; the fit is deterministic.
    """
    hp = {**LR_DEFAULTS, **(hp or {})}
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0 or y.min() == y.max():
        raise SingleClassData("logistic regression needs both classes")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    model = LogisticModel(X.shape[1], mean, scale, np.zeros(X.shape[1]), 0.0)
    Z = model._standardize(X)
    n = y.size
    lr, l2 = float(hp["learning_rate"]), float(hp["l2"])
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(int(hp["epochs"])):
        residual = expit(Z @ w + b) - y
        w -= lr * (Z.T @ residual / n + l2 * w)
        b -= lr * float(residual.mean())
    model.weights = w
    model.bias = b
    return model
