from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import HyperParams, IntRange, check_features
from .cart import CART_DEFAULTS, TreeModel, grow_tree

RF_DEFAULTS: HyperParams = {
    **CART_DEFAULTS,
    "n_trees": 30,
    "feature_subsample": "sqrt",
    "bootstrap": True,
}
RF_SPACE = {
    "n_trees": IntRange(10, 100),
    "max_depth": IntRange(2, 20),
    "min_samples_split": IntRange(2, 50),
}


@dataclass
class ForestModel:
    n_features: int
    trees: list[TreeModel]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = check_features(self, X)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)


def _max_features(setting, d: int) -> int | None:
    if setting in (None, "none", "all", 1.0):
        return None
    if setting == "sqrt":
        return max(1, int(math.sqrt(d)))
    if setting == "log2":
        return max(1, int(math.log2(d)))
    if isinstance(setting, float):
        return max(1, int(round(setting * d)))
    return max(1, min(d, int(setting)))


def fit_random_forest(X: np.ndarray, y: np.ndarray, hp: HyperParams | None = None,
                      seed: int = 0) -> ForestModel:
    """Bagged CART trees with per-split feature subsampling; score is the mean leaf score."""
    hp = {**RF_DEFAULTS, **(hp or {})}
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n, d = X.shape
    if n == 0:
        raise ValueError("random forest needs at least one sample")
    rng = np.random.default_rng(seed)
    max_features = _max_features(hp["feature_subsample"], d)
    trees = []
    for _ in range(int(hp["n_trees"])):
        if hp["bootstrap"]:
            rows = rng.integers(0, n, size=n)
            Xb, yb = X[rows], y[rows]
        else:
            Xb, yb = X, y
        trees.append(grow_tree(Xb, yb, int(hp["max_depth"]), int(hp["min_samples_split"]),
                               max_features=max_features, rng=rng))
    return ForestModel(d, trees)
