"""Gini-impurity classification trees with axis-aligned thresholds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import HyperParams, IntRange, check_features

CART_DEFAULTS: HyperParams = {"max_depth": 10, "min_samples_split": 10}
CART_SPACE = {
    "max_depth": IntRange(2, 20),
    "min_samples_split": IntRange(2, 50),
}

LEAF = -1


@dataclass
class TreeModel:
    """Flat-array binary tree. Leaves have ``feature == -1``."""

    n_features: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        def walk(i: int) -> int:
            if self.feature[i] == LEAF:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] != LEAF
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = check_features(self, X)
        return self.value[self.apply(X)]


def _best_split(Xn: np.ndarray, yn: np.ndarray, features: np.ndarray):
    """Return ``(feature, threshold, weighted_child_gini)`` or None when no split separates rows."""
    m = yn.size
    cols = Xn[:, features]
    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)
    ys = yn[order].astype(float)
    pos_left = np.cumsum(ys, axis=0)[:-1]
    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    pos_right = ys.sum(axis=0) - pos_left
    p_l = pos_left / n_left
    p_r = pos_right / n_right
    gini = (n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)) / m
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    gini = np.where(valid, gini, np.inf)
    flat = int(np.argmin(gini.T))  # feature-major so earlier features win ties
    j, row = divmod(flat, m - 1)
    thr = 0.5 * (xs[row, j] + xs[row + 1, j])
    if thr >= xs[row + 1, j]:  # midpoint rounding between adjacent floats
        thr = xs[row, j]
    return int(features[j]), float(thr), float(gini[row, j])


def grow_tree(X: np.ndarray, y: np.ndarray, max_depth: int, min_samples_split: int,
              max_features: int | None = None,
              rng: np.random.Generator | None = None) -> TreeModel:
    """Greedy depth-first growth. ``max_features`` < d draws a feature subset per split."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int8)
    n, d = X.shape
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx: np.ndarray) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()) if idx.size else 0.0)
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        pos = int(yn.sum())
        if depth >= max_depth or idx.size < max(min_samples_split, 2) or pos in (0, idx.size):
            continue
        if max_features is not None and max_features < d:
            feats = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            feats = np.arange(d)
        found = _best_split(X[idx], yn, feats)
        if found is None:
            continue
        f, thr, child_gini = found
        p = pos / idx.size
        if child_gini > 2 * p * (1 - p) + 1e-12:  # zero-gain splits are allowed (XOR)
            continue
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return TreeModel(d, np.array(feature, dtype=np.int64), np.array(threshold),
                     np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                     np.array(value))


def fit_cart(X: np.ndarray, y: np.ndarray, hp: HyperParams | None = None,
             seed: int = 0) -> TreeModel:
    """Leaf score is the raw positive fraction at the leaf; ``seed`` is unused (deterministic)."""
    hp = {**CART_DEFAULTS, **(hp or {})}
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("CART needs at least one sample")
    return grow_tree(X, y, int(hp["max_depth"]), int(hp["min_samples_split"]))
