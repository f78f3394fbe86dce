"""Incremental Hoeffding tree for binary targets and numeric features.

Numeric attributes are summarised per leaf by a Gaussian per class
(running mean/variance plus the observed range); candidate thresholds are
evenly spaced inside that range and class counts on each side are
estimated from the Gaussian CDFs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .base import FeatureCountMismatch, HyperParams, IntRange, LogUniform, Uniform, check_features

HT_DEFAULTS: HyperParams = {
    "grace_period": 200,
    "split_confidence": 1e-7,
    "tie_threshold": 0.05,
    "n_split_points": 10,
}
HT_SPACE = {
    "grace_period": IntRange(50, 500),
    "split_confidence": LogUniform(1e-8, 1e-4),
    "tie_threshold": Uniform(0.01, 0.1),
}

#: Range of the information gain for two classes (log2 of the class count).
GAIN_RANGE = 1.0


def hoeffding_bound(value_range: float, confidence: float, n: float) -> float:
    return math.sqrt(value_range ** 2 * math.log(1.0 / confidence) / (2.0 * n))


def _entropy(counts: np.ndarray) -> np.ndarray:
    """Binary entropy in bits along the last axis (which holds class counts)."""
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * logs).sum(axis=-1)


@dataclass
class _Leaf:
    n_features: int
    class_counts: np.ndarray = None  # includes mass inherited from the parent split
    depth: int = 0
    n_since_eval: int = 0
    count: np.ndarray = None
    mean: np.ndarray = None
    m2: np.ndarray = None
    lo: np.ndarray = None
    hi: np.ndarray = None

    def __post_init__(self):
        d = self.n_features
        if self.class_counts is None:
            self.class_counts = np.zeros(2)
        self.count = np.zeros((2, d))
        self.mean = np.zeros((2, d))
        self.m2 = np.zeros((2, d))
        self.lo = np.full(d, np.inf)
        self.hi = np.full(d, -np.inf)

    @property
    def n_observed(self) -> int:
        return int(self.count[:, 0].sum())

    def update(self, x: np.ndarray, y: int) -> None:
        self.class_counts[y] += 1.0
        self.n_since_eval += 1
        c = self.count[y]
        c += 1.0
        delta = x - self.mean[y]
        self.mean[y] += delta / c
        self.m2[y] += delta * (x - self.mean[y])
        np.minimum(self.lo, x, out=self.lo)
        np.maximum(self.hi, x, out=self.hi)

    def score(self) -> float:
        return (self.class_counts[1] + 1.0) / (self.class_counts.sum() + 2.0)

    def split_candidates(self, n_points: int):
        """Best gain per feature as ``(gains, thresholds, left_counts, right_counts)``."""
        d = self.n_features
        n_c = self.count[:, 0]  # (2,)
        parent = _entropy(n_c)
        frac = np.linspace(0.0, 1.0, n_points + 2)[1:-1]
        thr = self.lo[:, None] + (self.hi - self.lo)[:, None] * frac[None, :]  # (d, k)
        sd = np.sqrt(np.where(self.count > 1, self.m2 / np.maximum(self.count - 1, 1), 0.0))
        # left mass per class: (2, d, k)
        z_num = thr[None, :, :] - self.mean[:, :, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            left_frac = np.where(sd[:, :, None] > 0,
                                 ndtr(z_num / np.where(sd[:, :, None] > 0, sd[:, :, None], 1.0)),
                                 (z_num >= 0).astype(float))
        left = left_frac * n_c[:, None, None]
        right = n_c[:, None, None] - left
        left = np.moveaxis(left, 0, -1)    # (d, k, 2)
        right = np.moveaxis(right, 0, -1)
        n = n_c.sum()
        child = (left.sum(-1) * _entropy(left) + right.sum(-1) * _entropy(right)) / n
        gain = parent - child  # (d, k)
        flat = np.isfinite(self.lo) & (self.hi > self.lo)
        gain[~flat] = -np.inf
        best_k = np.argmax(gain, axis=1)
        rows = np.arange(d)
        return (gain[rows, best_k], thr[rows, best_k],
                left[rows, best_k], right[rows, best_k])


@dataclass
class _Split:
    feature: int
    threshold: float
    left: object
    right: object


@dataclass
class HoeffdingTree:
    """Online tree; leaf score is the Laplace-smoothed positive fraction."""

    n_features: int
    grace_period: int = 200
    split_confidence: float = 1e-7
    tie_threshold: float = 0.05
    n_split_points: int = 10
    root: object = field(default=None, repr=False)
    n_seen: int = 0
    n_splits: int = 0

    def __post_init__(self):
        if self.root is None:
            self.root = _Leaf(self.n_features)

    @classmethod
    def from_params(cls, n_features: int, hp: HyperParams | None = None) -> "HoeffdingTree":
        hp = {**HT_DEFAULTS, **(hp or {})}
        return cls(n_features, int(hp["grace_period"]), float(hp["split_confidence"]),
                   float(hp["tie_threshold"]), int(hp["n_split_points"]))

    def _leaf_for(self, x: np.ndarray):
        node, parent, went_left = self.root, None, False
        while isinstance(node, _Split):
            parent = node
            went_left = x[node.feature] <= node.threshold
            node = node.left if went_left else node.right
        return node, parent, went_left

    def learn_one(self, x, y: int) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise FeatureCountMismatch(f"expected {self.n_features} features, got {x.shape}")
        leaf, parent, went_left = self._leaf_for(x)
        leaf.update(x, int(y))
        self.n_seen += 1
        if leaf.n_since_eval >= self.grace_period:
            leaf.n_since_eval = 0
            self._attempt_split(leaf, parent, went_left)

    def split_bound(self, n: float) -> float:
        return hoeffding_bound(GAIN_RANGE, self.split_confidence, n)

    def _attempt_split(self, leaf: _Leaf, parent, went_left: bool) -> bool:
        if (leaf.count[:, 0] == 0).any():
            return False
        gains, thresholds, lefts, rights = leaf.split_candidates(self.n_split_points)
        order = np.argsort(-gains, kind="stable")
        best = gains[order[0]]
        # the "no split" option competes with gain 0
        second = max(gains[order[1]], 0.0) if gains.size > 1 else 0.0
        if not np.isfinite(best) or best <= 0.0:
            return False
        eps = self.split_bound(leaf.n_observed)
        if not (best - second > eps or eps < self.tie_threshold):
            return False
        f = int(order[0])
        node = _Split(f, float(thresholds[f]),
                      _Leaf(self.n_features, lefts[f].copy(), leaf.depth + 1),
                      _Leaf(self.n_features, rights[f].copy(), leaf.depth + 1))
        if parent is None:
            self.root = node
        elif went_left:
            parent.left = node
        else:
            parent.right = node
        self.n_splits += 1
        return True

    def _score_rows(self, node, X: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
        if isinstance(node, _Leaf):
            out[rows] = node.score()
            return
        mask = X[rows, node.feature] <= node.threshold
        self._score_rows(node.left, X, rows[mask], out)
        self._score_rows(node.right, X, rows[~mask], out)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = check_features(self, X)
        out = np.empty(X.shape[0])
        self._score_rows(self.root, X, np.arange(X.shape[0]), out)
        return out

    def leaves(self) -> list[_Leaf]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, _Leaf):
                out.append(node)
            else:
                stack.extend([node.left, node.right])
        return out


def ht_learn_one(model: HoeffdingTree, x, y: int) -> HoeffdingTree:
    model.learn_one(x, y)
    return model


def fit_hoeffding(X: np.ndarray, y: np.ndarray, hp: HyperParams | None = None,
                  seed: int = 0) -> HoeffdingTree:
    """One pass over the rows in the given order."""
    X = np.asarray(X, dtype=float)
    tree = HoeffdingTree.from_params(X.shape[1], hp)
    for xi, yi in zip(X, np.asarray(y)):
        tree.learn_one(xi, int(yi))
    return tree
