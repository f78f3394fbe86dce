"""Time-based ensembles over per-period base classifiers (SEA, AWE, AUE).

All three keep at most ``capacity`` members. SEA votes by majority and
swaps in a candidate built on the previous period when it beats the
weakest member; AWE and AUE weight members by ``MSE_RANDOM - MSE`` measured
on the newest period and drop members whose MSE reaches that of a random
guesser.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import stats
from .learners import HoeffdingTree, Model

log = logging.getLogger(__name__)

#: MSE of a classifier that predicts 0.5 for every sample.
MSE_RANDOM = 0.25

#: Folds used to estimate the newest member's MSE.
CV_FOLDS = 10

FitBase = Callable[[np.ndarray, np.ndarray, int], Model]
Quality = Callable[[Model, np.ndarray, np.ndarray], float]


class EnsembleError(ValueError):
    pass


class EmptyEnsemble(EnsembleError):
    pass


class ZeroTotalWeight(EnsembleError):
    pass


@dataclass
class Member:
    model: Model
    created: int
    weight: float = 0.0
    mse: float = float("nan")
    quality: float = float("nan")


@dataclass
class EnsembleState:
    kind: str                       # "sea" | "awe" | "aue"
    capacity: int
    members: list[Member] = field(default_factory=list)
    pending: Member | None = None   # SEA's candidate built on the previous period
    last_update: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sea", "awe", "aue"):
            raise EnsembleError(f"unknown ensemble kind {self.kind!r}")
        if self.capacity < 1:
            raise EnsembleError("capacity must be positive")

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.members])


def accuracy_quality(model: Model, X: np.ndarray, y: np.ndarray) -> float:
    """Default SEA quality: accuracy at threshold 0.5 on the newest period."""
    return 1.0 - stats.error_rate(model.predict_proba(X), y)


# ---------------------------------------------------------------------------
# SEA

def sea_on_new_period(state: EnsembleState, X: np.ndarray, y: np.ndarray, fit_base: FitBase,
                      seed: int = 0, period_index: int = 0,
                      quality: Quality = accuracy_quality) -> EnsembleState:
    if len(y) == 0:
        return replace(state, last_update={"skipped": "empty period"})
    members = [replace(m) for m in state.members]
    info: dict = {"period": period_index}
    cand = state.pending
    if cand is not None:
        cand = replace(cand, quality=quality(cand.model, X, y))
        for m in members:
            m.quality = quality(m.model, X, y)
        if len(members) < state.capacity:
            members.append(cand)
            info["action"] = "appended"
        else:
            weakest = min(range(len(members)), key=lambda k: members[k].quality)
            if cand.quality > members[weakest].quality:
                info["action"] = f"replaced member from period {members[weakest].created}"
                del members[weakest]
                members.append(cand)
            else:
                info["action"] = "candidate rejected"
    try:
        pending = Member(fit_base(X, y, seed), period_index)
    except ValueError as exc:
        info["fit_error"] = str(exc)
        pending = None
    return replace(state, members=members, pending=pending, last_update=info)


def sea_predict(state: EnsembleState, X: np.ndarray) -> np.ndarray:
    """Fraction of members voting positive (member score > 0.5)."""
    if not state.members:
        raise EmptyEnsemble("SEA ensemble has no members")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    votes = np.array([m.model.predict_proba(X) > 0.5 for m in state.members])
    return votes.mean(axis=0)


# ---------------------------------------------------------------------------
# AWE / AUE

def stratified_folds(y: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Fold id per row; each class is spread round-robin after a seeded shuffle."""
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=np.int64)
    offset = 0
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(np.asarray(y) == cls))
        fold[idx] = (np.arange(idx.size) + offset) % n_folds
        offset += idx.size
    return fold


def cv_mse(fit_base: FitBase, X: np.ndarray, y: np.ndarray, n_folds: int = CV_FOLDS,
           seed: int = 0) -> float:
    """Cross-validated MSE of ``fit_base`` on one period.

    A fold whose training part lacks a class (or whose fit fails) is scored
    with the period's positive rate as a constant prediction.
    """
    y = np.asarray(y)
    n = len(y)
    prior = float(y.mean())
    if n < 2:
        return stats.mse(np.full(n, prior), y)
    k = min(n_folds, n)
    fold = stratified_folds(y, k, seed)
    pred = np.empty(n)
    for f in range(k):
        test = fold == f
        if not test.any():
            continue
        train = ~test
        y_tr = y[train]
        if y_tr.min() == y_tr.max():
            pred[test] = prior
            continue
        try:
            model = fit_base(X[train], y_tr, seed + f + 1)
            pred[test] = model.predict_proba(X[test])
        except ValueError:
            pred[test] = prior
    return stats.mse(pred, y)


def awe_weight(mse: float) -> float:
    return MSE_RANDOM - mse


def _select(members: list[Member], capacity: int) -> tuple[list[Member], list[Member]]:
    """Drop members with non-positive weight, keep the heaviest ``capacity`` (newer wins ties)."""
    alive = [m for m in members if m.weight > 0.0]
    ranked = sorted(alive, key=lambda m: (-m.weight, -m.created))
    kept = ranked[:capacity]
    kept_ids = {id(m) for m in kept}
    dropped = [m for m in members if id(m) not in kept_ids]
    kept.sort(key=lambda m: m.created)
    return kept, dropped


def awe_on_new_period(state: EnsembleState, X: np.ndarray, y: np.ndarray, fit_base: FitBase,
                      seed: int = 0, period_index: int = 0) -> EnsembleState:
    if len(y) == 0 or np.min(y) == np.max(y):
        return replace(state, last_update={"period": period_index,
                                           "skipped": "period lacks a class"})
    members = [replace(m) for m in state.members]
    for m in members:
        m.mse = stats.mse(m.model.predict_proba(X), y)
        m.weight = awe_weight(m.mse)
    info: dict = {"period": period_index}
    try:
        cand = Member(fit_base(X, y, seed), period_index)
        cand.mse = cv_mse(fit_base, X, y, CV_FOLDS, seed)
        cand.weight = awe_weight(cand.mse)
        members.append(cand)
    except ValueError as exc:
        info["fit_error"] = str(exc)
    kept, dropped = _select(members, state.capacity)
    info["dropped"] = [m.created for m in dropped]
    return replace(state, members=kept, last_update=info)


def aue_on_new_period(state: EnsembleState, X: np.ndarray, y: np.ndarray, fit_base: FitBase,
                      seed: int = 0, period_index: int = 0) -> EnsembleState:
    """AWE weighting with incrementally updated Hoeffding-tree members.

    Surviving older members are then trained on every sample of the period,
    in order. Members are mutated in place.
    """
    if len(y) == 0:
        return replace(state, last_update={"period": period_index, "skipped": "empty period"})
    members = list(state.members)
    for m in members:
        m.mse = stats.mse(m.model.predict_proba(X), y)
        m.weight = awe_weight(m.mse)
    info: dict = {"period": period_index}
    cand = Member(fit_base(X, y, seed), period_index)
    cand.mse = cv_mse(fit_base, X, y, CV_FOLDS, seed)
    cand.weight = awe_weight(cand.mse)
    kept, dropped = _select(members + [cand], state.capacity)
    info["dropped"] = [m.created for m in dropped]
    for m in kept:
        if m is cand:
            continue
        for xi, yi in zip(np.asarray(X, dtype=float), np.asarray(y)):
            m.model.learn_one(xi, int(yi))
    return replace(state, members=kept, last_update=info)


def weighted_predict(state: EnsembleState, X: np.ndarray) -> np.ndarray:
    """``sum(w_i * score_i) / sum(w_i)`` over the members."""
    if not state.members:
        raise EmptyEnsemble(f"{state.kind.upper()} ensemble has no members")
    w = state.weights
    total = w.sum()
    if total <= 0.0:
        raise ZeroTotalWeight("ensemble weights sum to zero")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    scores = np.array([m.model.predict_proba(X) for m in state.members])
    return w @ scores / total


awe_predict = weighted_predict
aue_predict = weighted_predict


def on_new_period(state: EnsembleState, X, y, fit_base: FitBase, seed: int = 0,
                  period_index: int = 0) -> EnsembleState:
    if state.kind == "sea":
        return sea_on_new_period(state, X, y, fit_base, seed, period_index)
    if state.kind == "awe":
        return awe_on_new_period(state, X, y, fit_base, seed, period_index)
    return aue_on_new_period(state, X, y, fit_base, seed, period_index)


def predict(state: EnsembleState, X) -> np.ndarray:
    if state.kind == "sea":
        return sea_predict(state, X)
    return weighted_predict(state, X)


def new_tree_factory(n_features: int, hp: dict | None = None) -> FitBase:
    """``fit_base`` for AUE: a fresh Hoeffding tree trained in one pass."""
    def fit(X, y, seed):
        tree = HoeffdingTree.from_params(n_features, hp)
        for xi, yi in zip(np.asarray(X, dtype=float), np.asarray(y)):
            tree.learn_one(xi, int(yi))
        return tree
    return fit
