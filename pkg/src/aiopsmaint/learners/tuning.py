from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .. import stats
from .base import HyperParams, LearnerFamily, SearchSpace, sample_config

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Trial:
    params: HyperParams
    auc: float          # -inf when the fit or the scoring failed


@dataclass(frozen=True)
class TuneResult:
    params: HyperParams
    trials: tuple[Trial, ...]

    @property
    def best_auc(self) -> float:
        return max(t.auc for t in self.trials)


def tune_random_search(family: LearnerFamily, search_space: SearchSpace | None, budget: int,
                       train: tuple[np.ndarray, np.ndarray], valid: tuple[np.ndarray, np.ndarray],
                       seed: int = 0, base: HyperParams | None = None) -> TuneResult:
    """Draw ``budget`` configurations, keep the one with the best validation AUC.

    Drawn values override ``base`` (the family defaults when omitted).
    Ties go to the earliest draw.
    """
    space = family.search_space if search_space is None else search_space
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if not space:
        raise ValueError("search space is empty")
    base = family.params(base)
    rng = np.random.default_rng(seed)
    X_tr, y_tr = train
    X_va, y_va = valid
    trials = []
    for k in range(budget):
        hp = {**base, **sample_config(space, rng)}
        try:
            model = family.fit(X_tr, y_tr, hp, seed + k)
            score = stats.auc(model.predict_proba(X_va), y_va)
        except ValueError as exc:
            log.debug("tuning draw %d failed: %s", k, exc)
            score = -math.inf
        trials.append(Trial(hp, score))
    best = max(range(budget), key=lambda k: (trials[k].auc, -k))
    return TuneResult(trials[best].params, tuple(trials))
