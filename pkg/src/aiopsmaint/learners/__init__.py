"""Base learners behind one fit/score contract.

A new learner family (for example a neural network) only needs a fit
function ``fit(X, y, hp, seed) -> Model`` and an entry in :data:`LEARNERS`.
"""
from .base import (
    Choice,
    ConstantModel,
    FeatureCountMismatch,
    HyperParams,
    IntRange,
    LearnerError,
    LearnerFamily,
    LogUniform,
    Model,
    OnlineModel,
    SingleClassData,
    Uniform,
    score_one,
    space_from_dict,
)
from .cart import CART_DEFAULTS, CART_SPACE, TreeModel, fit_cart, grow_tree
from .forest import RF_DEFAULTS, RF_SPACE, ForestModel, fit_random_forest
from .hoeffding import (
    HT_DEFAULTS,
    HT_SPACE,
    HoeffdingTree,
    fit_hoeffding,
    hoeffding_bound,
    ht_learn_one,
)
from .logistic import LR_DEFAULTS, LR_SPACE, LogisticModel, fit_logistic
from .tuning import Trial, TuneResult, tune_random_search

LEARNERS: dict[str, LearnerFamily] = {
    "lr": LearnerFamily("lr", fit_logistic, LR_DEFAULTS, LR_SPACE),
    "cart": LearnerFamily("cart", fit_cart, CART_DEFAULTS, CART_SPACE),
    "rf": LearnerFamily("rf", fit_random_forest, RF_DEFAULTS, RF_SPACE),
    "ht": LearnerFamily("ht", fit_hoeffding, HT_DEFAULTS, HT_SPACE, online=True),
}


def get_learner(name: str) -> LearnerFamily:
    try:
        return LEARNERS[name]
    except KeyError:
        raise LearnerError(f"unknown learner {name!r}; known: {sorted(LEARNERS)}") from None


def register_learner(family: LearnerFamily) -> None:
    LEARNERS[family.name] = family
