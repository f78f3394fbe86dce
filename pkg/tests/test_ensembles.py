import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aiopsmaint import ensembles as E
from aiopsmaint import stats
from aiopsmaint.learners import ConstantModel, HoeffdingTree, fit_cart


class FixedModel:
    """Returns pre-set scores regardless of input rows."""

    def __init__(self, scores, n_features=1):
        self.scores = np.asarray(scores, dtype=float)
        self.n_features = n_features

    def predict_proba(self, X):
        return self.scores[: len(X)]


def cart_fit(X, y, seed):
    return fit_cart(X, y)


def labelled(n=200, seed=0, flip=False):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = (X[:, 0] > 0).astype(np.int8)
    return X, (1 - y if flip else y)


# ---------------------------------------------------------------------------
# AWE weight law

def test_weight_law_constants():
    assert E.MSE_RANDOM == 0.25
    X = np.zeros((4, 1))
    y = np.array([0, 1, 0, 1])
    assert E.awe_weight(stats.mse(ConstantModel(1, 0.5).predict_proba(X), y)) == 0.0
    assert E.awe_weight(stats.mse(FixedModel([0, 1, 0, 1]).predict_proba(X), y)) == 0.25


def test_select_prunes_nonpositive_weights():
    members = [E.Member(None, 1, weight=0.0), E.Member(None, 2, weight=0.25 - 0.4),
               E.Member(None, 3, weight=0.1), E.Member(None, 4, weight=0.2)]
    kept, dropped = E._select(members, capacity=5)
    assert [m.created for m in kept] == [3, 4]
    assert sorted(m.created for m in dropped) == [1, 2]


def test_select_keeps_heaviest_and_newer_on_ties():
    members = [E.Member(None, k, weight=w) for k, w in [(1, 0.1), (2, 0.2), (3, 0.1), (4, 0.05)]]
    kept, _ = E._select(members, capacity=2)
    assert [m.created for m in kept] == [2, 3]


def test_weighted_predict_example():
    state = E.EnsembleState("awe", 3, [E.Member(FixedModel([1.0]), 1, weight=0.2),
                                       E.Member(FixedModel([0.0]), 2, weight=0.05)])
    assert E.weighted_predict(state, np.zeros((1, 1)))[0] == pytest.approx(0.8)


def test_weighted_predict_errors():
    with pytest.raises(E.EmptyEnsemble):
        E.weighted_predict(E.EnsembleState("awe", 2), np.zeros((1, 1)))
    zero = E.EnsembleState("awe", 2, [E.Member(FixedModel([1.0]), 1, weight=0.0)])
    with pytest.raises(E.ZeroTotalWeight):
        E.weighted_predict(zero, np.zeros((1, 1)))


def test_awe_update_drops_bad_members_and_adds_candidate():
    X, y = labelled(300, seed=1)
    good = E.Member(FixedModel((X[:, 0] > 0).astype(float)), 1)
    inverted = E.Member(FixedModel((X[:, 0] <= 0).astype(float)), 2)
    coin = E.Member(ConstantModel(2, 0.5), 3)
    state = E.EnsembleState("awe", 3, [good, inverted, coin])
    new = E.awe_on_new_period(state, X, y, cart_fit, seed=0, period_index=4)
    assert [m.created for m in new.members] == [1, 4]
    assert new.members[0].weight == pytest.approx(0.25)
    assert sorted(new.last_update["dropped"]) == [2, 3]
    assert state.members[0].weight == 0.0  # input state untouched


def test_awe_skips_single_class_period():
    X, _ = labelled(50)
    state = E.EnsembleState("awe", 2)
    new = E.awe_on_new_period(state, X, np.zeros(50, np.int8), cart_fit, period_index=3)
    assert new.members == [] and "skipped" in new.last_update


def test_stratified_folds_balanced():
    y = np.r_[np.ones(23), np.zeros(77)].astype(int)
    fold = E.stratified_folds(y, 10, seed=3)
    per_fold_pos = [int(y[fold == f].sum()) for f in range(10)]
    assert max(per_fold_pos) - min(per_fold_pos) <= 1
    sizes = np.bincount(fold, minlength=10)
    assert sizes.max() - sizes.min() <= 1


def test_cv_mse_matches_manual_loop():
    X, y = labelled(120, seed=2)
    fold = E.stratified_folds(y, E.CV_FOLDS, 5)
    pred = np.empty(len(y))
    for f in range(E.CV_FOLDS):
        test = fold == f
        pred[test] = fit_cart(X[~test], y[~test]).predict_proba(X[test])
    assert E.cv_mse(cart_fit, X, y, E.CV_FOLDS, 5) == pytest.approx(stats.mse(pred, y))


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8), st.integers(1, 5))
@settings(max_examples=60)
def test_select_invariants(weights, capacity):
    members = [E.Member(None, k, weight=w - 0.5) for k, w in enumerate(weights)]
    kept, dropped = E._select(members, capacity)
    assert len(kept) <= capacity
    assert all(m.weight > 0 for m in kept)
    assert len(kept) + len(dropped) == len(members)
    assert [m.created for m in kept] == sorted(m.created for m in kept)
    if kept and dropped:
        assert min(m.weight for m in kept) >= max(m.weight for m in dropped)


# ---------------------------------------------------------------------------
# SEA

def test_sea_candidate_lifecycle():
    state = E.EnsembleState("sea", 2)
    for k, seed in enumerate([1, 2, 3], start=1):
        X, y = labelled(200, seed=seed)
        state = E.sea_on_new_period(state, X, y, cart_fit, period_index=k)
    # period 1's candidate joins at period 2, period 2's at period 3
    assert [m.created for m in state.members] == [1, 2]
    assert state.pending.created == 3


def test_sea_replaces_weakest_only_if_better():
    X, y = labelled(200, seed=4)
    perfect = FixedModel((X[:, 0] > 0).astype(float), 2)
    wrong = FixedModel((X[:, 0] <= 0).astype(float), 2)
    state = E.EnsembleState("sea", 2, [E.Member(perfect, 1), E.Member(wrong, 2)],
                            pending=E.Member(perfect, 3))
    new = E.sea_on_new_period(state, X, y, cart_fit, period_index=4)
    assert [m.created for m in new.members] == [1, 3]
    state = E.EnsembleState("sea", 2, [E.Member(perfect, 1), E.Member(perfect, 2)],
                            pending=E.Member(wrong, 3))
    new = E.sea_on_new_period(state, X, y, cart_fit, period_index=4)
    assert [m.created for m in new.members] == [1, 2]
    assert new.last_update["action"] == "candidate rejected"


def test_sea_majority_vote():
    members = [E.Member(FixedModel([0.9, 0.1]), 1), E.Member(FixedModel([0.6, 0.4]), 2),
               E.Member(FixedModel([0.2, 0.7]), 3)]
    state = E.EnsembleState("sea", 3, members)
    assert E.sea_predict(state, np.zeros((2, 1))).tolist() == pytest.approx([2 / 3, 1 / 3])


# ---------------------------------------------------------------------------
# AUE

def test_aue_capacity_and_incremental_updates():
    fit = E.new_tree_factory(2, {"grace_period": 50})
    state = E.EnsembleState("aue", 3)
    for k in range(1, 8):
        X, y = labelled(300, seed=k)
        state = E.aue_on_new_period(state, X, y, fit, period_index=k)
        assert state.size <= 3
    oldest = state.members[0]
    seen_before = oldest.model.n_seen
    X, y = labelled(300, seed=99)
    state = E.aue_on_new_period(state, X, y, fit, period_index=8)
    assert any(m is oldest for m in state.members)
    assert oldest.model.n_seen == seen_before + 300
    assert all(isinstance(m.model, HoeffdingTree) for m in state.members)


def test_aue_prediction_is_awe_rule():
    scores = [np.array([0.2, 0.9, 0.5]), np.array([0.6, 0.1, 0.5])]
    weights = [0.15, 0.05]
    members = [E.Member(FixedModel(s), k, weight=w) for k, (s, w) in enumerate(zip(scores, weights))]
    aue = E.EnsembleState("aue", 2, members)
    awe = E.EnsembleState("awe", 2, members)
    expected = (0.15 * scores[0] + 0.05 * scores[1]) / 0.2
    assert np.allclose(E.aue_predict(aue, np.zeros((3, 1))), expected)
    assert np.allclose(E.predict(aue, np.zeros((3, 1))), E.predict(awe, np.zeros((3, 1))))


def test_state_validation():
    with pytest.raises(E.EnsembleError):
        E.EnsembleState("dwm", 2)
    with pytest.raises(E.EnsembleError):
        E.EnsembleState("awe", 0)
