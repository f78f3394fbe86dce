import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aiopsmaint import learners as L
from aiopsmaint import stats
from aiopsmaint.learners.cart import _best_split


def linear_data(n=600, d=4, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0.3).astype(np.int8)
    flip = rng.random(n) < noise
    return X, np.where(flip, 1 - y, y).astype(np.int8)


def gini_of_split(x, y, thr):
    def g(v):
        if v.size == 0:
            return 0.0
        p = v.mean()
        return 2 * p * (1 - p)
    left, right = y[x <= thr], y[x > thr]
    return (left.size * g(left) + right.size * g(right)) / y.size


# ---------------------------------------------------------------------------
# CART

def test_best_split_matches_exhaustive_search():
    rng = np.random.default_rng(4)
    for _ in range(40):
        X = np.round(rng.normal(size=(30, 3)), 1)
        y = (rng.random(30) < 0.4).astype(np.int8)
        f, thr, gini = _best_split(X, y, np.arange(3))
        best = min(gini_of_split(X[:, j], y, t) for j in range(3) for t in np.unique(X[:, j])[:-1])
        assert gini == pytest.approx(best, abs=1e-12)
        assert gini_of_split(X[:, f], y, thr) == pytest.approx(gini, abs=1e-12)


def test_cart_learns_xor():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([0, 1, 1, 0])
    model = L.fit_cart(np.repeat(X, 5, axis=0), np.repeat(y, 5), {"min_samples_split": 2})
    assert list(model.predict_proba(X)) == [0.0, 1.0, 1.0, 0.0]


def test_cart_leaf_is_raw_fraction_and_respects_depth():
    X = np.array([[0.0], [0.0], [0.0], [1.0]])
    y = np.array([1, 0, 0, 1])
    stump = L.fit_cart(X, y, {"max_depth": 0})
    assert stump.n_nodes == 1
    assert stump.predict_proba(X)[0] == 0.5
    tree = L.fit_cart(X, y, {"min_samples_split": 2})
    assert tree.predict_proba(np.array([[0.0]]))[0] == pytest.approx(1 / 3)
    X2, y2 = linear_data(500)
    assert L.fit_cart(X2, y2, {"max_depth": 3}).depth <= 3


def test_cart_min_samples_split():
    X, y = linear_data(50)
    assert L.fit_cart(X, y, {"min_samples_split": 51}).n_nodes == 1


def test_cart_generalises_on_linear_concept():
    X, y = linear_data(2000, seed=1)
    Xt, yt = linear_data(1000, seed=2)
    model = L.fit_cart(X, y)
    assert stats.auc(model.predict_proba(Xt), yt) > 0.9


def test_cart_feature_count_checked():
    model = L.fit_cart(*linear_data(100))
    with pytest.raises(L.FeatureCountMismatch):
        model.predict_proba(np.zeros((2, 3)))


@given(st.integers(5, 60), st.integers(1, 4), st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_cart_scores_are_training_fractions(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 3, size=(n, d)).astype(float)
    y = rng.integers(0, 2, size=n)
    model = L.fit_cart(X, y, {"min_samples_split": 2})
    leaf = model.apply(X)
    for node in np.unique(leaf):
        assert model.value[node] == pytest.approx(y[leaf == node].mean())


# ---------------------------------------------------------------------------
# random forest

def test_forest_with_one_full_tree_equals_cart():
    X, y = linear_data(300, seed=5)
    forest = L.fit_random_forest(X, y, {"n_trees": 1, "bootstrap": False,
                                        "feature_subsample": None}, seed=3)
    cart = L.fit_cart(X, y)
    assert np.array_equal(forest.predict_proba(X), cart.predict_proba(X))


def test_forest_deterministic_per_seed_and_accurate():
    X, y = linear_data(1500, seed=6)
    Xt, yt = linear_data(800, seed=7)
    a = L.fit_random_forest(X, y, {"n_trees": 10}, seed=1)
    b = L.fit_random_forest(X, y, {"n_trees": 10}, seed=1)
    c = L.fit_random_forest(X, y, {"n_trees": 10}, seed=2)
    assert np.array_equal(a.predict_proba(Xt), b.predict_proba(Xt))
    assert not np.array_equal(a.predict_proba(Xt), c.predict_proba(Xt))
    assert stats.auc(a.predict_proba(Xt), yt) > 0.93


# ---------------------------------------------------------------------------
# logistic regression

def test_logistic_fits_linear_concept():
    X, y = linear_data(1000, seed=8)
    Xt, yt = linear_data(500, seed=9)
    model = L.fit_logistic(X, y)
    assert stats.auc(model.predict_proba(Xt), yt) > 0.97
    assert np.all((model.predict_proba(Xt) > 0) & (model.predict_proba(Xt) < 1))


def test_logistic_constant_feature_and_single_class():
    X, y = linear_data(200)
    X[:, 2] = 7.0
    model = L.fit_logistic(X, y)
    assert np.isfinite(model.predict_proba(X)).all()
    with pytest.raises(L.SingleClassData):
        L.fit_logistic(X, np.zeros(200, np.int8))


# ---------------------------------------------------------------------------
# Hoeffding tree

def test_hoeffding_bound_formula():
    for conf, n in [(1e-7, 200), (0.05, 10), (1e-3, 5000)]:
        assert L.hoeffding_bound(1.0, conf, n) == pytest.approx(math.sqrt(math.log(1 / conf) / (2 * n)))
    assert L.hoeffding_bound(2.0, 1e-7, 200) == pytest.approx(2 * L.hoeffding_bound(1.0, 1e-7, 200))


def test_hoeffding_untrained_scores_half_and_learns_threshold():
    tree = L.HoeffdingTree.from_params(2)
    assert tree.predict_proba(np.zeros((3, 2))).tolist() == [0.5, 0.5, 0.5]
    rng = np.random.default_rng(0)
    for _ in range(3000):
        x = rng.normal(size=2)
        tree.learn_one(x, int(x[0] > 0))
    assert tree.n_splits >= 1
    Xt = rng.normal(size=(500, 2))
    assert stats.auc(tree.predict_proba(Xt), (Xt[:, 0] > 0).astype(int)) > 0.95


def test_hoeffding_waits_for_grace_period():
    tree = L.HoeffdingTree(1, grace_period=100)
    for k in range(99):
        tree.learn_one([float(k % 2)], k % 2)
    assert tree.n_splits == 0
    assert tree.n_seen == 99


def test_hoeffding_no_split_on_pure_noise():
    rng = np.random.default_rng(1)
    tree = L.HoeffdingTree.from_params(3, {"tie_threshold": 0.0})
    for _ in range(2000):
        tree.learn_one(rng.normal(size=3), int(rng.random() < 0.5))
    assert tree.n_splits == 0


def test_fit_hoeffding_matches_learn_one_loop():
    X, y = linear_data(800, d=2, seed=3)
    a = L.fit_hoeffding(X, y, {"grace_period": 50})
    b = L.HoeffdingTree.from_params(2, {"grace_period": 50})
    for xi, yi in zip(X, y):
        L.ht_learn_one(b, xi, yi)
    assert np.array_equal(a.predict_proba(X), b.predict_proba(X))


# ---------------------------------------------------------------------------
# registry and search spaces

def test_registry():
    assert set(L.LEARNERS) >= {"lr", "cart", "rf", "ht"}
    assert L.get_learner("ht").online
    with pytest.raises(L.LearnerError):
        L.get_learner("svm")
    with pytest.raises(L.LearnerError):
        L.get_learner("cart").params({"depth": 3})
    assert L.get_learner("cart").params({"max_depth": 3})["max_depth"] == 3


def test_space_from_dict_and_sampling():
    space = L.space_from_dict({
        "a": {"type": "uniform", "low": 0.0, "high": 1.0},
        "b": {"type": "log_uniform", "low": 1e-4, "high": 1e-1},
        "c": {"type": "int", "low": 2, "high": 5},
        "d": {"type": "choice", "values": ["x", "y"]},
    })
    rng = np.random.default_rng(0)
    for _ in range(200):
        cfg = L.base.sample_config(space, rng)
        assert all(space[k].contains(v) for k, v in cfg.items())
    assert L.base.space_size({"c": space["c"], "d": space["d"]}) == 8
    assert L.base.space_size(space) is None


def test_random_search_picks_best_and_is_deterministic():
    X, y = linear_data(600, seed=10)
    Xv, yv = linear_data(300, seed=11)
    fam = L.get_learner("cart")
    res = L.tune_random_search(fam, None, 6, (X, y), (Xv, yv), seed=4)
    assert len(res.trials) == 6
    assert res.best_auc == max(t.auc for t in res.trials)
    best = next(t for t in res.trials if t.auc == res.best_auc)
    assert res.params == best.params
    again = L.tune_random_search(fam, None, 6, (X, y), (Xv, yv), seed=4)
    assert again.params == res.params


def test_random_search_single_point_space():
    space = {"max_depth": L.IntRange(1, 1)}
    X, y = linear_data(200)
    res = L.tune_random_search(L.get_learner("cart"), space, 3, (X, y), (X, y))
    assert res.params["max_depth"] == 1
    assert len({t.auc for t in res.trials}) == 1
