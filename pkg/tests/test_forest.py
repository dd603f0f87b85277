import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from macrocast.errors import DimensionMismatch, TooFewRows
from macrocast.forest import (
    Forest,
    ForestConfig,
    RegressionTree,
    fit_forest,
    fit_tree_for,
    predict_forest,
)


def leaf(value):
    one = lambda v, t=np.int64: np.array([v], dtype=t)  # noqa: E731
    return RegressionTree(one(-1), one(0.0, float), one(-1), one(-1), one(value, float), one(1))


def test_constant_target():
    X = np.random.default_rng(0).normal(size=(40, 6))
    forest = fit_forest(X, np.full(40, 3.5), ForestConfig(n_trees=20))
    assert all(t.n_leaves == 1 for t in forest.trees)
    assert np.array_equal(forest.predict(np.random.default_rng(1).normal(size=(7, 6))), np.full(7, 3.5))


def test_fully_grown_tree_memorizes():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 6))
    y = rng.normal(size=60)
    forest = fit_forest(X, y, ForestConfig(n_trees=1, bootstrap=False, min_node_size=1))
    assert np.array_equal(forest.predict(X), y)


def test_step_function():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(200, 6))
    med = np.median(X[:, 0])
    y = np.where(X[:, 0] > med, 10.0, 0.0)
    forest = fit_forest(X, y, ForestConfig(n_trees=100, seed=1))
    X_test = rng.uniform(size=(400, 6))
    y_test = np.where(X_test[:, 0] > med, 10.0, 0.0)
    assert np.sqrt(np.mean((forest.predict(X_test) - y_test) ** 2)) < 1.0


def test_averaging_hand_built_trees():
    assert predict_forest(Forest([leaf(4.0)] * 3, ForestConfig(), 6), np.zeros((2, 6))).tolist() == [4.0, 4.0]
    assert predict_forest(Forest([leaf(2.0), leaf(6.0)], ForestConfig(), 6), np.zeros((1, 6))).tolist() == [4.0]


def test_split_tie_breaks_to_lowest_feature():
    # columns 0 and 1 separate y equally well
    X = np.array([[0.0, 0.0, 5.0], [0.0, 0.0, 1.0], [1.0, 1.0, 3.0], [1.0, 1.0, 2.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    forest = fit_forest(X, y, ForestConfig(n_trees=5, mtry=3, bootstrap=False, min_node_size=1))
    for tree in forest.trees:
        assert tree.feature[0] == 0 and tree.threshold[0] == 0.5


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.integers(0, 1000))
def test_predictions_inside_training_range(n, seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(n, 6)), rng.normal(size=n) * 100
    forest = fit_forest(X, y, ForestConfig(n_trees=15, seed=seed))
    pred = forest.predict(rng.normal(size=(30, 6)) * 3)
    assert np.all(pred >= y.min() - 1e-9) and np.all(pred <= y.max() + 1e-9)


def test_tree_order_does_not_matter():
    rng = np.random.default_rng(4)
    X, y = rng.normal(size=(50, 6)), rng.normal(size=50)
    config = ForestConfig(n_trees=30, seed=11)
    forward = fit_forest(X, y, config)
    backward = [fit_tree_for(X, y, config, b) for b in reversed(range(30))][::-1]
    X_new = rng.normal(size=(10, 6))
    assert np.array_equal(forward.predict(X_new), Forest(backward, config, 6).predict(X_new))
    assert np.array_equal(forward.predict(X_new), fit_forest(X, y, config).predict(X_new))


def test_deeper_trees_fit_training_data_better():
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(200, 6))
    y = X[:, 0]
    rmses = []
    for size in (50, 20, 5, 1):
        forest = fit_forest(X, y, ForestConfig(n_trees=50, mtry=6, min_node_size=size, seed=3))
        rmses.append(np.sqrt(np.mean((forest.predict(X) - y) ** 2)))
    assert all(b < a for a, b in zip(rmses, rmses[1:]))


def test_guards():
    X = np.zeros((5, 6))
    with pytest.raises(TooFewRows):
        fit_forest(X[:1], np.zeros(1))
    with pytest.raises(DimensionMismatch):
        fit_forest(X, np.zeros(4))
    with pytest.raises(ValueError):
        fit_forest(X, np.arange(5.0), ForestConfig(mtry=7))
    forest = fit_forest(X, np.arange(5.0), ForestConfig(n_trees=2))
    with pytest.raises(DimensionMismatch):
        forest.predict(np.zeros((1, 3)))
