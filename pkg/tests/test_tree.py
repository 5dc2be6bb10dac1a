import numpy as np
import pytest

from streamboost.tree import RegressionTree

sklearn_tree = pytest.importorskip("sklearn.tree")


@pytest.mark.parametrize("depth,m", [(1, 1), (3, 1), (5, 2), (8, 3)])
def test_matches_reference_cart(depth, m, rng):
    X = rng.uniform(-1, 1, size=(300, 4))
    Y = np.column_stack([np.sin(3 * X[:, 0]) + X[:, 1] ** 2, X[:, 2] - X[:, 3], X[:, 0] * X[:, 1]])[:, :m]
    ours = RegressionTree(depth).fit(X, Y)
    ref = sklearn_tree.DecisionTreeRegressor(max_depth=depth, random_state=0).fit(X, Y)
    Xt = rng.uniform(-1, 1, size=(500, 4))
    want = ref.predict(Xt).reshape(len(Xt), m)
    # training fit must agree exactly in quality; ties may pick a different split
    train_ours = np.mean((ours.predict(X) - Y) ** 2)
    train_ref = np.mean((ref.predict(X).reshape(-1, m) - Y) ** 2)
    assert train_ours == pytest.approx(train_ref, rel=1e-9, abs=1e-12)
    if depth <= 5:
        assert np.mean(np.isclose(ours.predict(Xt), want).all(axis=1)) > 0.95


def test_depth_zero_is_mean(rng):
    Y = rng.normal(size=(20, 2))
    tree = RegressionTree(0).fit(rng.normal(size=(20, 3)), Y)
    np.testing.assert_allclose(tree.predict_one(np.zeros(3)), Y.mean(axis=0))


def test_min_leaf_respected(rng):
    X = rng.uniform(size=(64, 1))
    tree = RegressionTree(10, min_leaf=8).fit(X, rng.normal(size=(64, 1)))
    leaves = tree.predict(X)[:, 0]
    _, counts = np.unique(leaves, return_counts=True)
    assert counts.min() >= 8


def test_constant_input_no_split():
    tree = RegressionTree(5).fit(np.ones((10, 2)), np.arange(10.0)[:, None])
    assert tree.n_nodes == 1


def test_round_trip_arrays(rng):
    X = rng.normal(size=(50, 3))
    tree = RegressionTree(4).fit(X, rng.normal(size=(50, 1)))
    copy = RegressionTree.from_arrays(*tree.nodes)
    np.testing.assert_array_equal(copy.predict(X), tree.predict(X))
