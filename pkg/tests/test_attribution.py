import numpy as np
import pytest

from kscale.attribution import (forest_base_value, shapley_exact,
                                shapley_fast, shapley_fast_matrix, summarize,
                                tree_base_value, tree_expectation)
from kscale.errors import CapabilityError
from kscale.forest import ForestModel, Hyperparams, Tree, fit_forest

from helpers import path_product_expectation, permutation_shapley


def manual_tree(feature, threshold, left, right, value, cover):
    return Tree(np.asarray(feature, dtype=np.int32),
                np.asarray(threshold, dtype=np.float64),
                np.asarray(left, dtype=np.int32),
                np.asarray(right, dtype=np.int32),
                np.asarray(value, dtype=np.float64),
                np.asarray(cover, dtype=np.int64))


def single_split_tree(feature=0, thr=0.0, left_val=2.0, right_val=4.0,
                      left_cover=5, right_cover=5):
    return manual_tree([feature, -1, -1], [thr, 0.0, 0.0], [1, -1, -1],
                       [2, -1, -1], [0.0, left_val, right_val],
                       [left_cover + right_cover, left_cover, right_cover])


def wrap(trees, p, names=None):
    names = tuple(names or (f"f{i}" for i in range(p)))
    return ForestModel(tuple(trees), Hyperparams(n_trees=len(trees)), 0.0, names)


def random_forest_model(rng, n=80, p=3, trees=5, depth=3):
    X = rng.normal(size=(n, p))
    y = X @ rng.normal(size=p) + rng.normal(size=n) * 0.3
    return fit_forest(X, y, Hyperparams(n_trees=trees, max_depth=depth, min_leaf=2,
                                        seed=int(rng.integers(2**31)))), X


class TestTreeExpectation:
    def test_all_features_known_is_prediction(self):
        model, X = random_forest_model(np.random.default_rng(0))
        tree = model.trees[0]
        x = X[3]
        expected = float(tree.predict_matrix(x.reshape(1, -1))[0])
        assert tree_expectation(tree, x, [0, 1, 2]) == pytest.approx(expected,
                                                                     abs=1e-12)

    def test_empty_set_equal_covers(self):
        tree = single_split_tree(left_val=2.0, right_val=4.0)
        assert tree_expectation(tree, np.zeros(1), []) == 3.0

    def test_empty_set_is_cover_weighted_leaf_mean(self):
        model, X = random_forest_model(np.random.default_rng(1))
        tree = model.trees[0]
        got = tree_expectation(tree, X[0], [])
        leaves = tree.feature < 0
        oracle = float(np.sum(tree.value[leaves] * tree.cover[leaves])
                       / tree.cover[0])
        assert got == pytest.approx(oracle, rel=1e-12)
        assert tree_base_value(tree) == pytest.approx(oracle, rel=1e-12)

    def test_zero_cover_is_integrity_error(self):
        from kscale.errors import DomainError
        broken = single_split_tree(left_cover=0, right_cover=0)
        with pytest.raises(DomainError):
            tree_expectation(broken, np.zeros(1), [])

    def test_matches_path_product_form(self):
        rng = np.random.default_rng(2)
        model, X = random_forest_model(rng, p=4, depth=4)
        tree = model.trees[1]
        for known in ([], [0], [1, 3], [0, 1, 2, 3]):
            for i in (0, 5, 9):
                a = tree_expectation(tree, X[i], known)
                b = path_product_expectation(tree, X[i], known)
                assert a == pytest.approx(b, rel=1e-10)


class TestShapleyExact:
    def test_single_feature_model(self):
        tree = single_split_tree(feature=1, thr=0.5)
        model = wrap([tree], p=3)
        x = np.array([9.0, 0.2, -4.0])
        att = shapley_exact(model, x)
        assert att.phi[0] == 0.0 and att.phi[2] == 0.0
        assert att.phi[1] == pytest.approx(att.prediction - att.base_value, abs=1e-12)

    def test_symmetric_features_get_equal_credit(self):
        # split on f0 then identical sub-splits on f1, all covers equal
        tree = manual_tree(
            feature=[0, 1, 1, -1, -1, -1, -1],
            threshold=[0.0, 0.0, 0.0, 0, 0, 0, 0],
            left=[1, 3, 5, -1, -1, -1, -1],
            right=[2, 4, 6, -1, -1, -1, -1],
            value=[0, 0, 0, 1.0, 2.0, 2.0, 3.0],
            cover=[8, 4, 4, 2, 2, 2, 2])
        model = wrap([tree], p=2)
        att = shapley_exact(model, np.array([-1.0, -1.0]))
        assert att.phi[0] == pytest.approx(att.phi[1], abs=1e-12)

    def test_dummy_feature_is_zero(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 3))
        X[:, 2] = 7.0  # constant feature can never be split on
        y = X[:, 0] + 2 * X[:, 1] + rng.normal(size=60) * 0.1
        model = fit_forest(X, y, Hyperparams(n_trees=6, seed=4))
        for i in range(5):
            att = shapley_exact(model, X[i])
            assert att.phi[2] == 0.0

    def test_matches_permutation_oracle(self):
        rng = np.random.default_rng(5)
        for trial in range(6):
            model, X = random_forest_model(rng, p=3, trees=4, depth=3)
            for i in range(4):
                att = shapley_exact(model, X[i])
                oracle_phi, oracle_base = permutation_shapley(model, X[i])
                np.testing.assert_allclose(att.phi, oracle_phi, atol=1e-9)
                assert att.base_value == pytest.approx(oracle_base, abs=1e-9)

    def test_local_accuracy(self):
        rng = np.random.default_rng(6)
        model, X = random_forest_model(rng, p=4, trees=6, depth=4)
        for i in range(8):
            att = shapley_exact(model, X[i])
            assert abs(att.base_value + att.phi.sum() - att.prediction) <= 1e-9

    def test_additivity_across_trees(self):
        rng = np.random.default_rng(7)
        model, X = random_forest_model(rng, p=3, trees=5)
        x = X[2]
        att = shapley_exact(model, x)
        per_tree = [shapley_exact(wrap([t], 3, model.feature_names), x)
                    for t in model.trees]
        mean_phi = np.mean([a.phi for a in per_tree], axis=0)
        np.testing.assert_allclose(att.phi, mean_phi, atol=1e-10)

    def test_feature_guard(self):
        p = 21
        leaf = manual_tree([-1], [0.0], [-1], [-1], [5.0], [10])
        model = wrap([leaf], p=p)
        with pytest.raises(CapabilityError):
            shapley_exact(model, np.zeros(p))


class TestShapleyFast:
    def test_matches_enumeration(self):
        rng = np.random.default_rng(8)
        for trial in range(6):
            p = int(rng.integers(2, 7))
            model, X = random_forest_model(rng, n=120, p=p, trees=8,
                                           depth=int(rng.integers(2, 6)))
            for i in range(3):
                exact = shapley_exact(model, X[i])
                fast = shapley_fast(model, X[i])
                np.testing.assert_allclose(fast.phi, exact.phi, atol=1e-9)
                assert fast.base_value == pytest.approx(exact.base_value, abs=1e-9)

    def test_matrix_form_matches_pointwise(self):
        rng = np.random.default_rng(9)
        model, X = random_forest_model(rng, p=4, trees=6)
        mat = shapley_fast_matrix(model, X[:6])
        for i in range(6):
            np.testing.assert_allclose(mat[i], shapley_fast(model, X[i]).phi,
                                       atol=1e-12)

    def test_local_accuracy_at_scale(self):
        rng = np.random.default_rng(10)
        model, X = random_forest_model(rng, n=300, p=6, trees=25, depth=8)
        phi = shapley_fast_matrix(model, X[:40])
        base = forest_base_value(model)
        preds = model.predict_matrix(X[:40])
        np.testing.assert_allclose(base + phi.sum(axis=1), preds, atol=1e-9)


class TestSummarize:
    def test_single_row_equals_abs_phi(self):
        rng = np.random.default_rng(11)
        model, X = random_forest_model(rng, p=3)
        att = shapley_fast(model, X[0])
        ranking = summarize(model, X[:1])
        by_name = dict(zip(ranking.features, ranking.mean_abs_phi))
        for j, name in enumerate(model.feature_names):
            assert by_name[name] == pytest.approx(abs(att.phi[j]), abs=1e-12)

    def test_dominant_feature_ranks_first(self):
        rng = np.random.default_rng(12)
        n = 400
        X = rng.normal(size=(n, 2)) * np.array([1.0, 10.0])
        y = 5.0 * X[:, 0] + 0.1 * X[:, 1]
        model = fit_forest(X, y, Hyperparams(n_trees=30, seed=13),
                           feature_names=("gdp", "population"))
        ranking = summarize(model, X[:100])
        assert ranking.features[0] == "gdp"

    def test_constant_model_all_zero(self):
        X = np.random.default_rng(14).normal(size=(30, 3))
        model = fit_forest(X, np.full(30, 2.0), Hyperparams(n_trees=3, seed=0))
        ranking = summarize(model, X)
        assert np.all(ranking.mean_abs_phi == 0.0)
        # zero ties broken by name
        assert list(ranking.features) == sorted(ranking.features)

    def test_methods_agree(self):
        rng = np.random.default_rng(15)
        model, X = random_forest_model(rng, p=3, trees=4)
        fast = summarize(model, X[:10], method="fast")
        enum = summarize(model, X[:10], method="enumeration")
        assert fast.features == enum.features
        np.testing.assert_allclose(fast.mean_abs_phi, enum.mean_abs_phi, atol=1e-9)

    def test_empty_dataset(self):
        rng = np.random.default_rng(16)
        model, X = random_forest_model(rng)
        with pytest.raises(ValueError):
            summarize(model, X[:0])
