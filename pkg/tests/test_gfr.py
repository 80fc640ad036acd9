import math

import numpy as np
import pytest

from didbcf.forest import (
    BackfitState,
    Forest,
    ForestConfig,
    NoiseModel,
    SuffStats,
    calibrate_noise_prior,
    draw_leaf_scale,
    draw_leaf_values,
    gfr_sweep,
    grow_tree,
    log_leaf_marginal,
    null_cutpoint_log_weight,
    presort_features,
)
from didbcf.forest.tree import Tree


def small_config(**kw):
    defaults = dict(num_trees=1, alpha=0.95, power=2.0, anchor=1.0,
                    grid_size=100, min_leaf=1, max_depth=10)
    defaults.update(kw)
    return ForestConfig(**defaults)


class TestGrowFromRoot:
    def test_max_depth_forces_leaf(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(50, 2))
        resid = rng.normal(size=50)
        tree, row_leaf = grow_tree(x, resid, small_config(max_depth=0), 1.0,
                                   1.0, rng)
        assert tree.n_leaves == 1
        assert np.all(row_leaf == 0)

    def test_empty_candidates_force_single_leaf(self):
        rng = np.random.default_rng(1)
        x = np.ones((20, 2))  # no variable has a valid cutpoint
        resid = rng.normal(size=20)
        tree, _ = grow_tree(x, resid, small_config(), 1.0, 1.0, rng)
        assert tree.n_leaves == 1

    def test_min_leaf_blocks_small_nodes(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(8, 1))
        resid = rng.normal(size=8)
        tree, _ = grow_tree(x, resid, small_config(min_leaf=5), 1.0, 1.0, rng)
        assert tree.n_leaves == 1  # 8 rows cannot split into two >= 5

    def test_split_frequency_matches_enumeration(self):
        # y = (-1,-1,1,1) split perfectly by one candidate; compare the
        # sampler's empirical split rate with the two enumerated weights
        x = np.array([[0.0], [0.0], [1.0], [1.0]])
        resid = np.array([-1.0, -1.0, 1.0, 1.0])
        sigma2, tau_leaf, alpha, power = 1.0, 1.0, 0.95, 2.0
        config = small_config(alpha=alpha, power=power, max_depth=1)

        log_split = (log_leaf_marginal(SuffStats(2, -2.0), sigma2, tau_leaf)
                     + log_leaf_marginal(SuffStats(2, 2.0), sigma2, tau_leaf))
        log_null = null_cutpoint_log_weight(
            1, 0, alpha, power,
            log_leaf_marginal(SuffStats(4, 0.0), sigma2, tau_leaf))
        p_split = math.exp(log_split) / (math.exp(log_split) + math.exp(log_null))

        rng = np.random.default_rng(3)
        n_trials = 10_000
        splits = 0
        for _ in range(n_trials):
            tree, _ = grow_tree(x, resid, config, sigma2, tau_leaf, rng)
            splits += tree.n_leaves > 1
        se = math.sqrt(p_split * (1 - p_split) / n_trials)
        assert abs(splits / n_trials - p_split) < 3 * se

    def test_rows_partition_into_leaves(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(200, 3))
        resid = rng.normal(size=200)
        tree, row_leaf = grow_tree(x, resid, small_config(min_leaf=5), 0.5,
                                   0.5, rng)
        leaves = set(tree.leaves().tolist())
        assert set(np.unique(row_leaf)) <= leaves
        # routing through the tree reproduces the grown assignment
        np.testing.assert_array_equal(tree.leaf_index(x), row_leaf)

    def test_null_weight_increases_with_depth(self):
        values = [null_cutpoint_log_weight(10, d, 0.95, 2.0, 0.0)
                  for d in range(11)]
        assert all(b > a for a, b in zip(values, values[1:]))


class TestDrawLeafValues:
    def test_empty_leaf_draws_from_prior(self):
        rng = np.random.default_rng(5)
        tree = Tree()
        tree.split(0, 0, 0.5)
        x = np.zeros((10, 1))  # all rows route left; right leaf is empty
        row_leaf = tree.leaf_index(x)
        resid = np.ones(10)
        right = tree.right[0]
        draws = []
        for _ in range(4000):
            draw_leaf_values(tree, row_leaf, resid, 1.0, 2.0, rng)
            draws.append(tree.value[right])
        draws = np.array(draws)
        assert abs(draws.mean()) < 3 * math.sqrt(2.0 / draws.size)
        assert abs(draws.var() - 2.0) < 3 * 2.0 * math.sqrt(2 / draws.size)

    def test_moments_match_closed_form(self):
        rng = np.random.default_rng(6)
        tree = Tree()
        x = np.zeros((4, 1))
        row_leaf = np.zeros(4, dtype=np.int64)
        resid = np.array([2.0, 2.0, 2.0, 2.0])  # n=4, sum=8
        draws = np.array([
            (draw_leaf_values(tree, row_leaf, resid, 1.0, 1.0, rng),
             tree.value[0])[1]
            for _ in range(10_000)])
        mean, var = 8 / 5, 1 / 5
        assert abs(draws.mean() - mean) < 3 * math.sqrt(var / draws.size)
        assert abs(draws.var() - var) < 3 * var * math.sqrt(2 / draws.size)


class TestGfrSweep:
    def test_constant_target_recovered(self):
        rng = np.random.default_rng(7)
        n, c = 400, 5.0
        x = rng.normal(size=(n, 2))
        y = np.full(n, c)
        cfg = small_config(num_trees=5, min_leaf=5)
        forest = Forest.stumps(cfg, 2, leaf_scale=1.0)
        noise = NoiseModel(sigma2=1.0, nu=3.0, lam=0.5)
        state = BackfitState(forest, x)
        for _ in range(3):
            state = gfr_sweep(forest, y, x, noise, rng, state)
        resid = y - state.total
        assert abs(resid.mean()) < 4 * math.sqrt(noise.sigma2 / n)

    def test_step_function_fit(self):
        rng = np.random.default_rng(8)
        n = 500
        x = rng.normal(size=(n, 3))
        y = np.where(x[:, 0] > 0, 2.0, -2.0)
        cfg = ForestConfig(num_trees=20, anchor=2.0 * float(np.std(y)))
        forest = Forest.stumps(cfg, 3, leaf_scale=math.sqrt(float(np.var(y)) / 20))
        noise = calibrate_noise_prior(y, x)
        state = BackfitState(forest, x)
        for _ in range(5):
            state = gfr_sweep(forest, y, x, noise, rng, state)
            forest.leaf_scale = draw_leaf_scale(
                forest.leaf_values(), cfg.leaf_prior, cfg.anchor, rng)
        rmse = float(np.sqrt(np.mean((state.total - y) ** 2)))
        assert rmse < 0.1

    def test_identical_streams_give_identical_forests(self):
        def run():
            rng = np.random.default_rng(9)
            x = np.random.default_rng(1).normal(size=(100, 2))
            y = x[:, 0] ** 2
            cfg = small_config(num_trees=4, min_leaf=5)
            forest = Forest.stumps(cfg, 2, leaf_scale=0.5)
            noise = NoiseModel(sigma2=1.0, nu=3.0, lam=0.5)
            state = BackfitState(forest, x)
            for _ in range(2):
                state = gfr_sweep(forest, y, x, noise, rng, state)
            return state.total, forest.to_dict()

        total1, dict1 = run()
        total2, dict2 = run()
        np.testing.assert_array_equal(total1, total2)
        assert dict1 == dict2


class TestForestPredict:
    def test_single_leaf_constant(self):
        forest = Forest(trees=[Tree()], leaf_scale=1.0)
        forest.trees[0].value[0] = 3.5
        np.testing.assert_allclose(forest.predict(np.zeros((7, 2))), 3.5)

    def test_hand_built_routing(self):
        split_tree = Tree()
        l, r = split_tree.split(0, 0, 0.0)
        split_tree.value[l], split_tree.value[r] = -1.0, 1.0
        const_tree = Tree()
        const_tree.value[0] = 2.0
        forest = Forest(trees=[split_tree, const_tree])
        x = np.array([[-1.0], [1.0]])
        np.testing.assert_allclose(forest.predict(x), [1.0, 3.0])

    def test_empty_forest_predicts_zero(self):
        forest = Forest(trees=[])
        np.testing.assert_array_equal(forest.predict(np.ones((4, 3))),
                                      np.zeros(4))

    def test_dimension_mismatch_rejected(self):
        forest = Forest(trees=[Tree()], n_features=3)
        with pytest.raises(ValueError):
            forest.predict(np.ones((4, 2)))

    def test_json_round_trip(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(50, 2))
        cfg = small_config(num_trees=3, min_leaf=2)
        forest = Forest.stumps(cfg, 2, leaf_scale=0.7)
        noise = NoiseModel(sigma2=1.0, nu=3.0, lam=0.5)
        state = BackfitState(forest, x)
        gfr_sweep(forest, x[:, 0], x, noise, rng, state)
        again = Forest.from_dict(forest.to_dict())
        np.testing.assert_allclose(again.predict(x), forest.predict(x))


class TestPresort:
    def test_columns_sorted(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(30, 4))
        order = presort_features(x)
        for j in range(4):
            assert np.all(np.diff(x[order[:, j], j]) >= 0)
