import math

import numpy as np

from didbcf.forest import (
    ForestConfig,
    SuffStats,
    grow_prune_log_ratio,
    log_leaf_marginal,
    mh_tree_update,
)
from didbcf.forest.tree import Tree


def config(**kw):
    defaults = dict(num_trees=1, alpha=0.95, power=2.0, anchor=1.0,
                    grid_size=100, min_leaf=1, max_depth=10)
    defaults.update(kw)
    return ForestConfig(**defaults)


class TestRatioIdentities:
    def test_identical_structures_give_unit_ratio(self):
        # a proposal whose children reproduce the parent's likelihood exactly
        # and whose prior terms cancel has log ratio 0 by the identity
        cfg = config()
        log_m = 0.7
        forward = grow_prune_log_ratio(log_m, 0.3, 0.4, 2, 5, cfg)
        backward = -grow_prune_log_ratio(log_m, 0.3, 0.4, 2, 5, cfg)
        assert forward + backward == 0.0

    def test_single_leaf_always_proposes_grow(self):
        rng = np.random.default_rng(0)
        x = np.array([[0.0], [1.0], [0.0], [1.0]])
        resid = np.array([-5.0, 5.0, -5.0, 5.0])
        cfg = config()
        grew = 0
        for _ in range(50):
            tree = Tree()
            row_leaf = np.zeros(4, dtype=np.int64)
            # strong signal, tiny noise: a grow proposal is always made and
            # essentially always accepted from a stump
            if mh_tree_update(tree, row_leaf, x, resid, cfg, 1e-4, 10.0, rng):
                grew += tree.n_leaves == 2
        assert grew == 50


class TestStationaryDistribution:
    def test_two_structure_chain_matches_brute_force(self):
        # n=8, one binary feature: reachable structures are the stump and the
        # single root split. Brute-force posterior odds from the enumerated
        # marginal likelihoods and tree prior (split-rule prior 1/|C| = 1).
        rng = np.random.default_rng(1)
        x = np.repeat([[0.0], [1.0]], 4, axis=0)
        resid = np.array([1.2, 0.8, 1.0, 1.1, -0.2, 0.1, -0.4, 0.3])
        sigma2, tau_leaf = 0.5, 1.0
        cfg = config(alpha=0.6, power=1.5)

        s_all = SuffStats.from_residuals(resid)
        s_left = SuffStats.from_residuals(resid[:4])
        s_right = SuffStats.from_residuals(resid[4:])
        p0 = 0.6  # alpha * (1+0)^-power
        p1 = 0.6 * 2 ** -1.5
        log_post_stump = math.log(1 - p0) + log_leaf_marginal(s_all, sigma2,
                                                              tau_leaf)
        log_post_split = (math.log(p0) + 2 * math.log(1 - p1)
                          + log_leaf_marginal(s_left, sigma2, tau_leaf)
                          + log_leaf_marginal(s_right, sigma2, tau_leaf))
        odds = math.exp(log_post_split - log_post_stump)
        p_split = odds / (1 + odds)

        tree = Tree()
        row_leaf = np.zeros(8, dtype=np.int64)
        n_iter = 30_000
        in_split = 0
        for _ in range(n_iter):
            mh_tree_update(tree, row_leaf, x, resid, cfg, sigma2, tau_leaf, rng)
            in_split += tree.n_leaves == 2
        freq = in_split / n_iter
        # the chain is autocorrelated; allow 3 standard errors with an
        # effective sample size well below n_iter
        ess = n_iter / 10
        se = math.sqrt(p_split * (1 - p_split) / ess)
        assert abs(freq - p_split) < 3 * se, (freq, p_split)


class TestStructuralInvariants:
    def test_row_leaf_tracks_tree(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(100, 3))
        resid = np.sign(x[:, 0]) + rng.normal(scale=0.2, size=100)
        cfg = config(min_leaf=5)
        tree = Tree()
        row_leaf = np.zeros(100, dtype=np.int64)
        for _ in range(300):
            mh_tree_update(tree, row_leaf, x, resid, cfg, 0.1, 1.0, rng)
            np.testing.assert_array_equal(tree.leaf_index(x), row_leaf)

    def test_leaves_partition_rows(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(60, 2))
        resid = rng.normal(size=60)
        cfg = config(min_leaf=2)
        tree = Tree()
        row_leaf = np.zeros(60, dtype=np.int64)
        for _ in range(200):
            mh_tree_update(tree, row_leaf, x, resid, cfg, 0.5, 0.5, rng)
        leaves = tree.leaves()
        counts = {leaf: int((row_leaf == leaf).sum()) for leaf in leaves}
        assert sum(counts.values()) == 60
