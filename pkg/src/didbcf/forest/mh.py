"""Metropolis-Hastings tree updates: one grow-or-prune proposal per call.

Grow and prune are proposed with probability 0.5 each (grow is forced when
the tree is a single leaf, where prune is unavailable). Acceptance uses the
integrated-likelihood ratio times the depth-prior ratio times the proposal
asymmetry; leaf values are redrawn from their conjugate posteriors afterward
whether or not the proposal was accepted.
"""

from __future__ import annotations

import numpy as np

from .conjugacy import _log_marginal_vec
from .gfr import draw_leaf_values
from .splits import split_candidates
from .tree import ForestConfig, Tree


def _log_m(n: int, sum_r: float, sigma2: float, tau_leaf: float) -> float:
    return float(_log_marginal_vec(np.array([float(n)]), np.array([sum_r]),
                                   sigma2, tau_leaf)[0])


def _split_prob(depth: int, config: ForestConfig) -> float:
    return config.alpha * (1.0 + depth) ** (-config.power)


def _valid_cuts(values: np.ndarray, config: ForestConfig) -> np.ndarray:
    """Candidate cutpoints leaving both children at least min_leaf rows."""
    cuts = split_candidates(values, config.grid_size)
    if cuts.size == 0:
        return cuts
    order = np.sort(values)
    pos = np.searchsorted(order, cuts, side="right")
    keep = (pos >= config.min_leaf) & (pos <= values.size - config.min_leaf)
    return cuts[keep]


def _pooled_candidate_count(x_node: np.ndarray, config: ForestConfig) -> int:
    """Size of the node's pooled cutpoint set across all variables; the tree
    prior puts a uniform rule choice over this set, matching the
    grow-from-root no-split weight."""
    return sum(_valid_cuts(x_node[:, j], config).size
               for j in range(x_node.shape[1]))


def grow_prune_log_ratio(log_m_parent: float, log_m_left: float,
                         log_m_right: float, depth: int, n_candidates: int,
                         config: ForestConfig) -> float:
    """Log posterior ratio of the grown tree over the unsplit tree,
    excluding proposal terms (identical structures give exactly 0).

    Includes the uniform split-rule prior 1/n_candidates over the node's
    pooled cutpoint set.
    """
    p_d = _split_prob(depth, config)
    p_d1 = _split_prob(depth + 1, config)
    log_prior = (np.log(p_d) + 2.0 * np.log1p(-p_d1) - np.log1p(-p_d)
                 - np.log(n_candidates))
    return log_prior + log_m_left + log_m_right - log_m_parent


def mh_tree_update(tree: Tree, row_leaf: np.ndarray, x: np.ndarray,
                   resid: np.ndarray, config: ForestConfig, sigma2: float,
                   tau_leaf: float, rng: np.random.Generator) -> bool:
    """One grow-or-prune proposal, then a full leaf redraw. Mutates the tree
    and the row-to-leaf assignment in place; returns acceptance."""
    n_feat = x.shape[1]
    stump = tree.n_leaves == 1
    grow = stump or rng.uniform() < 0.5
    accepted = False

    if grow:
        leaves = tree.leaves()
        leaf = int(leaves[rng.integers(leaves.size)])
        var = int(rng.integers(n_feat))
        rows = np.flatnonzero(row_leaf == leaf)
        cuts = _valid_cuts(x[rows, var], config) if rows.size else np.empty(0)
        if cuts.size:
            cut = float(cuts[rng.integers(cuts.size)])
            go_left = x[rows, var] <= cut
            r = resid[rows]
            sum_all, sum_left = float(r.sum()), float(r[go_left].sum())
            n_all, n_left = rows.size, int(go_left.sum())
            depth = int(tree.depth[leaf])
            n_candidates = _pooled_candidate_count(x[rows], config)

            log_ratio = grow_prune_log_ratio(
                _log_m(n_all, sum_all, sigma2, tau_leaf),
                _log_m(n_left, sum_left, sigma2, tau_leaf),
                _log_m(n_all - n_left, sum_all - sum_left, sigma2, tau_leaf),
                depth, n_candidates, config)

            # Forward: P(grow) / (n_leaves * n_feat * n_cuts).
            # Reverse: prune at the new no-grandchild node in the grown tree.
            parent = int(tree.parent[leaf])
            parent_was_prunable = parent >= 0 and (
                tree.var[tree.left[parent]] == -1
                and tree.var[tree.right[parent]] == -1)
            n_nogs_after = tree.nogs().size + 1 - int(parent_was_prunable)
            log_fwd = (np.log(1.0 if stump else 0.5) - np.log(leaves.size)
                       - np.log(n_feat) - np.log(cuts.size))
            log_rev = np.log(0.5) - np.log(n_nogs_after)

            if np.log(rng.uniform()) < log_ratio + log_rev - log_fwd:
                left_id, right_id = tree.split(leaf, var, cut)
                row_leaf[rows[go_left]] = left_id
                row_leaf[rows[~go_left]] = right_id
                accepted = True
    else:
        nogs = tree.nogs()
        node = int(nogs[rng.integers(nogs.size)])
        left_id, right_id = int(tree.left[node]), int(tree.right[node])
        rows_l = np.flatnonzero(row_leaf == left_id)
        rows_r = np.flatnonzero(row_leaf == right_id)
        rows = np.concatenate([rows_l, rows_r])
        sum_l, sum_r = float(resid[rows_l].sum()), float(resid[rows_r].sum())
        depth = int(tree.depth[node])
        n_candidates = _pooled_candidate_count(x[rows], config)

        log_ratio = -grow_prune_log_ratio(
            _log_m(rows.size, sum_l + sum_r, sigma2, tau_leaf),
            _log_m(rows_l.size, sum_l, sigma2, tau_leaf),
            _log_m(rows_r.size, sum_r, sigma2, tau_leaf),
            depth, n_candidates, config)

        # Reverse move regrows this exact split: the pruned node holds the
        # same rows the original leaf held, so the deterministic candidate set
        # contains the current cutpoint.
        var = int(tree.var[node])
        cuts_rev = _valid_cuts(x[rows, var], config)
        pruned_is_stump = tree.n_leaves == 2
        log_fwd = np.log(0.5) - np.log(nogs.size)
        log_rev = (np.log(1.0 if pruned_is_stump else 0.5)
                   - np.log(tree.n_leaves - 1) - np.log(n_feat)
                   - np.log(max(cuts_rev.size, 1)))

        if np.log(rng.uniform()) < log_ratio + log_rev - log_fwd:
            row_leaf[rows] = node
            tree.prune(node)
            accepted = True

    draw_leaf_values(tree, row_leaf, resid, sigma2, tau_leaf, rng)
    return accepted
