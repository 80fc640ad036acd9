"""Recursive grow-from-root tree sampling and full-forest sweeps.

A tree is regrown from scratch by recursively sampling cutpoints with
probability proportional to the product of the children's integrated leaf
likelihoods; the no-split option carries the depth-penalized weight
|C| * ((1+d)^power / alpha - 1) times the unsplit node's likelihood. Sorted
row-index matrices are partitioned down the recursion so each node's
cutpoint statistics come from cumulative sums over presorted residuals.
"""

from __future__ import annotations

import numpy as np

from .conjugacy import NoiseModel, _log_marginal_vec, draw_sigma2, leaf_posterior
from .splits import split_candidates
from .tree import Forest, ForestConfig, Tree

PROB_SUM_TOL = 1e-12


def presort_features(x: np.ndarray) -> np.ndarray:
    """Row indices of x sorted per column; partitioned stably down the tree."""
    return np.argsort(x, axis=0, kind="stable")


def _sample_index(log_weights: np.ndarray, rng: np.random.Generator) -> int:
    shifted = log_weights - log_weights.max()
    weights = np.exp(shifted)
    probs = weights / weights.sum()
    total = probs.sum()
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise AssertionError(f"cutpoint probabilities sum to {total!r}")
    idx = int(np.searchsorted(np.cumsum(probs), rng.uniform(), side="left"))
    return min(idx, len(probs) - 1)


def draw_leaf_values(tree: Tree, row_leaf: np.ndarray, resid: np.ndarray,
                     sigma2: float, tau_leaf: float,
                     rng: np.random.Generator) -> None:
    """Redraw every leaf value from its conjugate posterior (prior when a
    leaf holds no rows)."""
    leaves = tree.leaves()
    comp = np.searchsorted(leaves, row_leaf)
    counts = np.bincount(comp, minlength=leaves.size)
    sums = np.bincount(comp, weights=resid, minlength=leaves.size)
    mean, var = leaf_posterior(counts, sums, sigma2, tau_leaf)
    tree.value[leaves] = rng.normal(mean, np.sqrt(var))


def null_cutpoint_log_weight(n_candidates: int, depth: int, alpha: float,
                             power: float, log_m_node: float) -> float:
    """Log of |C| * ((1+d)^power / alpha - 1) * m(node)."""
    return np.log(n_candidates * ((1.0 + depth) ** power / alpha - 1.0)) + log_m_node


def grow_from_root(tree: Tree, node: int, x: np.ndarray, resid: np.ndarray,
                   order: np.ndarray, depth: int, config: ForestConfig,
                   sigma2: float, tau_leaf: float, rng: np.random.Generator,
                   row_leaf: np.ndarray) -> None:
    """Grow `node` in place; rows are given by the columns of `order`.

    Terminates a branch (sampling its leaf value) when the no-split option is
    drawn or a stopping condition holds: max depth, too few rows for two
    minimum-size children, or no valid cutpoints.
    """
    m = order.shape[0]
    rows = order[:, 0]
    sum_all = float(resid[rows].sum())

    def make_leaf():
        mean, var = leaf_posterior(m, sum_all, sigma2, tau_leaf)
        tree.value[node] = rng.normal(mean, np.sqrt(var))
        row_leaf[rows] = node

    if depth >= config.max_depth or m < 2 * config.min_leaf:
        make_leaf()
        return

    vals = x[order, np.arange(order.shape[1])[None, :]]
    cum = np.cumsum(resid[order], axis=0)

    feat_cuts, feat_pos, log_weights = [], [], []
    for j in range(order.shape[1]):
        cuts = split_candidates(vals[:, j], config.grid_size)
        if cuts.size == 0:
            feat_cuts.append(cuts)
            feat_pos.append(np.empty(0, dtype=np.int64))
            continue
        pos = np.searchsorted(vals[:, j], cuts, side="right")
        keep = (pos >= config.min_leaf) & (pos <= m - config.min_leaf)
        cuts, pos = cuts[keep], pos[keep]
        feat_cuts.append(cuts)
        feat_pos.append(pos)
        if cuts.size:
            sum_left = cum[pos - 1, j]
            log_weights.append(
                _log_marginal_vec(pos.astype(float), sum_left, sigma2, tau_leaf)
                + _log_marginal_vec((m - pos).astype(float), sum_all - sum_left,
                                    sigma2, tau_leaf))

    n_candidates = sum(c.size for c in feat_cuts)
    if n_candidates == 0:
        make_leaf()
        return

    log_m_node = float(_log_marginal_vec(np.array([float(m)]),
                                         np.array([sum_all]), sigma2, tau_leaf)[0])
    log_null = null_cutpoint_log_weight(n_candidates, depth, config.alpha,
                                        config.power, log_m_node)
    stacked = np.concatenate([*log_weights, [log_null]])
    pick = _sample_index(stacked, rng)

    if pick == n_candidates:
        make_leaf()
        return

    offset = pick
    for j in range(order.shape[1]):
        if offset < feat_cuts[j].size:
            var, cut = j, float(feat_cuts[j][offset])
            n_left = int(feat_pos[j][offset])
            break
        offset -= feat_cuts[j].size

    left_id, right_id = tree.split(node, var, cut)
    go_left = np.zeros(row_leaf.shape[0], dtype=bool)
    left_rows = order[:, var][vals[:, var] <= cut]
    go_left[left_rows] = True
    mask = go_left[order]
    p = order.shape[1]
    left_order = order.T[mask.T].reshape(p, n_left).T
    right_order = order.T[~mask.T].reshape(p, m - n_left).T
    grow_from_root(tree, left_id, x, resid, left_order, depth + 1, config,
                   sigma2, tau_leaf, rng, row_leaf)
    grow_from_root(tree, right_id, x, resid, right_order, depth + 1, config,
                   sigma2, tau_leaf, rng, row_leaf)


def grow_tree(x: np.ndarray, resid: np.ndarray, config: ForestConfig,
              sigma2: float, tau_leaf: float, rng: np.random.Generator,
              sorted_idx: np.ndarray | None = None) -> tuple[Tree, np.ndarray]:
    """Regrow one tree from the root over all rows of x."""
    if sorted_idx is None:
        sorted_idx = presort_features(x)
    tree = Tree()
    row_leaf = np.zeros(x.shape[0], dtype=np.int64)
    grow_from_root(tree, 0, x, resid, sorted_idx, 0, config, sigma2, tau_leaf,
                   rng, row_leaf)
    return tree, row_leaf


class BackfitState:
    """Per-tree fit and leaf-assignment caches for one forest on fixed rows."""

    def __init__(self, forest: Forest, x: np.ndarray):
        self.x = np.asarray(x, dtype=float)
        self.sorted_idx = presort_features(self.x)
        n = self.x.shape[0]
        self.row_leaf = [t.leaf_index(self.x) for t in forest.trees]
        self.fits = [t.value[rl] for t, rl in zip(forest.trees, self.row_leaf)]
        self.total = np.sum(self.fits, axis=0) if self.fits else np.zeros(n)

    def replace_tree(self, i: int, tree: Tree, row_leaf: np.ndarray) -> None:
        new_fit = tree.value[row_leaf]
        self.total += new_fit - self.fits[i]
        self.fits[i] = new_fit
        self.row_leaf[i] = row_leaf

    def refresh_tree(self, i: int, tree: Tree) -> None:
        new_fit = tree.value[self.row_leaf[i]]
        self.total += new_fit - self.fits[i]
        self.fits[i] = new_fit


def gfr_sweep(forest: Forest, target: np.ndarray, x: np.ndarray,
              noise: NoiseModel, rng: np.random.Generator,
              state: BackfitState | None = None) -> BackfitState:
    """One grow-from-root pass over every tree of a standalone forest.

    Each tree is regrown on the running residual with the others' fit
    subtracted; the noise variance is redrawn after every tree.
    """
    if state is None:
        state = BackfitState(forest, x)
    config = forest.config
    if config is None:
        raise ValueError("forest must carry a config for gfr_sweep")
    tau_leaf = forest.leaf_scale**2
    for i, _ in enumerate(forest.trees):
        partial = target - state.total + state.fits[i]
        tree, row_leaf = grow_tree(state.x, partial, config, noise.sigma2,
                                   tau_leaf, rng, sorted_idx=state.sorted_idx)
        forest.trees[i] = tree
        state.replace_tree(i, tree, row_leaf)
        noise.sigma2 = draw_sigma2(target - state.total, noise.nu, noise.lam, rng)
    return state
