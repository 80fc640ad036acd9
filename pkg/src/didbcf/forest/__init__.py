"""Bayesian regression-tree machinery: conjugate leaf math, grow-from-root
sampling, Metropolis-Hastings backfitting, and variance/scale updates."""

from .conjugacy import (
    NoiseModel,
    SuffStats,
    calibrate_noise_prior,
    draw_sigma2,
    leaf_posterior,
    log_leaf_marginal,
)
from .gfr import (
    BackfitState,
    draw_leaf_values,
    gfr_sweep,
    grow_from_root,
    grow_tree,
    null_cutpoint_log_weight,
    presort_features,
)
from .mh import grow_prune_log_ratio, mh_tree_update
from .scales import draw_leaf_scale
from .splits import split_candidates
from .tree import Forest, ForestConfig, Tree

__all__ = [
    "BackfitState",
    "Forest",
    "ForestConfig",
    "NoiseModel",
    "SuffStats",
    "Tree",
    "calibrate_noise_prior",
    "draw_leaf_scale",
    "draw_leaf_values",
    "draw_sigma2",
    "gfr_sweep",
    "grow_from_root",
    "grow_prune_log_ratio",
    "grow_tree",
    "leaf_posterior",
    "log_leaf_marginal",
    "mh_tree_update",
    "null_cutpoint_log_weight",
    "presort_features",
    "split_candidates",
]
