"""Binary decision trees with scalar leaf values, stored as flat arrays.

Nodes live in parallel numpy arrays; `var` is the split feature for internal
nodes, LEAF (-1) for leaves, and DEAD (-2) for slots vacated by a prune. Slots
are never reused, which keeps node ids stable for the per-row leaf-assignment
caches the samplers maintain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEAF = -1
DEAD = -2


class Tree:
    def __init__(self, capacity: int = 16):
        self.var = np.full(capacity, DEAD, dtype=np.int32)
        self.cut = np.zeros(capacity)
        self.left = np.full(capacity, -1, dtype=np.int32)
        self.right = np.full(capacity, -1, dtype=np.int32)
        self.parent = np.full(capacity, -1, dtype=np.int32)
        self.value = np.zeros(capacity)
        self.depth = np.zeros(capacity, dtype=np.int32)
        self.n_slots = 1
        self.var[0] = LEAF

    def _ensure(self, extra: int):
        need = self.n_slots + extra
        if need <= len(self.var):
            return
        cap = max(need, 2 * len(self.var))
        for name in ("var", "cut", "left", "right", "parent", "value", "depth"):
            old = getattr(self, name)
            new = np.full(cap, DEAD if name == "var" else 0, dtype=old.dtype)
            if name in ("left", "right", "parent"):
                new[:] = -1
            new[: len(old)] = old
            setattr(self, name, new)

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.var[: self.n_slots] == LEAF)

    def internal_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.var[: self.n_slots] >= 0)

    def nogs(self) -> np.ndarray:
        """Internal nodes whose children are both leaves (prunable)."""
        internal = self.internal_nodes()
        if internal.size == 0:
            return internal
        both = (self.var[self.left[internal]] == LEAF) & \
               (self.var[self.right[internal]] == LEAF)
        return internal[both]

    @property
    def n_leaves(self) -> int:
        return int((self.var[: self.n_slots] == LEAF).sum())

    @property
    def is_stump(self) -> bool:
        return self.n_leaves == 1 and self.var[0] == LEAF

    def split(self, node: int, var: int, cut: float) -> tuple[int, int]:
        """Turn a leaf into an internal node; returns the new child ids."""
        if self.var[node] != LEAF:
            raise ValueError(f"node {node} is not a leaf")
        self._ensure(2)
        l, r = self.n_slots, self.n_slots + 1
        self.n_slots += 2
        self.var[node] = var
        self.cut[node] = cut
        self.left[node], self.right[node] = l, r
        self.value[node] = 0.0
        for child in (l, r):
            self.var[child] = LEAF
            self.left[child] = self.right[child] = -1
            self.parent[child] = node
            self.depth[child] = self.depth[node] + 1
            self.value[child] = 0.0
        return l, r

    def prune(self, node: int) -> None:
        """Collapse a no-grandchild internal node back into a leaf."""
        l, r = self.left[node], self.right[node]
        if self.var[node] < 0 or self.var[l] != LEAF or self.var[r] != LEAF:
            raise ValueError(f"node {node} is not prunable")
        self.var[l] = self.var[r] = DEAD
        self.var[node] = LEAF
        self.left[node] = self.right[node] = -1
        self.value[node] = 0.0

    def leaf_index(self, x: np.ndarray) -> np.ndarray:
        """Route rows of x to leaf ids (vectorized, one pass per depth level)."""
        x = np.atleast_2d(x)
        node = np.zeros(x.shape[0], dtype=np.int64)
        while True:
            v = self.var[node]
            pending = np.flatnonzero(v >= 0)
            if pending.size == 0:
                return node
            cur = node[pending]
            go_left = x[pending, v[pending]] <= self.cut[cur]
            node[pending] = np.where(go_left, self.left[cur], self.right[cur])

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.leaf_index(x)]

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_slots):
            if self.var[i] == DEAD:
                continue
            nodes.append({
                "id": int(i),
                "var": int(self.var[i]),
                "cut": float(self.cut[i]),
                "left": int(self.left[i]),
                "right": int(self.right[i]),
                "value": float(self.value[i]),
                "depth": int(self.depth[i]),
            })
        return {"nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        max_id = max(n["id"] for n in d["nodes"])
        tree = cls(capacity=max_id + 1)
        tree.n_slots = max_id + 1
        tree.var[:] = DEAD
        for n in d["nodes"]:
            i = n["id"]
            tree.var[i] = n["var"]
            tree.cut[i] = n["cut"]
            tree.left[i] = n["left"]
            tree.right[i] = n["right"]
            tree.value[i] = n["value"]
            tree.depth[i] = n["depth"]
            for child in (n["left"], n["right"]):
                if child >= 0:
                    tree.parent[child] = i
        return tree


@dataclass
class ForestConfig:
    """Ensemble shape and priors for one sum-of-trees function."""

    num_trees: int
    alpha: float = 0.95            # depth-prior base: P(split at depth d) = alpha*(1+d)^-power
    power: float = 2.0
    leaf_prior: str = "half-cauchy"  # leaf-scale prior family: half-cauchy | half-normal
    anchor: float = 2.0              # prior median of the leaf scale
    grid_size: int = 100
    min_leaf: int = 5
    max_depth: int = 10

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.power < 0:
            raise ValueError("power must be nonnegative")
        if self.num_trees < 1:
            raise ValueError("num_trees must be at least 1")
        if self.leaf_prior not in ("half-cauchy", "half-normal"):
            raise ValueError(f"unknown leaf prior {self.leaf_prior!r}")


@dataclass
class Forest:
    """Sum-of-trees function: predictions add leaf values across trees."""

    trees: list = field(default_factory=list)
    leaf_scale: float = 1.0   # per-leaf prior sd; leaf variance is leaf_scale**2
    n_features: int | None = None
    config: ForestConfig | None = None

    @classmethod
    def stumps(cls, config: ForestConfig, n_features: int,
               leaf_scale: float) -> "Forest":
        return cls(trees=[Tree() for _ in range(config.num_trees)],
                   leaf_scale=leaf_scale, n_features=n_features, config=config)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.n_features is not None and x.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} features, got {x.shape[1]}")
        out = np.zeros(x.shape[0])
        for tree in self.trees:
            out += tree.predict(x)
        return out

    def leaf_values(self) -> np.ndarray:
        if not self.trees:
            return np.empty(0)
        return np.concatenate([t.value[t.leaves()] for t in self.trees])

    def to_dict(self) -> dict:
        return {
            "leaf_scale": self.leaf_scale,
            "n_features": self.n_features,
            "config": vars(self.config) if self.config else None,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        config = ForestConfig(**d["config"]) if d.get("config") else None
        return cls(trees=[Tree.from_dict(t) for t in d["trees"]],
                   leaf_scale=d["leaf_scale"], n_features=d["n_features"],
                   config=config)
