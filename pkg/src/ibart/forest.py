"""Struct-of-arrays storage for all trees of one chain.

Row ``k`` of every 2-d node array describes tree ``k``; ``leaf_of[k, i]`` is
the leaf slot that training row ``i`` falls into and ``W[k, i]`` its
activation flag. Columns with ``m[k] == 0`` are dead and removed by
:meth:`Forest.compact`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import FREE, INTERNAL, LEAF, DecisionTree

_NODE_INT = ("var", "left", "right", "parent", "depth")


class Forest:
    def __init__(self, n_rows: int, cap_trees: int = 16, cap_nodes: int = 16):
        self.n_rows = int(n_rows)
        self.K = 0
        self.cap_trees = 0
        self.cap_nodes = 0
        self._alloc(max(cap_trees, 1), max(cap_nodes, 4))

    def _alloc(self, cap_trees, cap_nodes):
        old = None
        if self.cap_trees:
            old = {name: getattr(self, name) for name in
                   _NODE_INT + ("cut", "mu", "status", "n_nodes", "leaf_of", "W", "m")}
        self.var = np.full((cap_trees, cap_nodes), -1, dtype=np.int32)
        self.left = np.full((cap_trees, cap_nodes), -1, dtype=np.int32)
        self.right = np.full((cap_trees, cap_nodes), -1, dtype=np.int32)
        self.parent = np.full((cap_trees, cap_nodes), -1, dtype=np.int32)
        self.depth = np.zeros((cap_trees, cap_nodes), dtype=np.int32)
        self.cut = np.zeros((cap_trees, cap_nodes), dtype=np.float64)
        self.mu = np.zeros((cap_trees, cap_nodes), dtype=np.float64)
        self.status = np.zeros((cap_trees, cap_nodes), dtype=np.int8)
        self.n_nodes = np.zeros(cap_trees, dtype=np.int32)
        self.leaf_of = np.zeros((cap_trees, self.n_rows), dtype=np.int32)
        self.W = np.zeros((cap_trees, self.n_rows), dtype=np.uint8)
        self.m = np.zeros(cap_trees, dtype=np.int64)
        if old is not None:
            kt, kn = self.cap_trees, self.cap_nodes
            for name, arr in old.items():
                new = getattr(self, name)
                if arr.ndim == 1:
                    new[:kt] = arr
                elif name in ("leaf_of", "W"):
                    new[:kt] = arr
                else:
                    new[:kt, :kn] = arr
        self.cap_trees, self.cap_nodes = cap_trees, cap_nodes

    def ensure_tree_capacity(self, need: int):
        if need > self.cap_trees:
            cap = self.cap_trees
            while cap < need:
                cap *= 2
            self._alloc(cap, self.cap_nodes)

    def ensure_node_capacity(self, need: int):
        if need > self.cap_nodes:
            cap = self.cap_nodes
            while cap < need:
                cap *= 2
            self._alloc(self.cap_trees, cap)

    # -- construction ----------------------------------------------------
    def add_root_tree(self, mu: float = 0.0, w_col=None) -> int:
        self.ensure_tree_capacity(self.K + 1)
        k = self.K
        self._reset(k)
        self.mu[k, 0] = mu
        if w_col is None:
            self.W[k] = 1
        else:
            self.W[k] = np.asarray(w_col, dtype=np.uint8)
        self.m[k] = int(self.W[k].sum())
        self.K += 1
        return k

    def _reset(self, k):
        self.var[k] = -1
        self.left[k] = -1
        self.right[k] = -1
        self.parent[k] = -1
        self.depth[k] = 0
        self.cut[k] = 0.0
        self.mu[k] = 0.0
        self.status[k] = FREE
        self.status[k, 0] = LEAF
        self.n_nodes[k] = 1
        self.leaf_of[k] = 0
        self.W[k] = 0
        self.m[k] = 0

    def set_tree(self, k: int, tree: DecisionTree, mu, X):
        """Overwrite tree ``k`` with ``tree`` and leaf-order values ``mu``; reroutes ``X``."""
        tree = tree.compact()
        self.ensure_node_capacity(tree.capacity + 2)
        w = self.W[k].copy()
        self._reset(k)
        c = tree.capacity
        self.var[k, :c] = tree.var
        self.cut[k, :c] = tree.cut
        self.left[k, :c] = tree.left
        self.right[k, :c] = tree.right
        self.status[k, :c] = tree.status
        self.parent[k, :c] = tree.parents()
        self.depth[k, :c] = np.maximum(tree.depths(), 0)
        self.n_nodes[k] = c
        self.mu[k, tree.leaves()] = np.asarray(mu, dtype=float)
        self.leaf_of[k] = tree.route(X)
        self.W[k] = w
        self.m[k] = int(w.sum())

    @classmethod
    def from_trees(cls, trees, leaves, W, X) -> "Forest":
        W = np.asarray(W, dtype=np.uint8)
        f = cls(W.shape[0], cap_trees=max(len(trees), 1))
        for k, (t, mu) in enumerate(zip(trees, leaves)):
            f.add_root_tree(0.0, W[:, k])
            f.set_tree(k, t, mu, X)
        return f

    # -- views ---------------------------------------------------------------
    def tree(self, k: int) -> DecisionTree:
        return DecisionTree(self.var[k].copy(), self.cut[k].copy(), self.left[k].copy(),
                            self.right[k].copy(), self.status[k].copy())

    def leaf_values(self, k: int) -> np.ndarray:
        return self.mu[k, self.status[k] == LEAF].copy()

    def contributions(self) -> np.ndarray:
        """``K x n`` matrix of each tree's output at each training row."""
        K = self.K
        return np.take_along_axis(self.mu[:K], self.leaf_of[:K].astype(np.int64), axis=1)

    def fitted(self) -> np.ndarray:
        K = self.K
        return (self.W[:K] * self.contributions()).sum(axis=0)

    def split_counts(self, p: int) -> np.ndarray:
        """Number of internal nodes splitting on each variable, pooled over live trees."""
        K = self.K
        st = self.status[:K]
        vars_ = self.var[:K][st == INTERNAL]
        return np.bincount(vars_, minlength=p).astype(np.int64)

    def split_counts_per_tree(self, p: int) -> np.ndarray:
        K = self.K
        k_idx, c_idx = np.nonzero(self.status[:K] == INTERNAL)
        out = np.zeros((K, p), dtype=np.int64)
        np.add.at(out, (k_idx, self.var[:K][k_idx, c_idx]), 1)
        return out

    # -- maintenance ---------------------------------------------------------
    def compact(self) -> np.ndarray:
        """Drop dead columns (``m == 0``); returns the surviving old indices."""
        K = self.K
        keep = np.flatnonzero(self.m[:K] > 0)
        if keep.size == K:
            return keep
        for name in _NODE_INT + ("cut", "mu", "status", "n_nodes", "leaf_of", "W", "m"):
            arr = getattr(self, name)
            arr[: keep.size] = arr[keep]
        self.K = int(keep.size)
        return keep

    def snapshot(self) -> "Ensemble":
        K = self.K
        width = int(np.max(np.flatnonzero(self.status[:K].any(axis=0))) + 1) if K else 1
        return Ensemble(
            var=self.var[:K, :width].copy(), cut=self.cut[:K, :width].copy(),
            left=self.left[:K, :width].copy(), right=self.right[:K, :width].copy(),
            status=self.status[:K, :width].copy(), mu=self.mu[:K, :width].copy(),
            W=self.W[:K].copy(), m=self.m[:K].copy())

    def audit(self, X, fitted=None, tol: float = 1e-9):
        """Check structural and cache invariants; raises AssertionError."""
        K = self.K
        assert np.all(self.m[:K] == self.W[:K].sum(axis=1)), "m != column sums"
        for k in range(K):
            t = self.tree(k)
            t.check()
            assert np.array_equal(t.route(X), self.leaf_of[k]), f"leaf_of stale for tree {k}"
            assert self.n_nodes[k] == int(np.sum(self.status[k] != FREE))
            d = t.depths()
            used = self.status[k] != FREE
            assert np.array_equal(d[used], self.depth[k][used]), "depth cache stale"
        if fitted is not None:
            err = np.max(np.abs(self.fitted() - fitted)) if self.n_rows else 0.0
            assert err <= tol, f"fitted cache drifted by {err}"


@dataclass
class Ensemble:
    """One retained posterior draw of the trees, leaf values and W (trees x rows)."""

    var: np.ndarray
    cut: np.ndarray
    left: np.ndarray
    right: np.ndarray
    status: np.ndarray
    mu: np.ndarray
    W: np.ndarray
    m: np.ndarray
    sigma2: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0
    eta: float = 0.0
    delta_eta: Optional[float] = None
    one_minus_eta: Optional[float] = None

    @property
    def K(self) -> int:
        return self.status.shape[0]

    @property
    def n_rows(self) -> int:
        return self.W.shape[1]

    def tree(self, k: int) -> DecisionTree:
        return DecisionTree(self.var[k], self.cut[k], self.left[k], self.right[k], self.status[k])

    def leaf_values(self, k: int) -> np.ndarray:
        return self.mu[k, self.status[k] == LEAF]
