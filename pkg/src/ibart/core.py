"""Domain types shared by every other module.

Trees are stored as flat node-slot arrays. A slot is free, a leaf, or an
internal node; slot 0 is always the root. Leaf parameters are kept in leaf
order (ascending slot index), so ``mu[j]`` belongs to ``tree.leaves()[j]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FREE, LEAF, INTERNAL = 0, 1, 2

MODES = ("infinite", "classic")


class DegenerateResponseError(ValueError):
    """Raised when the response has zero range."""


class ContractError(ValueError):
    """Raised when an argument violates an operation's precondition."""


def standardize(y_raw):
    """Map a response vector onto [-0.5, 0.5] by midrange and range.

    Returns ``(y_std, y_shift, y_scale)`` with ``y_raw = y_std * y_scale + y_shift``.
    """
    y_raw = np.asarray(y_raw, dtype=float)
    lo, hi = float(np.min(y_raw)), float(np.max(y_raw))
    if not hi > lo:
        raise DegenerateResponseError("degenerate response: max equals min")
    shift = 0.5 * (hi + lo)
    scale = hi - lo
    return (y_raw - shift) / scale, shift, scale


@dataclass
class Dataset:
    """Design matrix and standardized response.

    ``encoding_map`` maps an original categorical column name to the
    ``(start, stop)`` range of its dummy columns in ``X``.
    """

    X: np.ndarray
    y: np.ndarray
    y_shift: float
    y_scale: float
    column_names: list
    encoding_map: dict = field(default_factory=dict)
    truth: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise ContractError("X must be a non-empty 2-d matrix")
        if self.y.shape != (self.X.shape[0],):
            raise ContractError("y length must match the number of rows of X")
        if not np.all(np.isfinite(self.X)):
            raise ContractError("X contains missing or non-finite values")
        if len(self.column_names) != self.X.shape[1]:
            raise ContractError("column_names length must equal the column count")

    @classmethod
    def from_raw(cls, X, y_raw, column_names=None, encoding_map=None, truth=None):
        y_std, shift, scale = standardize(y_raw)
        X = np.asarray(X, dtype=float)
        if column_names is None:
            column_names = [f"x{j + 1}" for j in range(X.shape[1])]
        return cls(X, y_std, shift, scale, list(column_names),
                   dict(encoding_map or {}), dict(truth or {}))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def y_original(self) -> np.ndarray:
        return self.y * self.y_scale + self.y_shift

    def to_std(self, values):
        """Convert original-unit response values to this dataset's standardized scale."""
        return (np.asarray(values, dtype=float) - self.y_shift) / self.y_scale

    def subset(self, idx, y_shift=None, y_scale=None) -> "Dataset":
        """Row subset, restandardized with the given (or its own) shift and scale."""
        idx = np.asarray(idx)
        y_raw = self.y_original()[idx]
        if y_shift is None:
            y_std, y_shift, y_scale = standardize(y_raw)
        else:
            y_std = (y_raw - y_shift) / y_scale
        truth = {k: np.asarray(v)[idx] for k, v in self.truth.items()
                 if np.ndim(v) == 1 and len(v) == self.n}
        return Dataset(self.X[idx], y_std, y_shift, y_scale, list(self.column_names),
                       dict(self.encoding_map), truth)


@dataclass
class HyperParams:
    """Prior hyperparameters and run-length settings.

    ``sigma_mu2`` of ``None`` means ``(0.5 / (2 sqrt(k_ref)))**2``. ``lam`` is
    read in original response units when ``lambda_scale == "original"`` and is
    divided by ``y_scale**2`` before sampling.
    """

    alpha: float = 0.95
    beta: float = 2.0
    sigma_mu2: Optional[float] = None
    k_ref: int = 20
    nu: float = 3.0
    lam: float = 0.74
    lambda_scale: str = "original"
    a_gamma: float = 0.05
    b_gamma: float = 0.01
    a_eta: float = 0.05
    b_eta: float = 0.01
    a_delta: float = 0.1
    b_delta: float = 0.01
    iterations: int = 5000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    mode: str = "infinite"
    classic_K: int = 200

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0.0 < self.alpha < 1.0:
            raise ContractError("alpha must lie in (0, 1)")
        if self.beta < 0:
            raise ContractError("beta must be non-negative")
        if self.sigma_mu2 is not None and not self.sigma_mu2 > 0:
            raise ContractError("sigma_mu2 must be positive")
        for name in ("nu", "lam", "a_gamma", "b_gamma", "a_eta", "b_eta", "a_delta", "b_delta"):
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be positive")
        if self.k_ref < 1 or self.classic_K < 1:
            raise ContractError("k_ref and classic_K must be at least 1")
        if self.iterations < 1 or self.burn_in < 0 or self.thin < 1:
            raise ContractError("iterations >= 1, burn_in >= 0 and thin >= 1 are required")
        if self.mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}")
        if self.lambda_scale not in ("original", "standardized"):
            raise ContractError("lambda_scale must be 'original' or 'standardized'")

    def leaf_prior_variance(self) -> float:
        if self.sigma_mu2 is not None:
            return float(self.sigma_mu2)
        k = self.classic_K if self.mode == "classic" else self.k_ref
        return (0.5 / (2.0 * np.sqrt(k))) ** 2

    def replace(self, **changes) -> "HyperParams":
        return dataclasses.replace(self, **changes)


class DecisionTree:
    """Binary tree of ``(variable, cut)`` rules over node slots.

    ``var[c]``/``cut[c]`` are meaningful at internal slots only; a point goes
    left when ``x[var] <= cut``.
    """

    def __init__(self, var, cut, left, right, status):
        self.var = np.asarray(var, dtype=np.int32)
        self.cut = np.asarray(cut, dtype=float)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.status = np.asarray(status, dtype=np.int8)

    @classmethod
    def root_only(cls, capacity: int = 1) -> "DecisionTree":
        t = cls(np.full(capacity, -1), np.zeros(capacity), np.full(capacity, -1),
                np.full(capacity, -1), np.zeros(capacity))
        t.status[0] = LEAF
        return t

    @classmethod
    def from_splits(cls, splits) -> "DecisionTree":
        """Build a tree from a nested ``(var, cut, left, right)`` tuple; ``None`` is a leaf."""
        var, cut, left, right, status = [], [], [], [], []

        def build(node):
            c = len(status)
            var.append(-1); cut.append(0.0); left.append(-1); right.append(-1)
            status.append(LEAF)
            if node is not None:
                v, x, lt, rt = node
                status[c] = INTERNAL
                var[c], cut[c] = v, x
                left[c] = build(lt)
                right[c] = build(rt)
            return c

        build(splits)
        return cls(var, cut, left, right, status)

    @property
    def capacity(self) -> int:
        return len(self.status)

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.status == LEAF)

    def internal_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.status == INTERNAL)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.status == LEAF))

    def depths(self) -> np.ndarray:
        d = np.full(self.capacity, -1, dtype=np.int32)
        d[0] = 0
        stack = [0]
        while stack:
            c = stack.pop()
            if self.status[c] == INTERNAL:
                for ch in (self.left[c], self.right[c]):
                    d[ch] = d[c] + 1
                    stack.append(ch)
        return d

    def parents(self) -> np.ndarray:
        par = np.full(self.capacity, -1, dtype=np.int32)
        for c in self.internal_nodes():
            par[self.left[c]] = c
            par[self.right[c]] = c
        return par

    def find_leaf(self, x) -> int:
        c = 0
        while self.status[c] == INTERNAL:
            c = self.left[c] if x[self.var[c]] <= self.cut[c] else self.right[c]
        return int(c)

    def route(self, X) -> np.ndarray:
        """Leaf slot for every row of ``X``."""
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[0], dtype=np.int32)
        frontier = np.arange(X.shape[0])
        while frontier.size:
            node = out[frontier]
            inner = self.status[node] == INTERNAL
            frontier, node = frontier[inner], node[inner]
            go_left = X[frontier, self.var[node]] <= self.cut[node]
            out[frontier] = np.where(go_left, self.left[node], self.right[node])
        return out

    def leaf_position(self) -> np.ndarray:
        """Map from slot index to position in leaf order (-1 for non-leaves)."""
        pos = np.full(self.capacity, -1, dtype=np.int64)
        leaves = self.leaves()
        pos[leaves] = np.arange(leaves.size)
        return pos

    def compact(self) -> "DecisionTree":
        """Copy with slots renumbered in pre-order and no free slots."""
        order = []
        stack = [0]
        while stack:
            c = stack.pop()
            order.append(c)
            if self.status[c] == INTERNAL:
                stack.append(self.right[c])
                stack.append(self.left[c])
        remap = {c: j for j, c in enumerate(order)}
        var = [int(self.var[c]) if self.status[c] == INTERNAL else -1 for c in order]
        cut = [float(self.cut[c]) if self.status[c] == INTERNAL else 0.0 for c in order]
        left = [remap[int(self.left[c])] if self.status[c] == INTERNAL else -1 for c in order]
        right = [remap[int(self.right[c])] if self.status[c] == INTERNAL else -1 for c in order]
        status = [int(self.status[c]) for c in order]
        return DecisionTree(var, cut, left, right, status)

    def copy(self) -> "DecisionTree":
        return DecisionTree(self.var.copy(), self.cut.copy(), self.left.copy(),
                            self.right.copy(), self.status.copy())

    def check(self):
        """Structural audit; raises AssertionError on a malformed tree."""
        assert self.status[0] != FREE, "root slot is free"
        seen = set()
        stack = [0]
        while stack:
            c = stack.pop()
            assert c not in seen, "node reachable twice"
            seen.add(c)
            if self.status[c] == INTERNAL:
                assert self.left[c] >= 0 and self.right[c] >= 0
                stack.extend((self.left[c], self.right[c]))
            else:
                assert self.status[c] == LEAF
        used = set(np.flatnonzero(self.status != FREE).tolist())
        assert used == seen, "unreachable non-free slots"
        assert len(self.leaves()) == len(self.internal_nodes()) + 1


def tree_regress(x, tree: DecisionTree, mu) -> float:
    """Step-function value of one tree at a covariate vector."""
    leaf = tree.find_leaf(x)
    return float(mu[tree.leaf_position()[leaf]])


@dataclass
class WeightMatrix:
    """Binary tree-activation matrix (rows = observations, columns = active trees)."""

    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.uint8)
        if self.entries.ndim != 2:
            raise ContractError("W must be 2-d")

    @property
    def counts(self) -> np.ndarray:
        return self.entries.sum(axis=0).astype(np.int64)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def K(self) -> int:
        return self.entries.shape[1]


@dataclass
class ModelState:
    """Full sampler state; the forest carries trees, leaf values, W and column counts.

    ``delta_eta`` and ``one_minus_eta`` hold ``delta + eta`` and ``1 - eta``
    exactly; they default to values computed from ``delta`` and ``eta``.
    """

    forest: "object"
    sigma2: float
    gamma: float
    eta: float
    delta: float
    delta_eta: Optional[float] = None
    one_minus_eta: Optional[float] = None

    def __post_init__(self):
        if self.delta_eta is None:
            self.delta_eta = self.delta + self.eta
        if self.one_minus_eta is None:
            self.one_minus_eta = 1.0 - self.eta
        self.check_constraints()

    def check_constraints(self):
        if not (self.one_minus_eta > 0.0 and self.delta_eta > 0.0 and self.gamma > 0.0
                and self.sigma2 > 0.0):
            raise ContractError(
                f"parameter constraints violated: eta={self.eta}, delta={self.delta}, "
                f"gamma={self.gamma}, sigma2={self.sigma2}")

    @property
    def K(self) -> int:
        return self.forest.K

    @property
    def trees(self) -> list:
        return [self.forest.tree(k) for k in range(self.forest.K)]

    @property
    def leaves(self) -> list:
        return [self.forest.leaf_values(k) for k in range(self.forest.K)]

    @property
    def W(self) -> WeightMatrix:
        return WeightMatrix(self.forest.W[: self.forest.K].T.copy())


def ensemble_predict(x, state: ModelState, w_row) -> float:
    """Sum of active tree outputs at ``x`` on the standardized scale."""
    w_row = np.asarray(w_row)
    if w_row.shape != (state.K,):
        raise ContractError(f"w_row has length {w_row.size}, expected {state.K}")
    total = 0.0
    for k in np.flatnonzero(w_row):
        total += tree_regress(x, state.forest.tree(k), state.forest.leaf_values(k))
    return total
