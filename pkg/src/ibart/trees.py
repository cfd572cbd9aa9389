"""Tree-structure prior, Metropolis-Hastings tree moves, leaf-marginal
likelihood and conjugate leaf draws, for a single tree.

The sampler itself runs these steps through the compiled kernels on a whole
forest; the functions here wrap the same kernel code for one tree so that
each step can be inspected and tested in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _fallback
from ._backend import kernels
from .core import INTERNAL, LEAF, DecisionTree, HyperParams
from .forest import Forest

GROW, PRUNE, CHANGE, SWAP = _fallback.GROW, _fallback.PRUNE, _fallback.CHANGE, _fallback.SWAP
MOVE_NAMES = ("grow", "prune", "change", "swap")
MOVE_PROBS = (0.25, 0.25, 0.40, 0.10)


def split_prob(depth: int, alpha: float, beta: float) -> float:
    """Prior probability that a node at ``depth`` is internal."""
    return alpha * (1.0 + depth) ** (-beta)


def tree_log_prior(tree: DecisionTree, alpha: float, beta: float) -> float:
    """Log branching-process prior of the tree shape (rule choices excluded)."""
    d = tree.depths()
    out = 0.0
    for c in tree.internal_nodes():
        out += math.log(split_prob(int(d[c]), alpha, beta))
    for c in tree.leaves():
        ps = split_prob(int(d[c]), alpha, beta)
        out += math.log1p(-ps) if ps < 1 else -math.inf
    return out


class LeafStats(NamedTuple):
    n: np.ndarray
    s: np.ndarray
    q: np.ndarray


def leaf_sufficient_stats(tree: DecisionTree, residuals, rows, X) -> LeafStats:
    """Per-leaf count, sum and sum of squares of ``residuals`` (aligned with ``rows``)."""
    rows = np.asarray(rows, dtype=np.int64)
    r = np.asarray(residuals, dtype=float)
    pos = tree.leaf_position()[tree.route(np.asarray(X)[rows])]
    L = tree.n_leaves
    return LeafStats(np.bincount(pos, minlength=L).astype(np.int64),
                     np.bincount(pos, weights=r, minlength=L),
                     np.bincount(pos, weights=r * r, minlength=L))


def integrated_log_lik(stats: LeafStats, sigma2: float, sigma_mu2: float) -> float:
    """Gaussian log likelihood of the residuals with each leaf mean integrated out."""
    if not (sigma2 > 0 and sigma_mu2 > 0):
        raise ValueError("variances must be positive")
    n = np.asarray(stats.n, dtype=float)
    s = np.asarray(stats.s, dtype=float)
    q = np.asarray(stats.q, dtype=float)
    v = sigma2 + n * sigma_mu2
    terms = (-0.5 * n * math.log(2 * math.pi * sigma2) + 0.5 * np.log(sigma2 / v)
             - q / (2 * sigma2) + sigma_mu2 * s * s / (2 * sigma2 * v))
    return float(terms.sum())


def leaf_posterior(n, s, sigma2: float, sigma_mu2: float):
    """Mean and variance of the conjugate normal posterior of a leaf value."""
    prec = 1.0 / sigma_mu2 + np.asarray(n, dtype=float) / sigma2
    return (np.asarray(s, dtype=float) / sigma2) / prec, 1.0 / prec


def draw_leaves(tree: DecisionTree, stats: LeafStats, sigma2: float, sigma_mu2: float,
                rng) -> np.ndarray:
    """Independent conjugate draws of every leaf value, in leaf order."""
    mean, var = leaf_posterior(stats.n, stats.s, sigma2, sigma_mu2)
    return mean + np.sqrt(var) * rng.standard_normal(len(mean))


# -- moves --------------------------------------------------------------------

@dataclass
class TreeProposal:
    kind: int
    ok: bool
    node: int
    child: int
    var: int
    cut: float
    log_fwd: float
    log_rev: float
    dlik: float
    dprior: float
    tree: Optional[DecisionTree]

    @property
    def name(self) -> str:
        return MOVE_NAMES[self.kind]

    @property
    def log_ratio(self) -> float:
        return self.log_rev - self.log_fwd

    @property
    def log_accept(self) -> float:
        return self.dlik + self.dprior + self.log_ratio


def _one_tree(tree, X, rows, residuals=None, mu=None):
    """Single-tree forest with activation on ``rows`` and ``y`` chosen so the kernel
    residual equals ``residuals`` on those rows."""
    X = np.ascontiguousarray(X, dtype=float)
    n = X.shape[0]
    w = np.zeros(n, dtype=np.uint8)
    w[np.asarray(rows, dtype=np.int64)] = 1
    f = Forest(n, cap_trees=1)
    f.add_root_tree(0.0, w)
    if mu is None:
        mu = np.zeros(tree.n_leaves)
    f.set_tree(0, tree, mu, X)
    f.ensure_node_capacity(int(f.n_nodes[0]) + 2)
    fitted = f.fitted()
    y = fitted.copy()
    if residuals is not None:
        r = np.zeros(n)
        r[np.asarray(rows, dtype=np.int64)] = residuals
        contrib = f.contributions()[0]
        y = fitted - contrib * w + r
    return f, X, y, fitted


def _shape(T, node_n):
    return _fallback.Shape(T, node_n)


def applicable(tree: DecisionTree) -> tuple[bool, bool, bool, bool]:
    t = tree.compact()
    n_int = len(t.internal_nodes())
    pairs = sum(int(t.status[t.left[c]] == INTERNAL) + int(t.status[t.right[c]] == INTERNAL)
                for c in t.internal_nodes())
    return True, n_int > 0, n_int > 0, pairs > 0


def draw_move_kind(tree: DecisionTree, rng, probs=MOVE_PROBS) -> int:
    """Move kind with the configured probabilities renormalized over applicable kinds."""
    t = tree.compact()
    n_int = len(t.internal_nodes())
    _, _, _, has_pair = applicable(t)
    return _fallback.draw_kind([float(q) for q in probs], n_int, 1 if has_pair else 0, rng)


def propose(tree: DecisionTree, kind, rng, X, rows, residuals=None, sigma2: float = 1.0,
            sigma_mu2: float = 1.0, hp: Optional[HyperParams] = None,
            probs=MOVE_PROBS) -> TreeProposal:
    """Draw one proposal of the given kind (name or code).

    Kinds that do not apply to ``tree`` fall back to Grow. The returned
    ``tree`` field is the proposed tree, or ``None`` when the draw produced no
    valid move (for example a Grow on a leaf with fewer than two rows).
    """
    if isinstance(kind, str):
        kind = MOVE_NAMES.index(kind.lower())
    ok_kinds = applicable(tree)
    if not ok_kinds[kind]:
        kind = GROW
    hp = hp or HyperParams()
    rows = np.asarray(rows, dtype=np.int64)
    if residuals is None:
        residuals = np.zeros(rows.size)
    f, Xc, y, fitted = _one_tree(tree, X, rows, residuals)
    T = _fallback.TreeBuf(f, 0)
    node_n, node_s, resid, _ = _fallback.node_stats(T, y.tolist(), fitted.tolist())
    shape = _shape(T, node_n)
    prop = _fallback.propose(T, kind, shape, node_n, node_s, resid, Xc.tolist(), Xc.shape[1],
                             sigma2, sigma_mu2, hp.alpha, hp.beta,
                             [float(q) for q in probs], rng)
    new_tree = None
    if prop.ok:
        _fallback.commit(T, prop, node_n, node_s, Xc.tolist())
        T.store(f, 0)
        new_tree = f.tree(0)
    return TreeProposal(kind, prop.ok, prop.node, prop.child, prop.var, prop.cut, prop.log_fwd,
                        prop.log_rev, prop.dlik, prop.dprior, new_tree)


class MHResult(NamedTuple):
    tree: DecisionTree
    leaves: np.ndarray
    accepted: bool
    kind: int


def mh_update_tree(tree: DecisionTree, leaves, residuals, rows, sigma2: float, hp: HyperParams,
                   rng, X, probs=MOVE_PROBS) -> MHResult:
    """One Metropolis-Hastings move on ``tree`` followed by a leaf refresh.

    Runs the same kernel the sampler uses, so the random stream is consumed
    exactly as in a full sweep.
    """
    rows = np.asarray(rows, dtype=np.int64)
    f, Xc, y, fitted = _one_tree(tree, X, rows, residuals, leaves)
    counters = np.zeros(8, dtype=np.int64)
    kernels.tree_sweep(f, Xc, y, fitted, float(sigma2), hp.leaf_prior_variance(), hp.alpha,
                       hp.beta, [float(q) for q in probs], rng, 0, counters)
    kind = int(np.argmax(counters[:4]))
    return MHResult(f.tree(0), f.leaf_values(0), bool(counters[4:].sum()), kind)
