"""Posterior summaries from a recorded chain.

Every credible interval uses linear interpolation between order statistics
(``numpy.quantile(..., method="linear")``). Per-draw quantities are stored on
the standardized response scale; the summaries here convert to original
units unless ``original=False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _backend
from .core import ContractError
from .ibp import IbpParams, new_column_rate

LEVEL = 0.95


def interval(draws, level: float = LEVEL, axis: int = 0):
    a = (1.0 - level) / 2.0
    q = np.quantile(np.asarray(draws, dtype=float), [a, 1.0 - a], axis=axis, method="linear")
    return q[0], q[1]


class Summary(NamedTuple):
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    draws: np.ndarray


def summarize(draws, level: float = LEVEL) -> Summary:
    draws = np.asarray(draws, dtype=float)
    lo, hi = interval(draws, level)
    return Summary(draws.mean(axis=0), lo, hi, draws)


@dataclass
class TraceStore:
    """Retained draws of one (or several merged) chains."""

    iters: np.ndarray
    sigma2: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    eta: np.ndarray
    K: np.ndarray
    split_counts: np.ndarray
    z: np.ndarray
    z_tree: np.ndarray
    fitted: Optional[np.ndarray]
    y_shift: float = 0.0
    y_scale: float = 1.0
    mode: str = "infinite"
    smu2: float = 1.0
    pdp: dict = field(default_factory=dict)
    ate: Optional[np.ndarray] = None
    pred_test: Optional[np.ndarray] = None
    ensembles: Optional[list] = None
    accept: Optional[np.ndarray] = None
    column_names: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @classmethod
    def allocate(cls, L, n, p, mode="infinite", y_shift=0.0, y_scale=1.0, smu2=1.0,
                 record_fitted=True, grids=None, ate=False, n_test=0, retain=False,
                 column_names=None) -> "TraceStore":
        return cls(
            iters=np.zeros(L, dtype=np.int64), sigma2=np.zeros(L), gamma=np.zeros(L),
            delta=np.zeros(L), eta=np.zeros(L), K=np.zeros(L, dtype=np.int64),
            split_counts=np.zeros((L, p), dtype=np.int64), z=np.zeros((L, p)),
            z_tree=np.zeros((L, p)), fitted=np.zeros((L, n)) if record_fitted else None,
            y_shift=float(y_shift), y_scale=float(y_scale), mode=mode, smu2=float(smu2),
            pdp={int(s): (np.asarray(g, dtype=float), np.zeros((L, len(g))))
                 for s, g in (grids or {}).items()},
            ate=np.zeros(L) if ate else None,
            pred_test=np.zeros((L, n_test)) if n_test else None,
            ensembles=[] if retain else None,
            column_names=list(column_names or []))

    def __len__(self) -> int:
        return self.iters.size

    @property
    def p(self) -> int:
        return self.split_counts.shape[1]

    @property
    def sigma(self) -> np.ndarray:
        """Noise standard deviation in original response units."""
        return np.sqrt(self.sigma2) * self.y_scale

    def to_original(self, values):
        return np.asarray(values) * self.y_scale + self.y_shift

    @classmethod
    def concat(cls, traces) -> "TraceStore":
        """Merge traces of independent chains run on the same data."""
        traces = list(traces)
        if not traces:
            raise ContractError("nothing to merge")
        t0 = traces[0]

        def cat(name):
            parts = [getattr(t, name) for t in traces]
            return None if parts[0] is None else np.concatenate(parts)

        ens = None
        if t0.ensembles is not None:
            ens = [e for t in traces for e in t.ensembles]
        pdp = {s: (g, np.concatenate([t.pdp[s][1] for t in traces])) for s, (g, _) in t0.pdp.items()}
        return cls(cat("iters"), cat("sigma2"), cat("gamma"), cat("delta"), cat("eta"), cat("K"),
                   cat("split_counts"), cat("z"), cat("z_tree"), cat("fitted"), t0.y_shift,
                   t0.y_scale, t0.mode, t0.smu2, pdp, cat("ate"), cat("pred_test"), ens,
                   sum(t.accept for t in traces) if t0.accept is not None else None,
                   list(t0.column_names), dict(t0.meta))


def default_grid(x, points: int = 20) -> np.ndarray:
    """Equally spaced points between the 5th and 95th percentiles of ``x``."""
    lo, hi = np.quantile(np.asarray(x, dtype=float), [0.05, 0.95], method="linear")
    return np.linspace(lo, hi, points)


def split_shares(counts, per_tree):
    """Per-draw variable shares: pooled over all splits, and averaged over splitting trees.

    A draw (or tree) without splits contributes zeros.
    """
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    pooled = counts / total if total > 0 else np.zeros_like(counts)
    per_tree = np.asarray(per_tree, dtype=float)
    tot = per_tree.sum(axis=1)
    used = tot > 0
    if used.any():
        tree_avg = (per_tree[used] / tot[used, None]).mean(axis=0)
    else:
        tree_avg = np.zeros_like(counts)
    return pooled, tree_avg


# -- in-sample fit ----------------------------------------------------------------

def estimate_f_insample(trace: TraceStore, i=None, original: bool = True, level: float = LEVEL):
    """Posterior mean and credible interval of the regression function at training rows.

    ``i`` selects one row (returns scalars) or, when ``None``, all rows.
    """
    if trace.fitted is None or len(trace) == 0:
        raise ContractError("trace holds no fitted draws")
    F = trace.fitted
    if i is not None:
        if not -F.shape[1] <= i < F.shape[1]:
            raise IndexError(f"row {i} out of range")
        F = F[:, i]
    if original:
        F = trace.to_original(F)
    lo, hi = interval(F, level)
    return F.mean(axis=0), lo, hi


# -- prediction -------------------------------------------------------------------

def predict_rows(G, m, n: int, gamma: float, eta: float, delta: float, sigma2: float,
                 smu2: float, alternations: int, rng, classic: bool = False,
                 plug_in: bool = False, delta_eta: Optional[float] = None,
                 one_minus_eta: Optional[float] = None, kernels=None) -> np.ndarray:
    """One posterior-predictive draw of the regression function at new rows.

    Parameters
    ----------
    G : (K, N) array
        Output of each tree at each new row.
    m : (K,) array
        Column counts of the training W.

    Each new row is treated as row ``n + 1`` of the buffet: existing columns
    switch on with probability ``(m - eta) / (n + delta)`` and a Poisson number
    of fresh columns adds root-only trees with prior leaf values. The entries
    for existing columns are then refreshed ``alternations`` times against a
    noisy response drawn from the current prediction.
    """
    G = np.ascontiguousarray(G, dtype=float)
    if classic:
        return G.sum(axis=0)
    m = np.asarray(m, dtype=float)
    params = IbpParams(gamma, delta, eta, delta_eta, one_minus_eta)
    a, s = params.a, params.s
    prob = ((m - 1.0) + a) / ((n - 1.0) + (a + s))
    if plug_in:
        return prob @ G
    prior_lo = np.log((m - 1.0) + a) - np.log((n - m) + s)
    kern = kernels or _backend.kernels
    return kern.predict_draw(G, np.ascontiguousarray(prob), np.ascontiguousarray(prior_lo),
                             new_column_rate(n, params), math.sqrt(smu2), float(sigma2),
                             int(alternations), rng)


def _arrays(e):
    return (np.ascontiguousarray(e.var, dtype=np.int32), np.ascontiguousarray(e.cut),
            np.ascontiguousarray(e.left, dtype=np.int32),
            np.ascontiguousarray(e.right, dtype=np.int32),
            np.ascontiguousarray(e.status, dtype=np.int8), np.ascontiguousarray(e.mu))


def _need_ensembles(trace):
    if not trace.ensembles:
        raise ContractError("trace has no retained ensembles")


def predict_out_of_sample(trace: TraceStore, X_new, rng=None, alternations: int = 5,
                          plug_in: bool = False, original: bool = True,
                          level: float = LEVEL) -> Summary:
    """Predictive mean and interval at new covariate rows from retained ensembles."""
    X_new = np.ascontiguousarray(X_new, dtype=float)
    if X_new.ndim != 2 or X_new.shape[1] != trace.p:
        raise ContractError(f"X_new must have {trace.p} columns")
    if trace.pred_test is not None and trace.ensembles is None:
        raise ContractError("use trace.pred_test for the rows predicted during the chain")
    _need_ensembles(trace)
    rng = rng if rng is not None else np.random.default_rng(0)
    kern = _backend.kernels
    n = int(trace.meta.get("n_train", trace.fitted.shape[1] if trace.fitted is not None else 0))
    out = np.zeros((len(trace.ensembles), X_new.shape[0]))
    for j, e in enumerate(trace.ensembles):
        G = kern.forest_contrib(*_arrays(e), X_new)
        out[j] = predict_rows(G, e.m, n, e.gamma, e.eta, e.delta, e.sigma2, trace.smu2,
                              alternations, rng, classic=e.W is None, plug_in=plug_in,
                              delta_eta=e.delta_eta, one_minus_eta=e.one_minus_eta)
    if original:
        out = trace.to_original(out)
    return summarize(out, level)


def predicted_test(trace: TraceStore, original: bool = True, level: float = LEVEL) -> Summary:
    """Summary of the new-row predictions accumulated during the chain."""
    if trace.pred_test is None:
        raise ContractError("no new rows were predicted during the chain")
    d = trace.to_original(trace.pred_test) if original else trace.pred_test
    return summarize(d, level)


# -- variable importance ----------------------------------------------------------

def variable_importance(trace: TraceStore, per_tree: bool = False) -> np.ndarray:
    """Average over draws of each variable's share of splitting rules."""
    if len(trace) == 0:
        raise ContractError("empty trace")
    return (trace.z_tree if per_tree else trace.z).mean(axis=0)


# -- partial dependence -----------------------------------------------------------

def _ensemble_pdp(trace, X, s, grid):
    kern = _backend.kernels
    X = np.ascontiguousarray(X, dtype=float)
    out = np.zeros((len(trace.ensembles), len(grid)))
    for j, e in enumerate(trace.ensembles):
        W = None if e.W is None else np.ascontiguousarray(e.W, dtype=np.uint8)
        out[j] = kern.forest_pdp(*_arrays(e), W, X, int(s), np.asarray(grid, dtype=float))
    return out


def partial_dependence(trace: TraceStore, dataset, s: int, grid=None, original: bool = True,
                       level: float = LEVEL):
    """Partial dependence of the fit on column ``s`` over ``grid``.

    Returns ``(grid, Summary)``. Uses the values accumulated during the chain
    when they cover ``s`` on the same grid, else the retained ensembles.
    """
    if s in trace.pdp and (grid is None or np.array_equal(np.asarray(grid, float), trace.pdp[s][0])):
        grid, draws = trace.pdp[s]
    else:
        grid = default_grid(dataset.X[:, s]) if grid is None else np.asarray(grid, dtype=float)
        if grid.size == 0:
            raise ContractError("grid is empty")
        _need_ensembles(trace)
        draws = _ensemble_pdp(trace, dataset.X, s, grid)
    if np.asarray(grid).size == 0:
        raise ContractError("grid is empty")
    if original:
        draws = trace.to_original(draws)
    return np.asarray(grid), summarize(draws, level)


# -- treatment effect -------------------------------------------------------------

def average_treatment_effect(trace: TraceStore, dataset, treatment_col: int,
                             original: bool = True, level: float = LEVEL) -> Summary:
    """Per-draw mean difference between predictions with the treatment set to 1 and to 0."""
    col = dataset.X[:, treatment_col]
    if not np.all((col == 0) | (col == 1)):
        raise ContractError("treatment column must be binary")
    if trace.ate is not None and trace.meta.get("ate_col", treatment_col) == treatment_col:
        draws = trace.ate
    else:
        _need_ensembles(trace)
        both = _ensemble_pdp(trace, dataset.X, treatment_col, np.array([0.0, 1.0]))
        draws = both[:, 1] - both[:, 0]
    if original:
        draws = draws * trace.y_scale
    return summarize(draws, level)
