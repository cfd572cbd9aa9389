"""MCMC over trees, leaf values, the activation matrix W and the noise and
buffet hyperparameters.

One sweep runs, in order: a Metropolis-Hastings move plus a leaf refresh for
every tree (backfitting on the cached fitted values), a Gibbs pass over the
rows of W with tree births, the noise variance draw, then the buffet
parameters ``gamma``, ``eta`` and ``delta``. In classic mode W stays all ones
and only the first and third steps run.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .core import ContractError, Dataset, HyperParams, ModelState
from .forest import Forest
from .ibp import (IbpParams, log_new_column_rate, prior_log_odds, update_eta_delta_params,
                  update_gamma)
from .inference import TraceStore, default_grid, predict_rows, split_shares
from .trees import MOVE_PROBS


@dataclass
class SamplerConfig:
    """Sampler settings beyond the prior.

    Attributes
    ----------
    k_trunc : int
        Largest number of trees that may be born at one row.
    alternations : int
        Rounds of alternating noisy-response and W draws when predicting new rows.
    init_trees : int
        Root-only trees (with all-ones W columns) at the start of an infinite-mode chain.
    row_order : {"fixed", "random"}
        Order of the W row updates.
    birth : {"collapsed", "two_phase"}
        How tree births at a row are drawn. ``"collapsed"`` integrates the
        new root leaf values out of the count's conditional and is exact;
        ``"two_phase"`` conditions the count on leaf values drawn from the
        prior and then refreshes them, which is only approximately invariant.
    refresh_every : int
        Recompute the fitted-value cache from scratch every this many sweeps.
    pdp_vars, pdp_grid_points, pdp_grids
        Variables whose partial dependence is accumulated during the chain.
    ate_col : int, optional
        Binary treatment column whose average effect is accumulated.
    X_test : array, optional
        New rows predicted at every retained draw.
    """

    hp: HyperParams = field(default_factory=HyperParams)
    k_trunc: int = 10
    alternations: int = 5
    init_trees: int = 10
    init_gamma: float = 1.0
    init_eta: float = -1.0
    init_delta: float = 2.0
    move_probs: Sequence[float] = MOVE_PROBS
    row_order: str = "fixed"
    birth: str = "collapsed"
    debug: bool = False
    refresh_every: int = 100
    retain_ensembles: bool = False
    record_fitted: bool = True
    pdp_vars: Sequence[int] = ()
    pdp_grid_points: int = 20
    pdp_grids: Optional[dict] = None
    ate_col: Optional[int] = None
    X_test: Optional[np.ndarray] = None
    plug_in: bool = False
    backend: Optional[str] = None

    def __post_init__(self):
        if self.k_trunc < 1:
            raise ContractError("k_trunc must be at least 1")
        if self.alternations < 0:
            raise ContractError("alternations must be non-negative")
        if self.row_order not in ("fixed", "random"):
            raise ContractError("row_order must be 'fixed' or 'random'")
        if self.birth not in ("collapsed", "two_phase"):
            raise ContractError("birth must be 'collapsed' or 'two_phase'")
        if len(self.move_probs) != 4 or min(self.move_probs) < 0 or self.move_probs[0] <= 0:
            raise ContractError("move_probs needs four non-negative weights with grow > 0")
        IbpParams(self.init_gamma, self.init_delta, self.init_eta)


@dataclass
class FitCache:
    """``fitted[i]`` is the weighted ensemble output at training row ``i``; per-tree
    contributions are read through ``forest.leaf_of`` and ``forest.mu``."""

    fitted: np.ndarray

    def contribution(self, forest: Forest, k: int) -> np.ndarray:
        return forest.mu[k, forest.leaf_of[k]]


def lambda_effective(hp: HyperParams, y_scale: float) -> float:
    """Noise-prior scale on the standardized response."""
    if hp.lambda_scale == "original":
        return hp.lam / (y_scale * y_scale)
    return hp.lam


def residuals_for_tree(k: int, forest: Forest, cache: FitCache, y):
    """Rows active for tree ``k`` and their partial residuals against the other trees."""
    if forest.m[k] < 1:
        raise ContractError(f"tree {k} has no active rows")
    rows = np.flatnonzero(forest.W[k])
    r = np.asarray(y)[rows] - cache.fitted[rows] + cache.contribution(forest, k)[rows]
    return rows, r


def update_sigma2(y, fitted, nu: float, lam: float, rng) -> float:
    """Inverse-gamma full conditional of the noise variance."""
    resid = np.asarray(y) - np.asarray(fitted)
    ssr = float(resid @ resid)
    shape = 0.5 * (nu + resid.size)
    scale = 0.5 * (nu * lam + ssr)
    return scale / float(rng.standard_gamma(shape))


class Chain:
    """One sampler chain: owns the forest, the fitted cache and the parameters."""

    def __init__(self, data: Dataset, cfg: SamplerConfig, rng):
        self.data = data
        self.cfg = cfg
        self.hp = cfg.hp
        self.rng = rng
        self.kernels = _backend.get(cfg.backend) if cfg.backend else _backend.kernels
        self.X = np.ascontiguousarray(data.X, dtype=float)
        self.y = np.ascontiguousarray(data.y, dtype=float)
        self.n, self.p = self.X.shape
        self.classic = self.hp.mode == "classic"
        self.smu2 = self.hp.leaf_prior_variance()
        self.lam = lambda_effective(self.hp, data.y_scale)
        k0 = self.hp.classic_K if self.classic else cfg.init_trees
        self.forest = Forest(self.n, cap_trees=max(16, k0 + cfg.k_trunc), cap_nodes=16)
        for _ in range(k0):
            self.forest.add_root_tree(0.0)
        self.cache = FitCache(self.forest.fitted())
        s2 = float(np.var(self.y))
        self.state = ModelState(self.forest, s2 if s2 > 0 else self.lam, cfg.init_gamma,
                                cfg.init_eta, cfg.init_delta)
        self.logfact = np.array([math.lgamma(k + 1.0) for k in range(cfg.k_trunc + 1)])
        self.counters = np.zeros(8, dtype=np.int64)
        self.probs = [float(q) for q in cfg.move_probs]
        self.sweeps = 0

    # -- steps --------------------------------------------------------------
    def update_trees(self):
        f, kern, st = self.forest, self.kernels, self.state
        k = 0
        while True:
            k = kern.tree_sweep(f, self.X, self.y, self.cache.fitted, st.sigma2, self.smu2,
                                self.hp.alpha, self.hp.beta, self.probs, self.rng, k,
                                self.counters)
            if k >= f.K:
                break
            f.ensure_node_capacity(2 * f.cap_nodes)

    def update_w_rows(self, rows=None):
        f, st, cfg = self.forest, self.state, self.cfg
        params = self.ibp_params()
        lograte = log_new_column_rate(self.n - 1, params)
        prior_lo = prior_log_odds(self.n, params)
        if rows is not None:
            spans = [(int(i), int(i) + 1) for i in rows]
        elif cfg.row_order == "random":
            spans = [(int(i), int(i) + 1) for i in self.rng.permutation(self.n)]
        else:
            spans = [(0, self.n)]
        for a, b in spans:
            i = a
            while i < b:
                i = self.kernels.w_sweep(f, self.y, self.cache.fitted, st.sigma2, self.smu2,
                                         prior_lo, lograte, self.logfact, cfg.k_trunc,
                                         self.rng, i, b, cfg.birth == "collapsed")
                if i < b:
                    f.ensure_tree_capacity(f.K + cfg.k_trunc)
        f.compact()

    def update_parameters(self):
        st = self.state
        st.sigma2 = update_sigma2(self.y, self.cache.fitted, self.hp.nu, self.lam, self.rng)
        if self.classic:
            return
        st.gamma = update_gamma(self.forest.K, self.n, self.ibp_params(), self.hp, self.rng)
        new = update_eta_delta_params(self.forest.m[: self.forest.K], self.n, self.ibp_params(),
                                      self.hp, self.rng)
        st.eta, st.delta = new.eta, new.delta
        st.delta_eta, st.one_minus_eta = new.delta_eta, new.one_minus_eta

    def ibp_params(self) -> IbpParams:
        st = self.state
        return IbpParams(st.gamma, st.delta, st.eta, st.delta_eta, st.one_minus_eta)

    def sweep(self):
        self.update_trees()
        if not self.classic:
            self.update_w_rows()
        self.update_parameters()
        self.sweeps += 1
        if self.cfg.debug:
            self.audit()
        if self.sweeps % self.cfg.refresh_every == 0:
            self.cache.fitted[:] = self.forest.fitted()

    def audit(self):
        f = self.forest
        f.audit(self.X, self.cache.fitted, tol=1e-9)
        self.state.check_constraints()
        K = f.K
        assert np.all(f.m[:K] >= 1), "dead column survived compaction"
        if self.classic:
            assert K == self.hp.classic_K and np.all(f.W[:K] == 1)
        # leaves may lose all active rows through W updates; proposals alone
        # are required to keep every cell occupied


def gibbs_sweep(chain: Chain) -> ModelState:
    """Advance ``chain`` by one full sweep and return its state."""
    chain.sweep()
    return chain.state


def default_config(hp: Optional[HyperParams] = None, **kw) -> SamplerConfig:
    return SamplerConfig(hp=hp or HyperParams(), **kw)


def run_chain(data: Dataset, cfg: Optional[SamplerConfig] = None, rng=None,
              progress=None) -> TraceStore:
    """Burn in, then record every ``thin``-th of ``iterations`` sweeps.

    ``rng`` defaults to a generator seeded with ``cfg.hp.seed``. Prediction
    draws for ``cfg.X_test`` use a separate stream spawned from ``rng`` so the
    chain itself does not depend on whether predictions are requested.
    """
    cfg = cfg or SamplerConfig()
    hp = cfg.hp
    if rng is None:
        rng = np.random.default_rng(hp.seed)
    pred_rng = rng.spawn(1)[0]
    chain = Chain(data, cfg, rng)
    n, p = chain.n, chain.p
    n_keep = hp.iterations // hp.thin
    X_test = None if cfg.X_test is None else np.ascontiguousarray(cfg.X_test, dtype=float)
    if X_test is not None and X_test.shape[1] != p:
        raise ContractError("X_test has the wrong number of columns")
    grids = {}
    for s in cfg.pdp_vars:
        g = None if cfg.pdp_grids is None else cfg.pdp_grids.get(s)
        grids[int(s)] = (np.asarray(g, dtype=float) if g is not None
                         else default_grid(chain.X[:, s], cfg.pdp_grid_points))
    if cfg.ate_col is not None:
        col = chain.X[:, cfg.ate_col]
        if not np.all((col == 0) | (col == 1)):
            raise ContractError("treatment column must be binary")
    trace = TraceStore.allocate(n_keep, n, p, mode=hp.mode, y_shift=data.y_shift,
                                y_scale=data.y_scale, smu2=chain.smu2,
                                record_fitted=cfg.record_fitted, grids=grids,
                                ate=cfg.ate_col is not None,
                                n_test=0 if X_test is None else X_test.shape[0],
                                retain=cfg.retain_ensembles,
                                column_names=list(data.column_names))
    trace.meta["backend"] = chain.kernels.NAME
    trace.meta["n_train"] = n
    trace.meta["ate_col"] = cfg.ate_col
    t0 = time.perf_counter()
    total = hp.burn_in + hp.iterations
    j = 0
    kern = chain.kernels
    for it in range(total):
        chain.sweep()
        if progress is not None:
            progress(it + 1, total)
        if it < hp.burn_in or (it - hp.burn_in + 1) % hp.thin:
            continue
        if j >= n_keep:
            continue
        f, st = chain.forest, chain.state
        K = f.K
        counts = f.split_counts(p)
        trace.iters[j] = it - hp.burn_in + 1
        trace.sigma2[j] = st.sigma2
        trace.gamma[j] = st.gamma
        trace.delta[j] = st.delta
        trace.eta[j] = st.eta
        trace.K[j] = K
        trace.split_counts[j] = counts
        trace.z[j], trace.z_tree[j] = split_shares(counts, f.split_counts_per_tree(p))
        if trace.fitted is not None:
            trace.fitted[j] = chain.cache.fitted
        W = None if chain.classic else f.W[:K]
        arrays = (f.var[:K], f.cut[:K], f.left[:K], f.right[:K], f.status[:K], f.mu[:K])
        for s, (grid, draws) in trace.pdp.items():
            draws[j] = kern.forest_pdp(*arrays, W, chain.X, s, grid)
        if trace.ate is not None:
            both = kern.forest_pdp(*arrays, W, chain.X, int(cfg.ate_col), np.array([0.0, 1.0]))
            trace.ate[j] = both[1] - both[0]
        if X_test is not None:
            G = kern.forest_contrib(*arrays, X_test)
            trace.pred_test[j] = predict_rows(G, f.m[:K], n, st.gamma, st.eta, st.delta,
                                              st.sigma2, chain.smu2, cfg.alternations, pred_rng,
                                              classic=chain.classic, plug_in=cfg.plug_in,
                                              delta_eta=st.delta_eta,
                                              one_minus_eta=st.one_minus_eta, kernels=kern)
        if trace.ensembles is not None:
            e = f.snapshot()
            if chain.classic:
                e.W = None
            e.sigma2, e.gamma, e.delta, e.eta = st.sigma2, st.gamma, st.delta, st.eta
            e.delta_eta, e.one_minus_eta = st.delta_eta, st.one_minus_eta
            trace.ensembles.append(e)
        j += 1
    trace.accept = chain.counters.copy()
    trace.meta["seconds"] = time.perf_counter() - t0
    return trace
