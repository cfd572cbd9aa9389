"""Synthetic data generators, CSV ingestion and train/test splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _fallback
from .core import ContractError, Dataset, DecisionTree, HyperParams
from .ibp import IbpParams, sample_prior

DGP_KINDS = ("friedman", "clustered_friedman", "ibp_synthetic", "causal")
MISSING = ("", "NA")


def friedman_mean(X) -> np.ndarray:
    """Noiseless Friedman response from the first five columns of ``X``."""
    X = np.asarray(X, dtype=float)
    return (10.0 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20.0 * (X[:, 2] - 0.5) ** 2
            + 10.0 * X[:, 3] + 5.0 * X[:, 4])


def _names(p, prefix="x"):
    return [f"{prefix}{j + 1}" for j in range(p)]


def gen_friedman(n: int, p: int, noise_sd: float = 1.0, rng=None) -> Dataset:
    """Uniform covariates on the unit cube with the Friedman response plus Gaussian noise."""
    if p < 5:
        raise ContractError("friedman data needs p >= 5")
    rng = rng if rng is not None else np.random.default_rng()
    X = rng.random((n, p))
    f = friedman_mean(X)
    y = f + noise_sd * rng.standard_normal(n)
    return Dataset.from_raw(X, y, _names(p), truth={"f": f, "noise_sd": noise_sd})


def beta_params(p: int):
    """Per-column Beta shape parameters giving column means ``j / (p + 1)``."""
    j = np.arange(1, p + 1, dtype=float)
    a = (j / (p + 1)) ** 2
    b = a * ((p + 1) / j - 1.0)
    return a, b


def gen_clustered_friedman(n: int = 200, p: int = 9, K: int = 5, noise_sd: float = 1.0,
                           rng=None):
    """Friedman response on a group-specific window of five columns.

    Group ``k`` (1-based) uses columns ``k .. k+4``; groups are equally sized
    contiguous row blocks. Returns ``(dataset, labels)``; labels are 1-based.
    """
    if p < 4 + K:
        raise ContractError("clustered data needs p >= K + 4")
    if K < 1 or n % K:
        raise ContractError("n must be divisible by K")
    rng = rng if rng is not None else np.random.default_rng()
    a, b = beta_params(p)
    X = rng.beta(a, b, size=(n, p))
    labels = np.repeat(np.arange(1, K + 1), n // K)
    f = np.zeros(n)
    for k in range(1, K + 1):
        rows = labels == k
        f[rows] = friedman_mean(X[rows][:, k - 1:k + 4])
    y = f + noise_sd * rng.standard_normal(n)
    return Dataset.from_raw(X, y, _names(p), truth={"f": f, "labels": labels,
                                                    "noise_sd": noise_sd}), labels


def random_tree(X, rows, rng, alpha: float = 0.95, beta: float = 2.0):
    """Tree drawn from the branching prior with rules chosen over ``rows``.

    A node that draws a split but has no valid rule stays a leaf.
    """
    Xl = np.asarray(X, dtype=float).tolist()
    p = len(Xl[0])

    def grow(node_rows, d):
        if rng.random() >= alpha * (1.0 + d) ** (-beta):
            return None
        rule = _fallback.choose_rule(Xl, node_rows, p, rng)
        if rule is None:
            return None
        v, c = rule
        lt = [r for r in node_rows if Xl[r][v] <= c]
        rt = [r for r in node_rows if Xl[r][v] > c]
        return (v, c, grow(lt, d + 1), grow(rt, d + 1))

    return DecisionTree.from_splits(grow(list(rows), 0))


def gen_ibp_synthetic(n: int = 100, gamma: float = 10.0, delta: float = 20.0,
                      eta: float = -5.0, noise_sd: float = 1.0, rng=None, p: int = 10,
                      leaf_sd: float = 1.0, hp: Optional[HyperParams] = None) -> Dataset:
    """Response generated from the model itself.

    W is drawn from the buffet prior; each column gets a tree from the
    branching prior with rules over that column's active rows and N(0, leaf_sd^2)
    leaf values; ``y = sum_k W_ik g_k(X_i) + noise``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    hp = hp or HyperParams()
    params = IbpParams(gamma, delta, eta)
    X = rng.random((n, p))
    W = sample_prior(n, params, rng).entries
    f = np.zeros(n)
    for k in range(W.shape[1]):
        rows = np.flatnonzero(W[:, k])
        t = random_tree(X, rows.tolist(), rng, hp.alpha, hp.beta)
        mu = leaf_sd * rng.standard_normal(t.n_leaves)
        f += W[:, k] * mu[t.leaf_position()[t.route(X)]]
    y = f + noise_sd * rng.standard_normal(n)
    return Dataset.from_raw(X, y, _names(p), truth={"f": f, "K": W.shape[1],
                                                    "fill": float(W.mean()) if W.size else 0.0,
                                                    "noise_sd": noise_sd})


def gen_causal(n: int = 500, rng=None) -> Dataset:
    """Confounded binary-treatment design with a true average effect of 1.

    Column 0 is the treatment ``T``; columns 1-5 are the covariates.
    """
    rng = rng if rng is not None else np.random.default_rng()
    x1 = rng.standard_normal(n)
    x2 = (rng.random(n) < 0.5).astype(float)
    x35 = rng.random((n, 3))
    x3 = x35[:, 0]
    prop = 1.0 / (1.0 + np.exp(-(0.5 + x1 - 0.7 * x2 - 0.3 * np.sin(2 * np.pi * x3))))
    T = (rng.random(n) < prop).astype(float)
    tau = 1.0 + 0.5 * x1
    f = T * tau + 2.0 + 0.3 * x1 ** 2 - 0.5 * x2 + np.sin(2 * np.pi * x3)
    y = f + rng.standard_normal(n)
    X = np.column_stack([T, x1, x2, x35])
    return Dataset.from_raw(X, y, ["T"] + _names(5), truth={
        "f": f, "tau": tau, "propensity": prop, "ate": 1.0, "ate_sample": float(tau.mean())})


@dataclass
class DgpSpec:
    kind: str
    n: int
    p: Optional[int] = None
    noise_sd: float = 1.0
    gamma: Optional[float] = None
    delta: Optional[float] = None
    eta: Optional[float] = None
    K: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DGP_KINDS:
            raise ContractError(f"unknown dgp {self.kind!r}; choose from {DGP_KINDS}")
        if self.n is None or self.n < 1:
            raise ContractError("n must be a positive integer")
        if self.kind == "friedman" and (self.p is None or self.p < 5):
            raise ContractError("friedman needs p >= 5")
        if self.kind == "clustered_friedman":
            k = 5 if self.K is None else self.K
            p = 4 + k if self.p is None else self.p
            if p < 4 + k or self.n % k:
                raise ContractError("clustered_friedman needs p >= K + 4 and n divisible by K")
        if self.kind == "ibp_synthetic":
            if None in (self.gamma, self.delta, self.eta):
                raise ContractError("ibp_synthetic needs gamma, delta and eta")
            IbpParams(self.gamma, self.delta, self.eta)

    def generate(self, rng=None) -> Dataset:
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        if self.kind == "friedman":
            return gen_friedman(self.n, self.p, self.noise_sd, rng)
        if self.kind == "clustered_friedman":
            k = 5 if self.K is None else self.K
            return gen_clustered_friedman(self.n, 4 + k if self.p is None else self.p, k,
                                          self.noise_sd, rng)[0]
        if self.kind == "ibp_synthetic":
            return gen_ibp_synthetic(self.n, self.gamma, self.delta, self.eta, self.noise_sd,
                                     rng, p=10 if self.p is None else self.p)
        return gen_causal(self.n, rng)


# -- files ------------------------------------------------------------------------

def _as_float(s):
    try:
        return float(s)
    except ValueError:
        return None


def _read_table(path, target: Optional[str], treatment: Optional[str] = None):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if any(len(r) != len(header) for r in body):
        raise ValueError(f"{path}: ragged rows")
    if target is not None and target not in header:
        raise ContractError(f"target column {target!r} not found")
    if treatment is not None and treatment not in header:
        raise ContractError(f"treatment column {treatment!r} not found")
    body = [[c.strip() for c in r] for r in body]
    body = [r for r in body if not any(c in MISSING for c in r)]
    if not body:
        raise ContractError("no complete rows remain")
    cols = list(zip(*body))
    ti = header.index(target) if target is not None else -1
    y = None
    if ti >= 0:
        y = [_as_float(v) for v in cols[ti]]
        if any(v is None for v in y):
            raise ContractError("target column must be numeric")
        y = np.array(y)
    names, blocks, enc = [], [], {}
    for j, name in enumerate(header):
        if j == ti:
            continue
        vals = [_as_float(v) for v in cols[j]]
        if all(v is not None for v in vals):
            names.append(name)
            blocks.append(np.array(vals, dtype=float)[:, None])
            continue
        levels = sorted(set(cols[j]))
        start = len(names)
        names.extend(f"{name}_{lev}" for lev in levels)
        arr = np.array(cols[j])
        blocks.append(np.column_stack([(arr == lev).astype(float) for lev in levels]))
        enc[name] = (start, len(names))
    if not blocks:
        raise ContractError("no covariate columns")
    X = np.hstack(blocks)
    if treatment is not None:
        if treatment in enc:
            raise ContractError("treatment column must be numeric 0/1")
        t = X[:, names.index(treatment)]
        if not np.all((t == 0) | (t == 1)):
            raise ContractError("treatment column must be binary")
    return X, y, names, enc


def load_csv(path, target: str, treatment: Optional[str] = None) -> Dataset:
    """Read a headed CSV, drop rows with missing cells and dummy-code text columns.

    Text columns become one 0/1 column per level (sorted), named
    ``<column>_<level>``; ``encoding_map`` records their index ranges.
    """
    X, y, names, enc = _read_table(path, target, treatment)
    return Dataset.from_raw(X, y, names, enc)


def read_covariates(path, target: Optional[str] = None):
    """Covariate matrix, column names and (if ``target`` is a column) the raw response."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    if target is not None and target not in header:
        target = None
    X, y, names, _ = _read_table(path, target)
    return X, names, y


def write_csv(dataset: Dataset, path, target: str = "y", extra: Optional[dict] = None):
    """Write covariates and the original-scale response with round-trip precision."""
    extra = extra or {}
    y = dataset.y_original()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(dataset.column_names) + [target] + list(extra))
        cols = [np.asarray(v) for v in extra.values()]
        for i in range(dataset.n):
            w.writerow([repr(float(v)) for v in dataset.X[i]] + [repr(float(y[i]))]
                       + [repr(float(c[i])) for c in cols])


def split_indices(n: int, fraction: float, rng):
    """Sorted train and test row indices of a uniformly random partition."""
    if not 0.0 < fraction < 1.0:
        raise ContractError("fraction must lie in (0, 1)")
    n_train = int(math.floor(fraction * n + 0.5))
    if n_train < 1 or n_train >= n:
        raise ContractError("split leaves one side empty")
    perm = rng.permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split(dataset: Dataset, fraction: float = 0.8, rng=None):
    """Random train/test partition; the test response uses the train standardization."""
    rng = rng if rng is not None else np.random.default_rng()
    tr, te = split_indices(dataset.n, fraction, rng)
    train = dataset.subset(tr)
    return train, dataset.subset(te, train.y_shift, train.y_scale)
