"""Three-parameter Indian buffet process: prior simulation, conditionals,
the exchangeable feature probability function and hyperparameter updates.

Formulas are written in terms of ``a = 1 - eta`` and ``s = delta + eta``
(so ``delta + 1 = a + s``). Both are positive on the whole parameter space
and stay exact where ``eta`` is within rounding of 1 or where ``delta`` and
``eta`` nearly cancel. All gamma-function ratios are evaluated in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ContractError, HyperParams, WeightMatrix

POISSON_INVERSION_MAX = 30.0


@dataclass(frozen=True)
class IbpParams:
    """Mass ``gamma > 0``, concentration ``delta > -eta`` and discount ``eta < 1``.

    ``delta_eta`` (``delta + eta``) and ``one_minus_eta`` default to values
    computed from ``delta`` and ``eta``; pass them to keep them exact.
    """

    gamma: float
    delta: float
    eta: float
    delta_eta: Optional[float] = None
    one_minus_eta: Optional[float] = None

    def __post_init__(self):
        if self.delta_eta is None:
            object.__setattr__(self, "delta_eta", self.delta + self.eta)
        if self.one_minus_eta is None:
            object.__setattr__(self, "one_minus_eta", 1.0 - self.eta)
        if not self.gamma > 0:
            raise ContractError("gamma must be positive")
        if not self.one_minus_eta > 0:
            raise ContractError("eta must be below 1")
        if not self.delta_eta > 0:
            raise ContractError("delta + eta must be positive")

    @classmethod
    def from_as(cls, gamma: float, a: float, s: float) -> "IbpParams":
        """Build from ``a = 1 - eta`` and ``s = delta + eta``."""
        eta = 1.0 - a
        return cls(gamma, s - eta, eta, s, a)

    @property
    def a(self) -> float:
        return self.one_minus_eta

    @property
    def s(self) -> float:
        return self.delta_eta


def rising_factorial_log(x: float, n: int) -> float:
    """``log(x (x+1) ... (x+n-1))``; the empty product is 1."""
    if n < 0:
        raise ContractError("n must be non-negative")
    if n == 0:
        return 0.0
    if not x > 0:
        raise ValueError(f"rising factorial of {x} has a non-positive factor")
    if n <= 64:
        return math.fsum(math.log(x + j) for j in range(n))
    return math.lgamma(x + n) - math.lgamma(x)


def existing_column_prob(m_k: int, n_prev: int, params: IbpParams) -> float:
    """Probability that the next row activates a column already used ``m_k`` times."""
    if not 1 <= m_k <= n_prev:
        raise ContractError("existing_column_prob needs 1 <= m_k <= n_prev")
    a, s = params.a, params.s
    return ((m_k - 1) + a) / ((n_prev - 1) + (a + s))


def log_new_column_rate(n_prev: int, params: IbpParams) -> float:
    if n_prev < 0:
        raise ContractError("n_prev must be non-negative")
    if n_prev == 0:
        return math.log(params.gamma)
    s = params.s
    return (math.log(params.gamma) + rising_factorial_log(s, n_prev)
            - rising_factorial_log(params.a + s, n_prev))


def new_column_rate(n_prev: int, params: IbpParams) -> float:
    """Poisson rate of fresh columns in row ``n_prev + 1``."""
    if n_prev == 0:
        return params.gamma
    return math.exp(log_new_column_rate(n_prev, params))


def _columns_weight(n: int, a: float, s: float) -> float:
    if n <= 0:
        return 0.0
    eta = 1.0 - a
    if abs(eta) > 1e-2:
        # the sum telescopes: sum_{i<n} (s)_i/(d+1)_i = (d - (s)_n/(d+1)_{n-1}) / -eta
        d = (a + s) - 1.0
        r = math.exp(math.lgamma(s + n) - math.lgamma(s) - math.lgamma(a + s + (n - 1))
                     + math.lgamma(a + s))
        return (r - d) / eta
    j = np.arange(n - 1, dtype=float)
    return float(1.0 + np.sum(np.cumprod((s + j) / ((a + s) + j))))


def expected_columns_weight(n: int, eta: float, delta: float,
                            delta_eta: Optional[float] = None) -> float:
    """``sum_{i=1}^n (eta+delta)_{i-1} / (delta+1)_{i-1}``, so that ``E[K_n] = gamma`` times this."""
    s = eta + delta if delta_eta is None else delta_eta
    return _columns_weight(n, 1.0 - eta, s)


def poisson(rate: float, rng) -> int:
    """Poisson draw: inversion below ``POISSON_INVERSION_MAX``, numpy's exact PTRS above."""
    if rate <= 0:
        return 0
    if rate >= POISSON_INVERSION_MAX:
        return int(rng.poisson(rate))
    u = rng.random()
    k = 0
    p = math.exp(-rate)
    cdf = p
    while u > cdf:
        k += 1
        p *= rate / k
        cdf += p
        if p < 1e-300 and k > rate:
            break
    return k


def prior_log_odds(n: int, params: IbpParams) -> np.ndarray:
    """Entry ``m`` is the prior log-odds that a row switches a column on given
    that ``m`` of the other ``n - 1`` rows use it (entry 0 is unused)."""
    m = np.arange(n, dtype=float)
    out = np.zeros(n)
    out[1:] = np.log((m[1:] - 1.0) + params.a) - np.log((n - 1.0 - m[1:]) + params.s)
    return out


def sample_prior(n: int, params: IbpParams, rng) -> WeightMatrix:
    """Draw an ``n``-row binary matrix by the sequential buffet construction."""
    if n < 1:
        raise ContractError("n must be at least 1")
    cols: list[np.ndarray] = []
    counts: list[int] = []
    for i in range(n):
        # row i has i predecessors
        for k in range(len(cols)):
            if counts[k] and rng.random() < existing_column_prob(counts[k], i, params):
                cols[k][i] = 1
                counts[k] += 1
        for _ in range(poisson(new_column_rate(i, params), rng)):
            c = np.zeros(n, dtype=np.uint8)
            c[i] = 1
            cols.append(c)
            counts.append(1)
    entries = np.column_stack(cols) if cols else np.zeros((n, 0), dtype=np.uint8)
    return WeightMatrix(entries)


def _count_histogram(m) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(m, dtype=np.int64)
    if m.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    values, mult = np.unique(m, return_counts=True)
    return values, mult


def _efpf_as(K, values, mult, n, gamma, a, s) -> float:
    out = -math.lgamma(K + 1.0)
    if K:
        out += K * (math.log(gamma) - rising_factorial_log(a + s, n - 1))
    out -= gamma * _columns_weight(n, a, s)
    if len(values):
        lg, a0, s0 = math.lgamma, math.lgamma(a), math.lgamma(s)
        for v, c in zip(values.tolist(), mult.tolist()):
            out += c * ((lg((v - 1) + a) - a0) + (lg(s + (n - v)) - s0))
    return out


def efpf_log(K_n: int, m, n: int, params: IbpParams) -> float:
    """Log probability of a matrix with ``K_n`` columns whose sums are ``m``."""
    m = np.asarray(m, dtype=np.int64).ravel()
    if m.size != K_n:
        raise ContractError("len(m) must equal K_n")
    if m.size and (m.min() < 1 or m.max() > n):
        raise ValueError("column counts must lie in 1..n")
    values, mult = _count_histogram(m)
    return _efpf_as(K_n, values, mult, n, params.gamma, params.a, params.s)


def update_gamma(K_n: int, n: int, params: IbpParams, priors: HyperParams, rng) -> float:
    """Draw the mass parameter from its Gamma full conditional."""
    rate = _columns_weight(n, params.a, params.s) + priors.b_gamma
    return float(rng.gamma(K_n + priors.a_gamma, 1.0 / rate))


def slice_sample(logf, x0: float, rng, width: float = 1.0, max_steps: int = 50) -> float:
    """One univariate slice-sampling update with stepping out and shrinkage.

    Parameters
    ----------
    logf : callable
        Log density up to a constant; may return ``-inf``.
    x0 : float
        Current point, where ``logf`` must be finite.
    width : float
        Initial bracket width.
    max_steps : int
        Cap on the total number of step-out expansions.
    """
    f0 = logf(x0)
    logy = f0 + math.log(rng.random())
    left = x0 - width * rng.random()
    right = left + width
    j = int(max_steps * rng.random())
    k = max_steps - 1 - j
    while j > 0 and logf(left) > logy:
        left -= width
        j -= 1
    while k > 0 and logf(right) > logy:
        right += width
        k -= 1
    while True:
        x1 = left + (right - left) * rng.random()
        if logf(x1) > logy:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
        if right - left < 1e-14:
            return x0


def eta_delta_log_target(u: float, v: float, K_n: int, values, mult, n: int, gamma: float,
                         priors: HyperParams) -> float:
    """Log target on ``u = log(1 - eta)``, ``v = log(delta + eta)``, Jacobian included."""
    if not (abs(u) < 700 and abs(v) < 700):
        return -math.inf
    a = math.exp(u)
    s = math.exp(v)
    try:
        ll = _efpf_as(K_n, values, mult, n, gamma, a, s)
    except (ValueError, OverflowError):
        return -math.inf
    if not math.isfinite(ll):
        return -math.inf
    return ll + priors.a_eta * u - priors.b_eta * a + priors.a_delta * v - priors.b_delta * s


def update_eta_delta(W, n: int, params: IbpParams, priors: HyperParams, rng,
                     width: float = 1.0, max_steps: int = 50) -> tuple[float, float]:
    """Slice-sample ``eta`` then ``delta`` on their log scales.

    ``W`` may be a :class:`WeightMatrix` or a vector of column counts.
    Returns ``(eta, delta)``; :func:`update_eta_delta_params` returns the
    full parameter object with ``1 - eta`` and ``delta + eta`` kept exact.
    """
    p = update_eta_delta_params(W, n, params, priors, rng, width, max_steps)
    return p.eta, p.delta


def update_eta_delta_params(W, n: int, params: IbpParams, priors: HyperParams, rng,
                            width: float = 1.0, max_steps: int = 50) -> IbpParams:
    m = W.counts if isinstance(W, WeightMatrix) else np.asarray(W)
    m = m[m > 0]
    K_n = int(m.size)
    values, mult = _count_histogram(m)
    g = params.gamma
    u = math.log(params.a)
    v = math.log(params.s)
    u = slice_sample(lambda x: eta_delta_log_target(x, v, K_n, values, mult, n, g, priors),
                     u, rng, width, max_steps)
    v = slice_sample(lambda x: eta_delta_log_target(u, x, K_n, values, mult, n, g, priors),
                     v, rng, width, max_steps)
    return IbpParams.from_as(g, math.exp(u), math.exp(v))
