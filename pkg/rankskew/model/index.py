"""Ranked index and its futures price.

    I_t = sum_{j <= n_top} w_j S^(j)_t,    S^(1)_t >= S^(2)_t >= ...

Only terminal prices are ranked; the index futures F_{0,T} = E[I_T] is the
ATM strike for every option on the index.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.stats import norm

from rankskew.model.dynamics import euler_simulate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndexSpec:
    """Initial prices and weights of a top-`n_top` index.
    Args:
        s0 (tuple): Initial prices, non-increasing, at most one tie.
        w (tuple): Positive weights of the top `n_top` ranks.
        n_top (int): Number of ranks aggregated; defaults to len(w).
    """
    s0: Tuple[float, ...]
    w: Tuple[float, ...]
    n_top: int = None

    def __post_init__(self):
        object.__setattr__(self, 's0', tuple(float(x) for x in self.s0))
        object.__setattr__(self, 'w', tuple(float(x) for x in self.w))
        if self.n_top is None:
            object.__setattr__(self, 'n_top', len(self.w))
        s0 = np.asarray(self.s0)
        if s0.size == 0 or np.any(s0 <= 0) or not np.all(np.isfinite(s0)):
            raise ValueError(f'Initial prices must be positive and finite, got {self.s0}')
        if np.any(np.diff(s0) > 0):
            raise ValueError(f'Initial prices must be sorted non-increasing, got {self.s0}')
        if np.sum(np.diff(s0) == 0) > 1:
            raise ValueError(f'At most one pair of initial prices may be tied, got {self.s0}')
        if not 0 < self.n_top <= s0.size:
            raise ValueError(f'n_top must lie in [1, {s0.size}], got {self.n_top}')
        if len(self.w) != self.n_top:
            raise ValueError(f'Expected {self.n_top} weights, got {len(self.w)}')
        if any(not x > 0 for x in self.w):
            raise ValueError(f'Index weights must be positive, got {self.w}')

    @property
    def n(self):
        return len(self.s0)

    @property
    def weights(self):
        return np.asarray(self.w)

    def tie_position(self):
        """1-based rank r of the lower slot of the tie (r-1, r), or None."""
        ties = np.flatnonzero(np.diff(self.s0) == 0)
        return int(ties[0]) + 2 if ties.size else None

    def initial_value(self):
        return index_value(self.s0, self)


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n_paths: int

    @classmethod
    def from_samples(cls, x):
        x = np.asarray(x, dtype=np.float64)
        n = x.size
        stderr = x.std(ddof=1) / np.sqrt(n) if n > 1 else 0.
        return cls(float(x.mean()), float(stderr), n)


def rank_prices(prices):
    """Sort prices non-increasing along the last axis; ties keep label order."""
    prices = np.asarray(prices, dtype=np.float64)
    order = np.argsort(-prices, axis=-1, kind='stable')
    return np.take_along_axis(prices, order, axis=-1)


def index_values(prices, spec):
    """Index value of every row of a [paths x n] price matrix."""
    prices = np.atleast_2d(prices)
    if prices.shape[-1] != spec.n:
        raise ValueError(f'Expected {spec.n} prices per row, got {prices.shape[-1]}')
    return rank_prices(prices)[:, :spec.n_top] @ spec.weights


def index_value(prices, spec):
    """sum_{j <= n_top} w_j * rank_prices(prices)[j]."""
    prices = np.asarray(prices, dtype=np.float64)
    if prices.ndim != 1:
        raise ValueError(f'Expected a price vector, got shape {prices.shape}')
    return float(index_values(prices, spec)[0])


@lru_cache(maxsize=16)
def terminal_index(model, spec, cfg):
    """I_T on every simulated path; cached so strikes share the same paths."""
    if model.n != spec.n:
        raise ValueError(f'Model has {model.n} assets, index has {spec.n}')
    batch = euler_simulate(model, spec.s0, cfg)
    values = index_values(batch.terminal, spec)
    values.setflags(write=False)
    return values


def check_maturity(T, cfg):
    if not T > 0:
        raise ValueError(f'Maturity must be positive, got {T}')
    if abs(cfg.grid.horizon - T) > 1e-12 * max(T, 1.):
        raise ValueError(f'Simulation grid ends at {cfg.grid.horizon}, maturity is {T}')


def futures_price(model, spec, T, cfg):
    """Monte Carlo estimate of F_{0,T} = E[I_T].
    Args:
        model (ModelSpec): Market model.
        spec (IndexSpec): Index definition.
        T (float): Maturity; must match the end of `cfg.grid`.
        cfg (SimConfig): Monte Carlo settings.
    Returns:
        estimate (McEstimate): Futures price and its standard error.
    """
    check_maturity(T, cfg)
    return McEstimate.from_samples(terminal_index(model, spec, cfg))


def margrabe_max_expectation(s0, sigmas, T):
    """E[max(S1_T, S2_T)] for two independent driftless GBMs.

    Exchange-option identity with sigma_bar = sqrt(sigma1^2 + sigma2^2); for a tie
    it reduces to 2 s0 N(sigma_bar sqrt(T) / 2).
    """
    s1, s2 = (float(x) for x in s0)
    vol = float(np.hypot(*sigmas)) * np.sqrt(T)
    if vol == 0.:
        return max(s1, s2)
    d1 = (np.log(s1 / s2) + 0.5 * vol ** 2) / vol
    return float(s2 + s1 * norm.cdf(d1) - s2 * norm.cdf(d1 - vol))
