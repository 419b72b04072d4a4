"""Monte Carlo prices and ATM skew estimators on the ranked index.

All functions draw I_T from `terminal_index`, so every strike and both skew
estimators of one (model, spec, cfg) reuse the same paths. Standard errors
come from the delta method applied to per-path influence functions,
including the noise of the futures estimate used as the ATM strike.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from rankskew.model.index import McEstimate, check_maturity, terminal_index
from rankskew.pricing.black_scholes import atm_skew_formula, bs_vega, implied_vol

log = logging.getLogger(__name__)

METHODS = ('finite_difference', 'digital')
MIN_DK = 1e-3


@dataclass(frozen=True)
class SkewEstimate:
    """ATM skew at one maturity.
    Args:
        T (float): Maturity.
        skew (float): d sigma_IV / dk at k = 0.
        stderr (float): Monte Carlo standard error.
        method (str): 'finite_difference' or 'digital'.
        dk (float): Log-strike bump (finite_difference only).
        sigma_atm (float): ATM implied volatility of the same paths.
        futures (float): Estimated F_{0,T}.
    """
    T: float
    skew: float
    stderr: float
    method: str
    dk: Optional[float] = None
    sigma_atm: Optional[float] = None
    futures: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f'Unknown skew method "{self.method}"')
        if self.stderr < 0:
            raise ValueError(f'stderr must be >= 0, got {self.stderr}')
        if self.dk is not None and not self.dk > 0:
            raise ValueError(f'dk must be positive, got {self.dk}')


def _index_paths(model, spec, T, cfg):
    check_maturity(T, cfg)
    values = terminal_index(model, spec, cfg)
    return values, float(values.mean())


def mc_call_price(model, spec, T, k, F, cfg):
    """E[(I_T - F e^k)^+] with its standard error."""
    if not F > 0:
        raise ValueError(f'Futures price must be positive, got {F}')
    values, _ = _index_paths(model, spec, T, cfg)
    with np.errstate(over='ignore', invalid='ignore'):
        payoff = np.maximum(values - F * np.exp(k), 0.)
    return McEstimate.from_samples(payoff)


def mc_digital(model, spec, T, F, cfg):
    """Q(I_T > F) with its binomial standard error."""
    values, _ = _index_paths(model, spec, T, cfg)
    n = values.size
    p = float(np.mean(values > F))
    return McEstimate(p, float(np.sqrt(p * (1. - p) / n)), n)


def _iv_with_influence(values, F, k, T):
    """Implied vol at log-strike k from the paths, and its per-path influence."""
    strike = F * np.exp(k)
    payoff = np.maximum(values - strike, 0.)
    price = float(payoff.mean())
    sigma = implied_vol(price, T, F, k)
    in_money = float(np.mean(values > strike))
    infl_F = values - F
    infl_C = payoff - price - np.exp(k) * in_money * infl_F
    # dC^BS/dx = C/x at fixed k
    infl_sigma = (infl_C - price / F * infl_F) / bs_vega(T, F, k, sigma)
    return sigma, infl_sigma


def default_dk(sigma_atm, T):
    """max(sigma sqrt(T) / 2, 1e-3)."""
    return max(0.5 * sigma_atm * np.sqrt(T), MIN_DK)


def atm_skew_fd(model, spec, T, cfg, dk=None):
    """Central finite difference of implied vol across F e^{-dk}, F e^{+dk}.
    Args:
        model (ModelSpec): Market model.
        spec (IndexSpec): Index definition.
        T (float): Maturity.
        cfg (SimConfig): Monte Carlo settings ending at T.
        dk (float): Log-strike bump; defaults to `default_dk` of a pilot ATM vol.
    Returns:
        estimate (SkewEstimate): Skew and standard error.
    """
    values, F = _index_paths(model, spec, T, cfg)
    sigma_atm, _ = _iv_with_influence(values, F, 0., T)
    if dk is None:
        dk = default_dk(sigma_atm, T)
        log.debug(f'T={T:.6f}: pilot ATM vol {sigma_atm:.6f}, dk={dk:.6f}')
    if not dk > 0:
        raise ValueError(f'dk must be positive, got {dk}')

    up, infl_up = _iv_with_influence(values, F, dk, T)
    down, infl_down = _iv_with_influence(values, F, -dk, T)
    skew = (up - down) / (2. * dk)
    infl = (infl_up - infl_down) / (2. * dk)
    stderr = float(infl.std(ddof=1) / np.sqrt(values.size))
    return SkewEstimate(float(T), float(skew), stderr, 'finite_difference', float(dk),
                        float(sigma_atm), F)


def atm_skew_digital(model, spec, T, cfg, h=None):
    """Skew from Q(I_T > F) and the ATM implied vol, via `atm_skew_formula`.

    `h` is the log-strike half width used to estimate the density of I_T at F,
    which carries the futures noise into the digital's influence function.
    """
    values, F = _index_paths(model, spec, T, cfg)
    n = values.size
    sigma_atm, infl_sigma = _iv_with_influence(values, F, 0., T)
    above = (values > F).astype(np.float64)
    p = float(above.mean())
    skew = atm_skew_formula(-p, sigma_atm, T)

    h = default_dk(sigma_atm, T) if h is None else h
    density = (np.mean(values > F * np.exp(-h)) - np.mean(values > F * np.exp(h))) \
        / (F * (np.exp(h) - np.exp(-h)))
    infl_p = above - p - density * (values - F)

    eps = 1e-6 * max(sigma_atm, 1e-3)
    d_sigma = (atm_skew_formula(-p, sigma_atm + eps, T)
               - atm_skew_formula(-p, sigma_atm - eps, T)) / (2. * eps)
    d_p = -np.sqrt(2. * np.pi) * np.exp(sigma_atm ** 2 * T / 8.) / np.sqrt(T)
    infl = d_p * infl_p + d_sigma * infl_sigma
    stderr = float(infl.std(ddof=1) / np.sqrt(n))
    return SkewEstimate(float(T), float(skew), stderr, 'digital', None, float(sigma_atm), F)


def atm_skew(model, spec, T, cfg, method='finite_difference', dk=None):
    """Dispatch to one of the two estimators."""
    if method == 'finite_difference':
        return atm_skew_fd(model, spec, T, cfg, dk)
    if method == 'digital':
        return atm_skew_digital(model, spec, T, cfg)
    raise ValueError(f'Unknown skew method "{method}"')

