"""Black-Scholes call prices in log-strike form (r = 0) and their inversion.

    C(T, x, k, sigma) = x N(d1) - x e^k N(d2),   strike = x e^k
    d1 = (-k + sigma^2 T / 2) / (sigma sqrt(T)),  d2 = d1 - sigma sqrt(T)
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from rankskew.exceptions import ArbitrageBoundError

log = logging.getLogger(__name__)

SQRT_2PI = np.sqrt(2. * np.pi)
VOL_LO, VOL_HI = 1e-8, 10.


@dataclass(frozen=True)
class BsInputs:
    T: float
    x: float
    k: float
    sigma: float
    r: float = 0.

    def __post_init__(self):
        if not self.T > 0 or not self.x > 0 or self.sigma < 0:
            raise ValueError(f'Need T > 0, x > 0, sigma >= 0; got {self}')
        if self.r != 0:
            raise ValueError('Only r = 0 is supported')


def _d1(T, k, sigma):
    vol = sigma * np.sqrt(T)
    return (-k + 0.5 * vol ** 2) / vol, vol


def bs_call(T, x, k, sigma):
    """Call price; works elementwise on arrays. sigma = 0 gives intrinsic value."""
    T, x, k, sigma = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64)
                                           for a in (T, x, k, sigma)))
    strike = x * np.exp(k)
    intrinsic = np.maximum(x - strike, 0.)
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        d1, vol = _d1(T, k, sigma)
        price = x * norm.cdf(d1) - strike * norm.cdf(d1 - vol)
    price = np.where(vol > 0, price, intrinsic)
    price = np.where(np.isposinf(k), 0., price)
    price = np.where(np.isneginf(k), x, price)
    return price if price.ndim else float(price)


def bs_price(inputs):
    """C = N(d1) x - N(d2) x e^k for a `BsInputs` record."""
    return bs_call(inputs.T, inputs.x, inputs.k, inputs.sigma)


def bs_vega(T, x, k, sigma):
    """dC/dsigma = x phi(d1) sqrt(T)."""
    with np.errstate(divide='ignore', invalid='ignore'):
        d1, _ = _d1(T, np.asarray(k, dtype=np.float64), sigma)
    vega = x * norm.pdf(d1) * np.sqrt(T)
    return vega if np.ndim(vega) else float(vega)


def bs_vega_atm(T, x, sigma):
    """x sqrt(T) exp(-sigma^2 T / 8) / sqrt(2 pi)."""
    return float(x * np.sqrt(T) * np.exp(-sigma ** 2 * T / 8.) / SQRT_2PI)


def bs_dk(T, x, k, sigma):
    """dC/dk at fixed sigma: -x e^k N(d2)."""
    with np.errstate(divide='ignore', invalid='ignore'):
        d1, vol = _d1(T, np.asarray(k, dtype=np.float64), sigma)
    return -x * np.exp(k) * norm.cdf(d1 - vol)


def bs_dk_atm(T, x, sigma):
    """dC/dk at k = 0: -x N(-sigma sqrt(T) / 2), since phi(d1) = phi(d2) there."""
    return float(-x * norm.cdf(-0.5 * sigma * np.sqrt(T)))


def arbitrage_bounds(x, k):
    return max(x * (1. - np.exp(k)), 0.), x


def implied_vol(price, T, x, k, tol=1e-12):
    """Black-Scholes implied volatility of a call.

    Bracketing on [1e-8, 10], then Newton steps on vega kept inside the
    bracket (bisection when a step leaves it), finished with brentq if
    Newton stalls.
    Args:
        price (float): Call price, strictly inside the no-arbitrage interval.
        T (float): Maturity.
        x (float): Forward.
        k (float): Log-strike.
        tol (float): Price tolerance relative to `x`.
    Returns:
        sigma (float): Implied volatility.
    """
    lower, upper = arbitrage_bounds(x, k)
    if not price > lower:
        raise ArbitrageBoundError('lower', price, lower)
    if not price < upper:
        raise ArbitrageBoundError('upper', price, upper)

    def f(s):
        return bs_call(T, x, k, s) - price

    atol = tol * x
    lo, hi = VOL_LO, VOL_HI
    f_lo, f_hi = f(lo), f(hi)
    if f_lo > atol:
        # below the price at the smallest volatility searched
        raise ArbitrageBoundError('lower', price, bs_call(T, x, k, lo))
    if f_lo >= 0:
        return lo
    if f_hi < 0:
        raise ArbitrageBoundError('upper', price, bs_call(T, x, k, hi))

    sigma = min(max(np.sqrt(2. * abs(k) / T) if k else 0.2, 0.05), 2.)
    for _ in range(100):
        diff = f(sigma)
        if abs(diff) <= atol:
            # one more step sharpens sigma well below the price tolerance
            vega = bs_vega(T, x, k, sigma)
            if vega > 0:
                sigma = min(max(sigma - diff / vega, lo), hi)
            return float(sigma)
        if diff > 0:
            hi = sigma
        else:
            lo = sigma
        vega = bs_vega(T, x, k, sigma)
        step = sigma - diff / vega if vega > 0 else np.nan
        sigma = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-15 * hi:
            break

    log.debug(f'Newton stalled for price={price}, T={T}, k={k}; using brentq')
    return float(brentq(f, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500))


def atm_skew_formula(dC_dk_over_F, sigma_iv, T):
    """ATM skew from the strike derivative of the call price at k = 0.

        skew = sqrt(2 pi) e^{sigma^2 T / 8} / sqrt(T) * (dC/dk / F + N(-sigma sqrt(T) / 2))

    the implicit-function identity d sigma / dk = (dC/dk - dC^BS/dk) / vega at the money.
    """
    if not T > 0:
        raise ValueError(f'Maturity must be positive, got {T}')
    vol = sigma_iv * np.sqrt(T)
    return float(SQRT_2PI * np.exp(vol ** 2 / 8.) / np.sqrt(T)
                 * (dC_dk_over_F + norm.cdf(-0.5 * vol)))


if __name__ == '__main__':
    c = bs_call(1., 100., 0., 0.2)
    print(c, implied_vol(c, 1., 100., 0.), bs_vega_atm(1., 100., 0.2), bs_dk_atm(1., 100., 0.2))
