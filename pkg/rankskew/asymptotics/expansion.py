"""Small-time expansion of the index futures and the ATM exercise probability.

With x the normalized log-returns X^k = (Z^k_T - Z^k_0) / sqrt(v^k_0 T),

    F_{0,T} - I_0 = sqrt(T) * sum_k m^k + O(T)

where the k-th ranked slot contributes nu_k x_k, nu_k = w_k s0_k sqrt(v0_k).
With distinct starts the ranks freeze (m1 = nu_k mu_k). At a tie between
slots (r-1, r) the two slots take the max and the min of the tied assets'
terms, one rank order per half-plane (m5).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.integrate import dblquad, quad
from scipy.stats import norm

log = logging.getLogger(__name__)

SQRT_2PI = np.sqrt(2. * np.pi)
# quadrature window in standard deviations; see gaussian_tail_bound
BOX = 8.
HIGHER_KINDS = ('m2', 'm3', 'm4', 'm6', 'm7', 'm8')


@dataclass(frozen=True)
class ExpansionCoeffs:
    """Leading futures coefficients of one index.

    m1: per-slot m1 (distinct starts) or None.
    m5: per-slot m5 (tie) or None.
    tie_position: 1-based lower tied slot r, or None.
    higher: results of `higher_coefficient`, keyed by kind.
    """
    m1: Optional[np.ndarray]
    m5: Optional[np.ndarray]
    tie_position: Optional[int]
    higher: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def sqrt_t_slope(self):
        """Coefficient of sqrt(T) in F_{0,T} - I_0."""
        return float(np.sum(self.m5)) if self.m5 is not None else float(np.sum(self.m1))


def trunc_gauss_moment(a):
    """E[X 1{Y <= a X}] = a / sqrt(2 pi (1 + a^2)) for independent N(0, 1) X, Y."""
    if np.isinf(a):
        return float(np.sign(a)) / SQRT_2PI
    return float(a / np.sqrt(2. * np.pi * (1. + a * a)))


def trunc_gauss_moment_complement(a):
    """E[X 1{Y >= a X}], by direct 1-D quadrature."""
    value, _ = quad(lambda x: x * norm.pdf(x) * norm.sf(a * x), -np.inf, np.inf,
                    epsabs=1e-15, epsrel=1e-13, limit=200)
    return float(value)


def gaussian_tail_bound(c, dim=2):
    """Upper bound on the N(0, I_dim) mass outside the box [-c, c]^dim.

    Integration by parts gives P(|X| > c) <= 2 phi(c) / c for each coordinate.
    """
    if not c > 0:
        raise ValueError(f'Box half width must be positive, got {c}')
    return float(dim * 2. * norm.pdf(c) / c)


def _nu(spec, v0):
    v0 = np.asarray(v0, dtype=np.float64)
    if v0.shape != (spec.n,):
        raise ValueError(f'Expected {spec.n} spot variances, got {v0.shape}')
    if np.any(v0 < 0):
        raise ValueError(f'Spot variances must be >= 0, got {v0}')
    s0 = np.asarray(spec.s0)
    return s0 * np.sqrt(v0), np.sqrt(v0)


def _mean_cov(n, mu, cov):
    mu = np.zeros(n) if mu is None else np.asarray(mu, dtype=np.float64)
    cov = np.eye(n) if cov is None else np.asarray(cov, dtype=np.float64)
    if mu.shape != (n,) or cov.shape != (n, n):
        raise ValueError(f'Baseline mean/covariance must have shapes ({n},), ({n}, {n})')
    return mu, cov


def m1_coefficients(spec, v0, mu=None):
    """Per-slot m1 = nu_k mu_k for distinct initial prices.
    Args:
        spec (IndexSpec): Index with distinct initial prices.
        v0 (array): Spot variances of the assets.
        mu (array): Baseline Gaussian mean; zero by default.
    Returns:
        m1 (np.ndarray): One entry per slot k <= n_top.
    """
    if spec.tie_position() is not None:
        raise ValueError('Initial prices are tied; use m5_total for the sqrt(T) term')
    scale, _ = _nu(spec, v0)
    mu, _ = _mean_cov(spec.n, mu, None)
    w = spec.weights
    return w * scale[:spec.n_top] * mu[:spec.n_top]


def _tie_slots(spec, r):
    found = spec.tie_position()
    if found is None:
        raise ValueError('m5 needs exactly one tie in the initial prices')
    if r is not None and r != found:
        raise ValueError(f'Tie position {r} is not the adjacent tied pair ({found - 1}, {found})')
    return found - 2, found - 1


def _slot_weight(spec, k):
    return spec.w[k] if k < spec.n_top else 0.


def m5_coefficients(spec, v0, r=None, mu=None, cov=None):
    """Per-slot m5 with the permuted (rank-aware) integrands.

    For the identity baseline the tied slots are closed form through
    `trunc_gauss_moment`; otherwise the two half-planes of the tied pair are
    integrated with dblquad over the +-8 sd box.
    """
    a, b = _tie_slots(spec, r)
    scale, vol = _nu(spec, v0)
    mu, cov = _mean_cov(spec.n, mu, cov)
    s = spec.s0[a]
    m5 = np.zeros(spec.n_top)
    for k in range(spec.n_top):
        if k not in (a, b):
            m5[k] = spec.w[k] * scale[k] * mu[k]

    if np.allclose(mu, 0.) and np.allclose(cov, np.eye(spec.n)):
        if vol[a] == 0. and vol[b] == 0.:
            return m5
        ratio = vol[a] / vol[b] if vol[b] > 0 else np.inf
        inverse = vol[b] / vol[a] if vol[a] > 0 else np.inf
        # E[max(u_a, u_b)] with u_j = sqrt(v0_j) x_j
        top = vol[a] * trunc_gauss_moment(ratio) + vol[b] * trunc_gauss_moment(inverse)
        bottom = -top
    else:
        top, bottom = _tied_pair_moments(vol[a], vol[b], mu[[a, b]], cov[np.ix_([a, b], [a, b])])

    if a < spec.n_top:
        m5[a] = spec.w[a] * s * top
    if b < spec.n_top:
        m5[b] = spec.w[b] * s * bottom
    return m5


def _tied_pair_moments(vol_a, vol_b, mu, cov):
    """E[max(u_a, u_b)] and E[min(u_a, u_b)] under N(mu, cov) by quadrature."""
    sd = np.sqrt(np.diag(cov))
    inv = np.linalg.inv(cov)
    norm_const = 1. / (2. * np.pi * np.sqrt(np.linalg.det(cov)))

    def density(xb, xa):
        d = np.array([xa, xb]) - mu
        return norm_const * np.exp(-0.5 * d @ inv @ d)

    xa_lo, xa_hi = mu[0] - BOX * sd[0], mu[0] + BOX * sd[0]
    xb_lo, xb_hi = mu[1] - BOX * sd[1], mu[1] + BOX * sd[1]
    ratio = vol_a / vol_b

    def split(xa):
        return min(max(ratio * xa, xb_lo), xb_hi)

    # region 1: u_b <= u_a, asset a ranks first
    r1_a, _ = dblquad(lambda xb, xa: vol_a * xa * density(xb, xa), xa_lo, xa_hi,
                      lambda xa: xb_lo, split, epsabs=1e-10)
    r1_b, _ = dblquad(lambda xb, xa: vol_b * xb * density(xb, xa), xa_lo, xa_hi,
                      lambda xa: xb_lo, split, epsabs=1e-10)
    # region 2: u_a < u_b, the tied assets swap ranks
    r2_a, _ = dblquad(lambda xb, xa: vol_a * xa * density(xb, xa), xa_lo, xa_hi,
                      split, lambda xa: xb_hi, epsabs=1e-10)
    r2_b, _ = dblquad(lambda xb, xa: vol_b * xb * density(xb, xa), xa_lo, xa_hi,
                      split, lambda xa: xb_hi, epsabs=1e-10)
    return r1_a + r2_b, r1_b + r2_a


def m5_total(spec, v0, r=None, mu=None, cov=None):
    """sum_k m5^k, the sqrt(T) coefficient of F_{0,T} - I_0 at a tie."""
    return float(np.sum(m5_coefficients(spec, v0, r, mu, cov)))


def expansion_coefficients(spec, v0, mu=None, cov=None):
    """m1 or m5 depending on the tie structure of `spec`."""
    r = spec.tie_position()
    if r is None:
        return ExpansionCoeffs(m1_coefficients(spec, v0, mu), None, None)
    return ExpansionCoeffs(None, m5_coefficients(spec, v0, r, mu, cov), r)


def higher_coefficient(kind, spec, v0, integrand=None, n_nodes=20):
    """Quadrature hook for the higher-order futures coefficients.

    Returns int nu_k x_k g(x) phi(x) dx per slot k <= n_top for a user-supplied
    g (the conditional-expectation derivative behind `kind`), by tensor
    Gauss-Hermite quadrature over all n coordinates. Without `integrand` the
    coefficient is zero, which is the case for every implemented model.
    """
    if kind not in HIGHER_KINDS:
        raise ValueError(f'Unknown coefficient "{kind}", expected one of {HIGHER_KINDS}')
    scale, _ = _nu(spec, v0)
    if integrand is None:
        return np.zeros(spec.n_top)
    if spec.n > 4:
        raise ValueError(f'Tensor quadrature is limited to 4 assets, got {spec.n}')

    nodes, weights = hermegauss(n_nodes)
    weights = weights / SQRT_2PI
    grids = np.meshgrid(*([nodes] * spec.n), indexing='ij')
    points = np.stack([g.ravel() for g in grids], axis=1)
    wgt = np.prod(np.stack(np.meshgrid(*([weights] * spec.n), indexing='ij')), axis=0).ravel()
    g = np.array([integrand(x) for x in points])
    out = np.array([np.sum(wgt * points[:, k] * g) for k in range(spec.n_top)])
    return spec.weights * scale[:spec.n_top] * out


def _radial_exceedance(h, m):
    """P(R h > m) for R the radius of a 2-D standard normal."""
    if h > 0:
        return np.exp(-0.5 * (m / h) ** 2) if m > 0 else 1.
    if h < 0:
        return 0. if m >= 0 else 1. - np.exp(-0.5 * (m / h) ** 2)
    return float(0. > m)


def tie_exercise_probability(spec, v0, mu=None):
    """Limit of Q(I_T > F_{0,T}) as T -> 0.

    At a tie the exercise region is the union of the two rank-ordered regions
    above the futures shift sum m5; the tied pair is integrated in polar
    coordinates and untied slots enter through a Gaussian cdf. With distinct
    starts the region is a half-space.
    """
    scale, vol = _nu(spec, v0)
    mu, _ = _mean_cov(spec.n, mu, None)
    r = spec.tie_position()
    if r is None:
        nu = spec.weights * scale[:spec.n_top]
        spread = np.linalg.norm(nu)
        return float(norm.cdf(nu @ mu[:spec.n_top] / spread)) if spread > 0 else 0.

    if not np.allclose(mu, 0.):
        raise ValueError('The tie exercise probability is implemented for a centered baseline')
    a, b = r - 2, r - 1
    shift = m5_total(spec, v0, r)
    s = spec.s0[a]
    wa, wb = _slot_weight(spec, a), _slot_weight(spec, b)
    others = [k for k in range(spec.n_top) if k not in (a, b)]
    spread = float(np.linalg.norm(spec.weights[others] * scale[others])) if others else 0.

    def h(theta):
        ua, ub = vol[a] * np.cos(theta), vol[b] * np.sin(theta)
        return s * (wa * max(ua, ub) + wb * min(ua, ub))

    if spread == 0.:
        value, _ = quad(lambda th: _radial_exceedance(h(th), shift), 0., 2. * np.pi,
                        limit=200, epsabs=1e-12)
        return float(value / (2. * np.pi))

    value, _ = dblquad(lambda rad, th: rad * np.exp(-0.5 * rad * rad)
                       * norm.cdf((rad * h(th) - shift) / spread),
                       0., 2. * np.pi, 0., BOX, epsabs=1e-10)
    return float(value / (2. * np.pi))


@dataclass(frozen=True)
class TieSkewPrediction:
    """Leading term skew ~ amplitude * T^(-1/2) at a tie."""
    probability: float
    amplitude: float
    exponent: float = 0.5


def predicted_tie_skew(spec, v0):
    """Amplitude sqrt(2 pi) (1/2 - p0) of the T^(-1/2) skew, p0 the limit exercise probability."""
    p0 = tie_exercise_probability(spec, v0)
    return TieSkewPrediction(p0, float(SQRT_2PI * (0.5 - p0)))
