"""Small-time density of the normalized log-returns of two independent GBMs.

X^j_t = (Z^j_t - Z^j_0) / (sigma_j sqrt(t)) is exactly N(-sigma_j sqrt(t) / 2, 1),
so the product density is known and the expansion can be checked against it.
"""
import numpy as np
from scipy.stats import norm


def _check(x, t, sigmas):
    x = np.asarray(x, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if x.shape[-1] != 2 or sigmas.shape != (2,):
        raise ValueError('Expected 2-vectors for x and sigmas')
    if not 0. < t < 1.:
        raise ValueError(f't must lie in (0, 1), got {t}')
    return x, sigmas


def exact_density_gbm2(x, t, sigmas):
    """prod_j phi(x_j + sigma_j sqrt(t) / 2)."""
    x, sigmas = _check(x, t, sigmas)
    shift = 0.5 * sigmas * np.sqrt(t)
    return np.prod(norm.pdf(x + shift), axis=-1)


def density_expansion_gbm2(x, t, sigmas):
    """Expansion of the density to order t; error O(t^{3/2}).

        q_t(x) = phi(x) [1 - sqrt(t)/2 sum_j sigma_j x_j
                         + t/8 sum_j sigma_j^2 (x_j^2 - 1)
                         + t/4 sigma_1 sigma_2 x_1 x_2]

    Integrates to exactly 1; may turn negative far in the tails.
    Args:
        x (array): Point(s), last axis of size 2.
        t (float): Time in (0, 1).
        sigmas (array): The two volatilities.
    Returns:
        q (float or np.ndarray): Approximate density.
    """
    x, sigmas = _check(x, t, sigmas)
    phi = np.prod(norm.pdf(x), axis=-1)
    u = sigmas * x
    correction = (1. - 0.5 * np.sqrt(t) * u.sum(axis=-1)
                  + t / 8. * np.sum(sigmas ** 2 * (x ** 2 - 1.), axis=-1)
                  + 0.25 * t * u[..., 0] * u[..., 1])
    q = phi * correction
    return q if np.ndim(q) else float(q)


def expansion_error(t, sigmas, half_width=4., n_points=41):
    """sup over an n_points x n_points grid of |q_t - exact density|."""
    axis = np.linspace(-half_width, half_width, n_points)
    xx, yy = np.meshgrid(axis, axis, indexing='ij')
    pts = np.stack([xx, yy], axis=-1)
    return float(np.max(np.abs(density_expansion_gbm2(pts, t, sigmas)
                               - exact_density_gbm2(pts, t, sigmas))))
