"""Riemann-Liouville (Volterra) processes driven by a Brownian motion.

    B^H_t = c * int_0^t (t - s)^(H - 1/2) dB_s

with c = sqrt(2H) (unit_variance, Var B^H_t = t^2H) or c = 1 / Gamma(H + 1/2)
(as_written). The exact sampler factors the joint covariance of
(B_t1..B_tN, B^H_t1..B^H_tN) block-wise: B is drawn exactly from its
increments and B^H is the regression on those increments plus an
independent residual.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import pandas as pd
import torch
from scipy.integrate import quad
from scipy.special import gamma, hyp2f1

from rankskew.exceptions import DriverFactorizationError
from rankskew.modules.rng import standard_normals
from rankskew.util import save_table

log = logging.getLogger(__name__)

NORMALIZATIONS = ('as_written', 'unit_variance')
SCHEMES = ('cholesky', 'hybrid')


@dataclass(frozen=True)
class FbmKernel:
    """Power kernel of a fractional driver.
    Args:
        H (float): Hurst exponent in (0, 1).
        normalization (str): 'unit_variance' or 'as_written'.
        scheme (str): 'cholesky' (exact) or 'hybrid'.
    """
    H: float
    normalization: str = 'unit_variance'
    scheme: str = 'cholesky'

    def __post_init__(self):
        if not 0. < self.H < 1.:
            raise ValueError(f'Hurst exponent must lie in (0, 1), got {self.H}')
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f'Unknown normalization "{self.normalization}"')
        if self.scheme not in SCHEMES:
            raise ValueError(f'Unknown scheme "{self.scheme}"')

    @property
    def alpha(self):
        return self.H - 0.5

    @property
    def constant(self):
        if self.normalization == 'unit_variance':
            return float(np.sqrt(2. * self.H))
        return float(1. / gamma(self.H + 0.5))

    @property
    def unit_scale(self):
        """Factor turning B^H into the unit-variance process."""
        return float(np.sqrt(2. * self.H)) / self.constant


@dataclass(frozen=True)
class DriverPaths:
    """Sampled factor paths for one asset.

    bm: [paths x N] Brownian increments over the grid steps.
    volterra: [paths x (N + 1)] values of B^H at the grid nodes, column 0 is 0.
        None for assets without a fractional factor.
    """
    bm: torch.Tensor
    volterra: Optional[torch.Tensor] = None

    @property
    def n_paths(self):
        return self.bm.shape[0]

    @property
    def n_steps(self):
        return self.bm.shape[1]


def volterra_variance(t, kernel):
    return kernel.constant ** 2 * t ** (2. * kernel.H) / (2. * kernel.H)


def volterra_covariance(s, t, kernel):
    """Cov(B^H_s, B^H_t) by quadrature of the product kernel.
    Args:
        s (float): First time, >= 0.
        t (float): Second time, >= 0.
        kernel (FbmKernel): Kernel and normalization.
    Returns:
        cov (float): Covariance; symmetric in (s, t).
    """
    if s < 0 or t < 0:
        raise ValueError(f'Times must be non-negative, got s={s}, t={t}')
    s, t = min(s, t), max(s, t)
    if s == 0.:
        return 0.
    if s == t:
        return volterra_variance(t, kernel)
    a = kernel.alpha
    # weight (s - u)^a handles the endpoint singularity for H < 1/2
    value, _ = quad(lambda u: (t - u) ** a, 0., s, weight='alg', wvar=(0., a),
                    epsabs=1e-13, epsrel=1e-11, limit=200)
    return kernel.constant ** 2 * value


def cross_covariance(s, t, kernel):
    """Cov(B_s, B^H_t) = c [t^(H+1/2) - (t - min(s, t))^(H+1/2)] / (H + 1/2)."""
    if s < 0 or t < 0:
        raise ValueError(f'Times must be non-negative, got s={s}, t={t}')
    p = kernel.H + 0.5
    m = min(s, t)
    return kernel.constant * (t ** p - (t - m) ** p) / p


def _volterra_block(times, kernel):
    """Vectorized Cov(B^H_ti, B^H_tj) via the hypergeometric representation."""
    H = kernel.H
    g = 0.5 - H
    lo = np.minimum.outer(times, times)
    hi = np.maximum.outer(times, times)
    with np.errstate(divide='ignore', invalid='ignore'):
        x = hi / lo
        off = x ** (-g) * hyp2f1(1., g, 2. - g, 1. / x) / (1. - g)
    cov = kernel.constant ** 2 * lo ** (2. * H) * off
    diag = np.isclose(lo, hi, rtol=0., atol=0.)
    cov[diag] = (kernel.constant ** 2 * lo ** (2. * H) / (2. * H))[diag]
    return cov


def joint_covariance(grid, kernel):
    """Analytic covariance of (B_t1..B_tN, B^H_t1..B^H_tN), t_0 = 0 excluded.
    Args:
        grid (TimeGrid): Simulation grid.
        kernel (FbmKernel): Kernel and normalization.
    Returns:
        cov (np.ndarray): [2N x 2N] matrix.
    """
    times = grid.array[1:]
    n = times.size
    p = kernel.H + 0.5
    lo = np.minimum.outer(times, times)
    # rows index B_ti, columns B^H_tj
    cross = kernel.constant * (times[None, :] ** p - (times[None, :] - lo) ** p) / p
    cov = np.empty((2 * n, 2 * n))
    cov[:n, :n] = lo
    cov[:n, n:] = cross
    cov[n:, :n] = cross.T
    cov[n:, n:] = _volterra_block(times, kernel)
    return cov


def _cholesky_with_ridge(matrix, kernel, n_points):
    """Cholesky factor; one retry with ridge 1e-12 * trace / dim, then fail."""
    chol, info = torch.linalg.cholesky_ex(matrix)
    if int(info) == 0:
        return chol
    ridge = 1e-12 * float(torch.trace(matrix)) / matrix.shape[0]
    log.debug(f'Cholesky failed (N={n_points}, H={kernel.H}), retrying with ridge {ridge:.3e}')
    eye = torch.eye(matrix.shape[0], dtype=matrix.dtype)
    chol, info = torch.linalg.cholesky_ex(matrix + ridge * eye)
    if int(info) != 0:
        raise DriverFactorizationError(n_points, kernel.H)
    return chol


@lru_cache(maxsize=32)
def _block_factors(times, H, normalization):
    """Loadings of B^H on the normalized B increments and the residual factor."""
    kernel = FbmKernel(H, normalization)
    t = np.asarray(times)
    nodes = t[1:]
    n = nodes.size
    dt = np.diff(t)
    p = H + 0.5
    # Cov(dB_j, B^H_ti) for j <= i
    upper = np.clip(nodes[:, None] - t[None, :-1], 0., None) ** p
    lower = np.clip(nodes[:, None] - t[None, 1:], 0., None) ** p
    mask = np.tri(n, dtype=bool)
    load = np.where(mask, kernel.constant * (upper - lower) / p, 0.) / np.sqrt(dt)[None, :]

    load = torch.from_numpy(load)
    resid = torch.from_numpy(_volterra_block(nodes, kernel)) - load @ load.T
    resid = 0.5 * (resid + resid.T)
    chol = _cholesky_with_ridge(resid, kernel, n)
    log.debug(f'Factored joint driver covariance: N={n}, H={H}, {normalization}')
    return load, chol


def sample_cholesky_driver(grid, kernel, n_paths, stream, device='cpu'):
    """Exact joint samples of (B, B^H) on `grid`.

    Increments come from stream.child(0); the residual of B^H from stream.child(1).
    """
    n = grid.n_steps
    z = torch.from_numpy(standard_normals(stream.child(0), (n_paths, n)))
    dt = torch.from_numpy(grid.dt)
    bm = z * dt.sqrt()
    zeros = torch.zeros(n_paths, 1, dtype=torch.float64)

    if kernel.H == 0.5:
        # kernel degenerates to the constant c = 1
        volterra = torch.cat([zeros, torch.cumsum(bm, dim=1)], dim=1)
    else:
        load, chol = _block_factors(grid.t, kernel.H, kernel.normalization)
        resid = torch.from_numpy(standard_normals(stream.child(1), (n_paths, n)))
        volterra = torch.cat([zeros, z @ load.T + resid @ chol.T], dim=1)

    return DriverPaths(bm.to(device), volterra.to(device))


def dump_driver_csv(driver, grid, path):
    """Write a driver to CSV with columns path_id, t, B, B_H."""
    bm = driver.bm.cpu().numpy()
    n_paths, n = bm.shape
    B = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(bm, axis=1)], axis=1)
    BH = (driver.volterra.cpu().numpy() if driver.volterra is not None
          else np.full_like(B, np.nan))
    df = pd.DataFrame({
        'path_id': np.repeat(np.arange(n_paths), n + 1),
        't': np.tile(grid.array, n_paths),
        'B': B.ravel(),
        'B_H': BH.ravel(),
    })
    return save_table(df, path, 'driver')


if __name__ == '__main__':
    from rankskew.modules.grid import TimeGrid
    kernel = FbmKernel(0.3)
    print(joint_covariance(TimeGrid.uniform(1., 0.25), kernel))
    print(volterra_covariance(0.5, 1., kernel))
