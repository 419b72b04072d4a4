"""Stock dynamics and their log-Euler simulation.

Three per-asset variants, each driven by its own independent pair (B, W):

    GBM:                    dZ = -sigma^2/2 dt + sigma dB
    FractionalSteinStein:   sigma_t = sigma0 / sqrt(1 + t^2H) * (1 + B^H_t)
                            dZ = -sigma_t^2/2 dt + sigma_t (rho dB + sqrt(1 - rho^2) dW)
    FractionalBergomi:      v_t = var0 * exp(eta X_t - eta^2 t^2H / 2)
                            dZ = -v_t/2 dt + sqrt(v_t) (rho dB + sqrt(1 - rho^2) dW)

with X the unit-variance Volterra process built on B. Stein-Stein volatility
is signed; Bergomi variance is clamped at zero before the square root.
"""
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
import torch
from tqdm import tqdm

from rankskew.exceptions import SimulationError
from rankskew.modules.drivers import sample_brownian, sample_joint_driver
from rankskew.modules.grid import TimeGrid
from rankskew.modules.rng import CHUNK_SIZE, RngStream, chunk_sizes
from rankskew.modules.volterra import NORMALIZATIONS, SCHEMES, DriverPaths, FbmKernel
from rankskew.util import AverageMeter, save_table

log = logging.getLogger(__name__)

# default Euler steps (years)
DT_GBM = 0.05 / 365
DT_FRACTIONAL = 0.1 / 365


def _check_rho(rho):
    if not -1. <= rho <= 1.:
        raise ValueError(f'Correlation must lie in [-1, 1], got {rho}')


def _check_hurst(H):
    if not 0. < H < 1.:
        raise ValueError(f'Hurst exponent must lie in (0, 1), got {H}')


@dataclass(frozen=True)
class GBM:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f'GBM volatility must be >= 0, got {self.sigma}')

    @property
    def v0(self):
        return self.sigma ** 2


@dataclass(frozen=True)
class FractionalSteinStein:
    sigma0: float
    H: float
    rho: float = 0.

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f'sigma0 must be > 0, got {self.sigma0}')
        _check_hurst(self.H)
        _check_rho(self.rho)

    @property
    def v0(self):
        return self.sigma0 ** 2


@dataclass(frozen=True)
class FractionalBergomi:
    var0: float
    eta: float
    H: float
    rho: float = 0.

    def __post_init__(self):
        if not self.var0 > 0:
            raise ValueError(f'var0 must be > 0, got {self.var0}')
        if self.eta < 0:
            raise ValueError(f'eta must be >= 0, got {self.eta}')
        _check_hurst(self.H)
        _check_rho(self.rho)

    @property
    def v0(self):
        return self.var0


Asset = Union[GBM, FractionalSteinStein, FractionalBergomi]


@dataclass(frozen=True)
class ModelSpec:
    """An n-asset market with independent factor pairs per asset.
    Args:
        assets (tuple): Per-asset variants.
        normalization (str): Volterra kernel normalization for fractional assets.
        scheme (str): 'cholesky' or 'hybrid' Volterra sampler.
    """
    assets: Tuple[Asset, ...]
    normalization: str = 'unit_variance'
    scheme: str = 'cholesky'

    def __post_init__(self):
        object.__setattr__(self, 'assets', tuple(self.assets))
        if not self.assets:
            raise ValueError('ModelSpec needs at least one asset')
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f'Unknown normalization "{self.normalization}"')
        if self.scheme not in SCHEMES:
            raise ValueError(f'Unknown scheme "{self.scheme}"')

    @property
    def n(self):
        return len(self.assets)

    def kernel(self, j):
        asset = self.assets[j]
        if isinstance(asset, GBM):
            return None
        return FbmKernel(asset.H, self.normalization, self.scheme)

    def v0(self):
        """Spot variances (sigma^2, sigma0^2 or var0) per asset."""
        return np.array([a.v0 for a in self.assets])

    def hurst(self):
        """Hurst exponents; GBM assets count as H = 1/2."""
        return np.array([getattr(a, 'H', 0.5) for a in self.assets])

    def fingerprint(self):
        return hashlib.sha1(repr(self).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings for one maturity.

    `workers` and `device` only change where the work runs, so they stay out
    of equality and hashing.
    """
    n_paths: int
    grid: TimeGrid
    seed: int
    store_full_paths: bool = False
    device: str = field(default='cpu', compare=False)
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError(f'n_paths must be >= 1, got {self.n_paths}')
        if self.workers < 1:
            raise ValueError(f'workers must be >= 1, got {self.workers}')

    @classmethod
    def for_maturity(cls, T, dt, n_paths, seed, **kwargs):
        return cls(n_paths, TimeGrid.uniform(T, dt), seed, **kwargs)


@dataclass(frozen=True)
class PathBatch:
    """Simulated prices with what is needed to regenerate them.

    terminal: [paths x assets] prices at the grid horizon.
    full: [paths x (N + 1) x assets] prices at every node, if stored.
    """
    terminal: np.ndarray
    full: Optional[np.ndarray]
    metadata: Mapping[str, Any]

    @property
    def n_paths(self):
        return self.terminal.shape[0]


def vol_path(model, j, driver, grid):
    """Volatility (variance for Bergomi) of asset `j` at every grid node.
    Args:
        model (ModelSpec): Market model.
        j (int): Asset index.
        driver (DriverPaths): Factors of asset `j`, sampled on `grid`.
        grid (TimeGrid): Simulation grid.
    Returns:
        path (torch.Tensor): [paths x (N + 1)] values.
    """
    if driver.n_steps != grid.n_steps:
        raise ValueError(f'Driver has {driver.n_steps} steps, grid has {grid.n_steps}')
    asset = model.assets[j]
    t = torch.from_numpy(grid.array).to(driver.bm.device)
    if isinstance(asset, GBM):
        return torch.full((driver.n_paths, grid.n_steps + 1), float(asset.sigma),
                          dtype=torch.float64, device=driver.bm.device)

    if driver.volterra is None:
        raise ValueError(f'Asset {j} is fractional but the driver has no Volterra path')
    kernel = model.kernel(j)
    if isinstance(asset, FractionalSteinStein):
        scale = asset.sigma0 / torch.sqrt(1. + t ** (2. * asset.H))
        return scale * (1. + driver.volterra)

    x = driver.volterra * kernel.unit_scale
    return asset.var0 * torch.exp(asset.eta * x - 0.5 * asset.eta ** 2 * t ** (2. * asset.H))


def _first_bad_step(log_prices):
    bad = ~torch.isfinite(log_prices)
    if not bool(bad.any()):
        return None
    return int(bad.any(dim=0).nonzero()[0])


def _asset_driver(model, j, grid, stream, n_paths, device):
    """Factors of asset `j` for one chunk; stream key (j, 0)."""
    sub = stream.child(j, 0)
    if isinstance(model.assets[j], GBM):
        return sample_brownian(grid, n_paths, sub, device)
    return sample_joint_driver(grid, model.kernel(j), n_paths, sub, device)


def _simulate_chunk(model, log_s0, grid, stream, n_paths, device, keep_full):
    """Log-prices [paths x (N + 1) x assets] for one chunk of paths."""
    dt = torch.from_numpy(grid.dt).to(device)
    columns = []
    for j, asset in enumerate(model.assets):
        driver = _asset_driver(model, j, grid, stream, n_paths, device)
        if isinstance(asset, GBM):
            dx = driver.bm
        else:
            dw = sample_brownian(grid, n_paths, stream.child(j, 1), device).bm
            dx = asset.rho * driver.bm + (1. - asset.rho ** 2) ** 0.5 * dw

        # left-point freezing
        level = vol_path(model, j, driver, grid)[:, :-1]
        if isinstance(asset, FractionalBergomi):
            drift = -0.5 * level * dt
            diffusion = torch.sqrt(torch.clamp(level, min=0.))
        else:
            drift = -0.5 * level ** 2 * dt
            diffusion = level

        z = torch.cumsum(drift + diffusion * dx, dim=1) + float(log_s0[j])
        step = _first_bad_step(z)
        if step is not None:
            raise SimulationError(step + 1, asset=j)
        z0 = torch.full((n_paths, 1), float(log_s0[j]), dtype=torch.float64, device=device)
        columns.append(torch.cat([z0, z], dim=1) if keep_full else z[:, -1:])
    return torch.stack(columns, dim=-1).cpu().numpy()


def euler_simulate(model, s0, cfg, progress=False):
    """Simulate all assets of `model` from `s0` with the log-Euler scheme.

    Paths are generated in chunks of CHUNK_SIZE, each from its own stream,
    and assembled in chunk order, so the result does not depend on
    `cfg.workers`.
    Args:
        model (ModelSpec): Market model.
        s0 (sequence): Initial prices, one per asset, all > 0.
        cfg (SimConfig): Paths, grid and seed.
        progress (bool): Show a tqdm bar over chunks.
    Returns:
        batch (PathBatch): Terminal (and optionally full) prices.
    """
    s0 = np.asarray(s0, dtype=np.float64)
    if s0.shape != (model.n,):
        raise ValueError(f'Expected {model.n} initial prices, got {s0.shape}')
    if np.any(s0 <= 0) or not np.all(np.isfinite(s0)):
        raise ValueError(f'Initial prices must be positive and finite, got {s0}')
    log_s0 = np.log(s0)

    sizes = chunk_sizes(cfg.n_paths)
    grid = cfg.grid
    keep_full = cfg.store_full_paths

    def run(c):
        return _simulate_chunk(model, log_s0, grid, RngStream(cfg.seed, c), sizes[c],
                               cfg.device, keep_full)

    meter = AverageMeter()
    chunks = []
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool, \
            tqdm(total=cfg.n_paths, disable=not progress, leave=False) as progress_bar:
        for c, z in enumerate(pool.map(run, range(len(sizes)))):
            chunks.append(z)
            top = np.exp(z[:, -1, 0])
            meter.update(top.mean(), sizes[c], float(np.sum(top ** 2)))
            progress_bar.update(sizes[c])
            progress_bar.set_postfix(S1_T=f'{meter.avg:.4f}')

    z = np.concatenate(chunks, axis=0)
    prices = np.exp(z)
    terminal = np.ascontiguousarray(prices[:, -1, :])
    full = prices if keep_full else None
    terminal.setflags(write=False)
    if full is not None:
        full.setflags(write=False)

    metadata = MappingProxyType({
        'model': model,
        'model_hash': model.fingerprint(),
        's0': tuple(float(x) for x in s0),
        'config': cfg,
        'seed': cfg.seed,
        'n_paths': cfg.n_paths,
        'chunk_size': CHUNK_SIZE,
    })
    log.debug(f'Simulated {cfg.n_paths} paths x {grid.n_steps} steps '
              f'(model {metadata["model_hash"]}, seed {cfg.seed})')
    return PathBatch(terminal, full, metadata)


def simulate_driver(model, j, cfg):
    """The factors of asset `j` exactly as `euler_simulate` draws them for `cfg`.
    Args:
        model (ModelSpec): Market model.
        j (int): Asset index.
        cfg (SimConfig): Paths, grid and seed.
    Returns:
        driver (DriverPaths): Chunks concatenated in chunk order.
    """
    if not 0 <= j < model.n:
        raise ValueError(f'Asset index must lie in [0, {model.n}), got {j}')
    chunks = [_asset_driver(model, j, cfg.grid, RngStream(cfg.seed, c), size, cfg.device)
              for c, size in enumerate(chunk_sizes(cfg.n_paths))]
    bm = torch.cat([d.bm for d in chunks], dim=0)
    if chunks[0].volterra is None:
        return DriverPaths(bm)
    return DriverPaths(bm, torch.cat([d.volterra for d in chunks], dim=0))


def martingale_check(batch, s0, flag_at=4., fail_at=6.):
    """Compare sample means of S_T with s0 in standard errors.
    Returns:
        report (list): One dict per asset with z-score and status
            ('ok', 'flag' between `flag_at` and `fail_at`, 'fail' beyond).
    """
    report = []
    n = batch.n_paths
    for j, start in enumerate(s0):
        x = batch.terminal[:, j]
        stderr = x.std(ddof=1) / np.sqrt(n) if n > 1 else 0.
        gap = x.mean() - start
        z = gap / stderr if stderr > 0 else (0. if gap == 0 else np.inf)
        status = 'ok' if abs(z) <= flag_at else ('flag' if abs(z) <= fail_at else 'fail')
        if status != 'ok':
            log.warning(f'Martingale check {status} for asset {j}: z={z:.2f}')
        report.append({'asset': j, 'mean': float(x.mean()), 'stderr': float(stderr),
                       'z': float(z), 'status': status})
    return report


def dump_paths_csv(batch, path):
    """Write a batch to CSV: path_id, asset, S_T (plus step, S for full paths)."""
    n_paths, n_assets = batch.terminal.shape
    if batch.full is None:
        df = pd.DataFrame({
            'path_id': np.repeat(np.arange(n_paths), n_assets),
            'asset': np.tile(np.arange(n_assets), n_paths),
            'S_T': batch.terminal.ravel(),
        })
        return save_table(df, path, 'paths')

    n_nodes = batch.full.shape[1]
    df = pd.DataFrame({
        'path_id': np.repeat(np.arange(n_paths), n_nodes * n_assets),
        'step': np.tile(np.repeat(np.arange(n_nodes), n_assets), n_paths),
        'asset': np.tile(np.arange(n_assets), n_paths * n_nodes),
        'S': batch.full.ravel(),
    })
    return save_table(df, path, 'full_paths')
