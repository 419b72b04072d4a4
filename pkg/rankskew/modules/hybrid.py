"""Hybrid scheme (kappa = 1) for Volterra processes on a uniform grid.

The kernel is integrated exactly over the most recent step, which gives a
2-D Gaussian (dB_i, int_{t_i}^{t_i+1} (t_i+1 - s)^(H-1/2) dB_s) per step. Older
steps use a Riemann sum with the optimal evaluation points b_k, computed as
a causal convolution of the Brownian increments.
"""
import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from rankskew.modules.rng import standard_normals
from rankskew.modules.volterra import DriverPaths


def optimal_points(k, alpha):
    """b_k = ((k^(a+1) - (k-1)^(a+1)) / (a+1))^(1/a), k >= 1."""
    k = np.asarray(k, dtype=np.float64)
    if abs(alpha) < 1e-14:
        return k - 0.5
    return ((k ** (alpha + 1.) - (k - 1.) ** (alpha + 1.)) / (alpha + 1.)) ** (1. / alpha)


def step_covariance(dt, alpha):
    """Covariance of (dB, local Volterra integral) over one step of length dt."""
    return np.array([
        [dt, dt ** (alpha + 1.) / (alpha + 1.)],
        [dt ** (alpha + 1.) / (alpha + 1.), dt ** (2. * alpha + 1.) / (2. * alpha + 1.)],
    ])


class VolterraConv1d(nn.Module):
    """Causal convolution y_i = sum_k g_k x_(i-k), i = 0..N, with fixed weights.
    Args:
        weights (torch.Tensor): Kernel g_0..g_K-1.
    """
    def __init__(self, weights):
        super().__init__()
        self.register_buffer('weight', weights.flip(-1).view(1, 1, -1))

    def forward(self, x):
        # x: (paths, N) -> (paths, N + 1)
        k = self.weight.shape[-1]
        x = F.pad(x.unsqueeze(1), (k - 1, 1))
        return F.conv1d(x, self.weight).squeeze(1)


def sample_hybrid_driver(grid, kernel, n_paths, stream, device='cpu'):
    """Approximate joint samples of (B, B^H) with the first-order hybrid scheme.
    Args:
        grid (TimeGrid): Uniform simulation grid.
        kernel (FbmKernel): Kernel and normalization.
        n_paths (int): Number of paths.
        stream (RngStream): Source of normals.
        device (str): Torch device of the returned tensors.
    Returns:
        driver (DriverPaths): Increments and Volterra values at the nodes.
    """
    if not grid.is_uniform:
        raise ValueError('The hybrid scheme needs a uniform time grid')
    n = grid.n_steps
    dt = float(grid.dt[0])
    alpha = kernel.alpha

    z = torch.from_numpy(standard_normals(stream.child(0), (n_paths, n)))
    zeros = torch.zeros(n_paths, 1, dtype=torch.float64)
    if kernel.H == 0.5:
        bm = z * dt ** 0.5
        volterra = torch.cat([zeros, torch.cumsum(bm, dim=1)], dim=1)
        return DriverPaths(bm.to(device), volterra.to(device))

    w = torch.from_numpy(standard_normals(stream.child(1), (n_paths, n)))
    chol = torch.from_numpy(np.linalg.cholesky(step_covariance(dt, alpha)))
    bm = chol[0, 0] * z
    local = chol[1, 0] * z + chol[1, 1] * w

    weights = np.zeros(n + 1)
    if n >= 2:
        weights[2:] = (optimal_points(np.arange(2, n + 1), alpha) * dt) ** alpha
    conv = VolterraConv1d(torch.from_numpy(weights))
    remote = conv(bm)

    volterra = remote.clone()
    volterra[:, 1:] += local
    volterra = kernel.constant * volterra
    volterra[:, 0] = 0.
    return DriverPaths(bm.to(device), volterra.to(device))
