"""Entry point for sampling the factors of one asset."""
import torch

from rankskew.modules.hybrid import sample_hybrid_driver
from rankskew.modules.rng import standard_normals
from rankskew.modules.volterra import DriverPaths, sample_cholesky_driver


def sample_joint_driver(grid, kernel, n_paths, stream, device='cpu'):
    """Sample (B, B^H) on `grid` with the scheme named by `kernel.scheme`.
    Args:
        grid (TimeGrid): Simulation grid.
        kernel (FbmKernel): Kernel, normalization and scheme.
        n_paths (int): Number of paths, >= 1.
        stream (RngStream): Source of normals.
        device (str): Torch device of the returned tensors.
    Returns:
        driver (DriverPaths): Brownian increments and Volterra node values.
    """
    if n_paths < 1:
        raise ValueError(f'n_paths must be >= 1, got {n_paths}')
    if kernel.scheme == 'hybrid':
        return sample_hybrid_driver(grid, kernel, n_paths, stream, device)
    return sample_cholesky_driver(grid, kernel, n_paths, stream, device)


def sample_brownian(grid, n_paths, stream, device='cpu'):
    """Brownian increments only, for assets without a fractional factor."""
    if n_paths < 1:
        raise ValueError(f'n_paths must be >= 1, got {n_paths}')
    z = torch.from_numpy(standard_normals(stream.child(0), (n_paths, grid.n_steps)))
    return DriverPaths((z * torch.from_numpy(grid.dt).sqrt()).to(device))
