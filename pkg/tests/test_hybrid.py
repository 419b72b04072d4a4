import numpy as np
import pytest
import torch

from rankskew.modules.grid import TimeGrid
from rankskew.modules.hybrid import VolterraConv1d, optimal_points, sample_hybrid_driver, \
    step_covariance
from rankskew.modules.rng import RngStream
from rankskew.modules.volterra import FbmKernel


def test_optimal_points_lie_inside_their_step():
    k = np.arange(1, 50)
    for alpha in (-0.3, -0.1, 0.2, 0.4):
        b = optimal_points(k, alpha)
        assert np.all(b > k - 1) and np.all(b < k)
    np.testing.assert_allclose(optimal_points(k, 0.), k - 0.5)


def test_step_covariance_is_positive_definite():
    for alpha in (-0.4, -0.2, 0.2):
        cov = step_covariance(0.01, alpha)
        assert np.linalg.eigvalsh(cov).min() > 0


def test_conv_matches_direct_sum():
    rng = np.random.default_rng(0)
    x = torch.from_numpy(rng.standard_normal((3, 5)))
    g = torch.from_numpy(rng.standard_normal(6))
    y = VolterraConv1d(g)(x)
    assert y.shape == (3, 6)
    for i in range(6):
        expected = sum(g[k] * x[:, i - k] for k in range(6) if 0 <= i - k < 5)
        expected = expected if torch.is_tensor(expected) else torch.zeros(3, dtype=torch.float64)
        np.testing.assert_allclose(y[:, i].numpy(), expected.numpy(), atol=1e-12)


def hybrid_variance(kernel, n_steps, dt):
    """Variance of the hybrid scheme at each node: local step plus Riemann sum."""
    alpha = kernel.alpha
    local = step_covariance(dt, alpha)[1, 1]
    g2 = np.zeros(n_steps + 1)
    if n_steps >= 2:
        g2[2:] = (optimal_points(np.arange(2, n_steps + 1), alpha) * dt) ** (2. * alpha)
    return kernel.constant ** 2 * (local + dt * np.cumsum(g2)[1:])


@pytest.mark.parametrize('H', [0.5, 0.6, 0.7, 0.8, 0.95])
@pytest.mark.parametrize('n_steps', [4, 16, 64])
def test_hybrid_variance_within_two_percent_of_exact(H, n_steps):
    kernel = FbmKernel(H, scheme='hybrid')
    grid = TimeGrid.uniform(1., 1. / n_steps)
    exact = grid.array[1:] ** (2. * H)
    np.testing.assert_allclose(hybrid_variance(kernel, n_steps, 1. / n_steps), exact, rtol=0.02)


@pytest.mark.parametrize('H', [0.3, 0.7])
def test_hybrid_terminal_variance(H):
    grid = TimeGrid.uniform(1., 0.02)
    kernel = FbmKernel(H, scheme='hybrid')
    n = 20000
    driver = sample_hybrid_driver(grid, kernel, n, RngStream(4, 0))
    x = driver.volterra[:, -1].numpy()
    var = np.mean(x ** 2)
    stderr = np.sqrt((np.mean(x ** 4) - var ** 2) / n)
    assert abs(var - hybrid_variance(kernel, grid.n_steps, 0.02)[-1]) < 5 * stderr
    assert torch.all(driver.volterra[:, 0] == 0)


def test_hybrid_half_hurst_is_brownian():
    grid = TimeGrid.uniform(0.2, 0.01)
    driver = sample_hybrid_driver(grid, FbmKernel(0.5, scheme='hybrid'), 8, RngStream(2, 0))
    np.testing.assert_allclose(driver.volterra[:, 1:].numpy(),
                               torch.cumsum(driver.bm, dim=1).numpy(), atol=1e-14)


def test_hybrid_needs_uniform_grid():
    grid = TimeGrid((0., 0.1, 0.3))
    with pytest.raises(ValueError):
        sample_hybrid_driver(grid, FbmKernel(0.3, scheme='hybrid'), 4, RngStream(0, 0))
