import numpy as np
import pytest
import torch
from scipy.stats import kstest

from rankskew.exceptions import DriverFactorizationError
from rankskew.modules.drivers import sample_brownian, sample_joint_driver
from rankskew.modules.grid import TimeGrid
from rankskew.modules.rng import RngStream
from rankskew.modules.volterra import FbmKernel, _cholesky_with_ridge, _volterra_block, \
    cross_covariance, dump_driver_csv, joint_covariance, volterra_covariance, volterra_variance


def test_time_grid_uniform():
    grid = TimeGrid.uniform(1., 0.25)
    assert grid.n_steps == 4
    assert grid.horizon == 1.
    assert grid.is_uniform
    np.testing.assert_allclose(grid.dt, 0.25)


@pytest.mark.parametrize('t', [(0.1, 0.2), (0., 0.2, 0.1), (0., 0.2, np.inf)])
def test_time_grid_rejects_bad_nodes(t):
    with pytest.raises(ValueError):
        TimeGrid(t)


def test_kernel_validation():
    with pytest.raises(ValueError):
        FbmKernel(1.)
    with pytest.raises(ValueError):
        FbmKernel(0.3, normalization='other')
    with pytest.raises(ValueError):
        FbmKernel(0.3, scheme='fft')


@pytest.mark.parametrize('H', [0.2, 0.5, 0.7])
def test_unit_variance_normalization(H):
    kernel = FbmKernel(H)
    assert volterra_variance(0.8, kernel) == pytest.approx(0.8 ** (2 * H), rel=1e-12)
    assert volterra_covariance(0.8, 0.8, kernel) == pytest.approx(0.8 ** (2 * H), rel=1e-12)


@pytest.mark.parametrize('H', [0.2, 0.5, 0.7])
def test_terminal_correlation_with_brownian_motion(H):
    kernel = FbmKernel(H)
    t = 0.6
    corr = cross_covariance(t, t, kernel) / np.sqrt(t * volterra_variance(t, kernel))
    assert corr == pytest.approx(np.sqrt(2 * H) / (H + 0.5), rel=1e-12)


@pytest.mark.parametrize('H', [0.15, 0.3, 0.7, 0.9])
def test_closed_form_block_matches_quadrature(H):
    kernel = FbmKernel(H, normalization='as_written')
    times = np.array([0.05, 0.3, 0.8])
    block = _volterra_block(times, kernel)
    for i, s in enumerate(times):
        for j, t in enumerate(times):
            assert block[i, j] == pytest.approx(volterra_covariance(s, t, kernel), rel=1e-8)


def test_joint_covariance_is_symmetric_positive_definite():
    grid = TimeGrid.uniform(1., 0.125)
    cov = joint_covariance(grid, FbmKernel(0.3))
    assert cov.shape == (16, 16)
    np.testing.assert_allclose(cov, cov.T, atol=1e-14)
    assert np.linalg.eigvalsh(cov).min() > 0


@pytest.mark.parametrize('H', [0.2, 0.5, 0.7])
def test_sampled_joint_law_matches_analytic_covariance(H):
    grid = TimeGrid.uniform(1., 0.125)
    kernel = FbmKernel(H)
    n = 20000
    driver = sample_joint_driver(grid, kernel, n, RngStream(3, 0))
    bm = torch.cumsum(driver.bm, dim=1).numpy()
    x = np.concatenate([bm, driver.volterra[:, 1:].numpy()], axis=1)

    target = joint_covariance(grid, kernel)
    empirical = x.T @ x / n
    diag = np.diag(target)
    stderr = np.sqrt((np.outer(diag, diag) + target ** 2) / n)
    assert np.all(np.abs(empirical - target) <= 5 * stderr)


def test_half_hurst_driver_is_the_brownian_path():
    grid = TimeGrid.uniform(0.5, 0.05)
    driver = sample_joint_driver(grid, FbmKernel(0.5), 10, RngStream(1, 0))
    np.testing.assert_allclose(driver.volterra[:, 1:].numpy(),
                               torch.cumsum(driver.bm, dim=1).numpy(), atol=1e-14)
    assert np.all(driver.volterra[:, 0].numpy() == 0)


def test_driver_is_reproducible():
    grid = TimeGrid.uniform(0.5, 0.05)
    a = sample_joint_driver(grid, FbmKernel(0.3), 20, RngStream(9, 2))
    b = sample_joint_driver(grid, FbmKernel(0.3), 20, RngStream(9, 2))
    assert torch.equal(a.volterra, b.volterra)
    assert torch.equal(a.bm, b.bm)


def test_brownian_driver_has_no_volterra_path():
    driver = sample_brownian(TimeGrid.uniform(0.1, 0.01), 5, RngStream(0, 0))
    assert driver.volterra is None
    assert driver.n_paths == 5
    assert driver.n_steps == 10


def test_non_positive_definite_covariance_raises():
    with pytest.raises(DriverFactorizationError) as info:
        _cholesky_with_ridge(-torch.eye(3, dtype=torch.float64), FbmKernel(0.3), 3)
    assert info.value.n_points == 3
    assert info.value.H == 0.3


def test_dump_driver_csv(tmp_path):
    grid = TimeGrid.uniform(0.04, 0.01)
    driver = sample_joint_driver(grid, FbmKernel(0.3), 3, RngStream(2, 0))
    path = dump_driver_csv(driver, grid, str(tmp_path / 'driver.csv'))
    with open(path) as fh:
        assert fh.readline().startswith('# rankskew driver v1')
        assert fh.readline().strip() == 'path_id,t,B,B_H'
    with open(path) as fh:
        assert len(fh.read().splitlines()) == 2 + 3 * 5


def test_persistent_driver_terminal_variance():
    grid = TimeGrid.uniform(0.25, 0.05)
    n = 100000
    x = sample_joint_driver(grid, FbmKernel(0.7), n, RngStream(12, 0)).volterra[:, -1].numpy()
    var = np.mean(x ** 2)
    stderr = np.sqrt((np.mean(x ** 4) - var ** 2) / n)
    assert abs(var - 0.25 ** 1.4) < 5 * stderr
    assert 0.25 ** 1.4 == pytest.approx(0.14359, abs=1e-5)


def test_rough_driver_correlation_with_brownian_motion():
    grid = TimeGrid.uniform(0.1, 0.02)
    n = 100000
    driver = sample_joint_driver(grid, FbmKernel(0.3), n, RngStream(13, 0))
    corr = np.corrcoef(driver.bm.sum(dim=1).numpy(), driver.volterra[:, -1].numpy())[0, 1]
    expected = np.sqrt(0.6) / 0.8
    assert expected == pytest.approx(0.968246, abs=1e-6)
    assert abs(corr - expected) < 5 * (1. - expected ** 2) / np.sqrt(n)


@pytest.mark.parametrize('scheme', ['cholesky', 'hybrid'])
def test_driver_marginals_are_gaussian(scheme):
    grid = TimeGrid.uniform(0.4, 0.1)
    kernel = FbmKernel(0.3, scheme=scheme)
    driver = sample_joint_driver(grid, kernel, 10000, RngStream(14, 0))
    bm = driver.bm.numpy()
    volterra = driver.volterra[:, 1:].numpy()
    # family-wise 1% level over the 2N marginals
    level = 0.01 / (2 * grid.n_steps)
    for i in range(grid.n_steps):
        assert kstest(bm[:, i] / np.sqrt(grid.dt[i]), 'norm').pvalue > level
        z = volterra[:, i] / volterra[:, i].std()
        assert kstest(z, 'norm').pvalue > level
