import numpy as np
import pytest
import torch

from rankskew.exceptions import SimulationError
from rankskew.model.dynamics import DT_FRACTIONAL, GBM, FractionalBergomi, FractionalSteinStein, \
    ModelSpec, SimConfig, _first_bad_step, dump_paths_csv, euler_simulate, martingale_check, \
    simulate_driver, vol_path
from rankskew.modules.drivers import sample_brownian, sample_joint_driver
from rankskew.modules.grid import TimeGrid
from rankskew.modules.rng import CHUNK_SIZE, RngStream
from rankskew.util import load_table


def test_asset_validation():
    with pytest.raises(ValueError):
        GBM(-0.1)
    with pytest.raises(ValueError):
        FractionalSteinStein(0.2, 1.2)
    with pytest.raises(ValueError):
        FractionalSteinStein(0.2, 0.3, rho=1.5)
    with pytest.raises(ValueError):
        FractionalBergomi(0.04, -1., 0.3)
    with pytest.raises(ValueError):
        ModelSpec(())
    with pytest.raises(ValueError):
        ModelSpec((GBM(0.2),), scheme='fft')


def test_model_summaries(fss_model):
    model = ModelSpec((GBM(0.2), FractionalBergomi(0.36, 3.61, 0.6)))
    np.testing.assert_allclose(model.v0(), [0.04, 0.36])
    np.testing.assert_allclose(model.hurst(), [0.5, 0.6])
    assert model.kernel(0) is None
    assert model.kernel(1).H == 0.6
    assert fss_model.fingerprint() == ModelSpec(fss_model.assets).fingerprint()
    assert fss_model.fingerprint() != model.fingerprint()


def test_sim_config_equality_ignores_workers():
    a = SimConfig.for_maturity(0.1, 0.01, 100, 1, workers=1)
    b = SimConfig.for_maturity(0.1, 0.01, 100, 1, workers=4)
    assert a == b and hash(a) == hash(b)
    with pytest.raises(ValueError):
        SimConfig.for_maturity(0.1, 0.01, 0, 1)


def test_vol_path_starts_at_spot():
    grid = TimeGrid.uniform(0.1, 0.01)
    model = ModelSpec((GBM(0.3), FractionalSteinStein(0.2, 0.3, -0.5),
                       FractionalBergomi(0.04, 3.61, 0.7)))
    stream = RngStream(1, 0)
    assert torch.all(vol_path(model, 0, sample_brownian(grid, 5, stream), grid) == 0.3)
    for j, start in ((1, 0.2), (2, 0.04)):
        driver = sample_joint_driver(grid, model.kernel(j), 5, stream.child(j))
        path = vol_path(model, j, driver, grid)
        assert path.shape == (5, 11)
        np.testing.assert_allclose(path[:, 0].numpy(), start)


def test_vol_path_needs_fractional_driver():
    grid = TimeGrid.uniform(0.1, 0.01)
    model = ModelSpec((FractionalSteinStein(0.2, 0.3),))
    with pytest.raises(ValueError):
        vol_path(model, 0, sample_brownian(grid, 5, RngStream(0, 0)), grid)


def test_simulation_shapes_and_read_only(gbm_model):
    cfg = SimConfig.for_maturity(0.01, 0.001, 300, 5, store_full_paths=True)
    batch = euler_simulate(gbm_model, (100., 96.), cfg)
    assert batch.terminal.shape == (300, 2)
    assert batch.full.shape == (300, 11, 2)
    np.testing.assert_allclose(batch.full[:, 0, :], [[100., 96.]] * 300)
    np.testing.assert_array_equal(batch.full[:, -1, :], batch.terminal)
    assert not batch.terminal.flags.writeable
    assert batch.metadata['seed'] == 5
    with pytest.raises(TypeError):
        batch.metadata['seed'] = 6


def test_result_does_not_depend_on_workers(fss_model):
    one = SimConfig.for_maturity(0.01, DT_FRACTIONAL, 2500, 3, workers=1)
    three = SimConfig.for_maturity(0.01, DT_FRACTIONAL, 2500, 3, workers=3)
    a = euler_simulate(fss_model, (100., 100.), one)
    b = euler_simulate(fss_model, (100., 100.), three)
    np.testing.assert_array_equal(a.terminal, b.terminal)


def test_seed_changes_paths(gbm_model):
    a = euler_simulate(gbm_model, (100., 100.), SimConfig.for_maturity(0.01, 0.001, 50, 1))
    b = euler_simulate(gbm_model, (100., 100.), SimConfig.for_maturity(0.01, 0.001, 50, 2))
    assert not np.array_equal(a.terminal, b.terminal)


@pytest.mark.parametrize('model', [
    ModelSpec((GBM(0.2), GBM(0.6))),
    ModelSpec((FractionalSteinStein(0.2, 0.3, -0.5), FractionalSteinStein(0.6, 0.7, -0.5))),
    ModelSpec((FractionalBergomi(0.04, 3.61, 0.7), FractionalBergomi(0.36, 3.61, 0.6)),
              scheme='hybrid'),
])
def test_prices_are_martingales(model):
    cfg = SimConfig.for_maturity(0.05, DT_FRACTIONAL, 8000, 11)
    batch = euler_simulate(model, (100., 100.), cfg)
    for row in martingale_check(batch, (100., 100.)):
        assert row['status'] != 'fail'


def test_invalid_initial_prices(gbm_model):
    cfg = SimConfig.for_maturity(0.01, 0.001, 10, 1)
    with pytest.raises(ValueError):
        euler_simulate(gbm_model, (100., -1.), cfg)
    with pytest.raises(ValueError):
        euler_simulate(gbm_model, (100.,), cfg)


def test_first_bad_step():
    z = torch.zeros(3, 5, dtype=torch.float64)
    assert _first_bad_step(z) is None
    z[1, 3] = float('nan')
    z[2, 4] = float('inf')
    assert _first_bad_step(z) == 3
    err = SimulationError(4, asset=1)
    assert err.step == 4 and err.asset == 1


def test_dump_paths_csv(tmp_path, gbm_model):
    cfg = SimConfig.for_maturity(0.01, 0.005, 4, 1, store_full_paths=True)
    batch = euler_simulate(gbm_model, (100., 96.), cfg)
    path = dump_paths_csv(batch, str(tmp_path / 'paths.csv'))
    df = load_table(path, 'full_paths')
    assert list(df.columns) == ['path_id', 'step', 'asset', 'S']
    assert len(df) == 4 * 3 * 2
    np.testing.assert_allclose(df['S'].to_numpy(), batch.full.ravel(), rtol=1e-11)


def test_zero_volatility_keeps_prices():
    model = ModelSpec((GBM(0.), GBM(0.)))
    batch = euler_simulate(model, (100., 96.), SimConfig.for_maturity(0.1, 0.01, 50, 1))
    np.testing.assert_allclose(batch.terminal, [[100., 96.]] * 50, rtol=1e-14)


def test_gbm_log_price_law():
    # log-Euler is exact for GBM, so a coarse grid suffices
    model = ModelSpec((GBM(0.2),))
    n = 100000
    batch = euler_simulate(model, (100.,), SimConfig.for_maturity(1., 0.1, n, 21))
    s = batch.terminal[:, 0]
    assert abs(s.mean() - 100.) < 3 * s.std(ddof=1) / np.sqrt(n)
    x = np.log(s)
    var = x.var(ddof=1)
    centered = x - x.mean()
    stderr = np.sqrt((np.mean(centered ** 4) - var ** 2) / n)
    assert abs(var - 0.04) < 5 * stderr


def test_scaling_initial_prices_scales_paths(fss_model):
    cfg = SimConfig.for_maturity(0.02, DT_FRACTIONAL, 1500, 8)
    base = euler_simulate(fss_model, (100., 96.), cfg)
    scaled = euler_simulate(fss_model, (300., 288.), cfg)
    np.testing.assert_allclose(scaled.terminal, 3. * base.terminal, rtol=1e-12)


def test_grid_refinement_keeps_gbm_mean(gbm_model):
    n = 20000
    means, errs = [], []
    for dt in (0.01, 0.005):
        s = euler_simulate(gbm_model, (100., 96.), SimConfig.for_maturity(0.1, dt, n, 4)).terminal
        means.append(s.mean(axis=0))
        errs.append(s.std(axis=0, ddof=1) / np.sqrt(n))
    # the two grids draw independent normals
    assert np.all(np.abs(means[0] - means[1]) < 3 * np.hypot(errs[0], errs[1]))


def test_bergomi_variance_has_mean_var0():
    model = ModelSpec((FractionalBergomi(0.04, 3.61, 0.7),))
    grid = TimeGrid.uniform(0.25, 0.05)
    n = 100000
    driver = sample_joint_driver(grid, model.kernel(0), n, RngStream(6, 0))
    v = vol_path(model, 0, driver, grid)[:, -1].numpy()
    assert abs(v.mean() - 0.04) < 5 * v.std(ddof=1) / np.sqrt(n)


def test_bergomi_variance_ignores_kernel_normalization():
    grid = TimeGrid.uniform(0.1, 0.02)
    unit = ModelSpec((FractionalBergomi(0.04, 1.9, 0.3),))
    written = ModelSpec((FractionalBergomi(0.04, 1.9, 0.3),), normalization='as_written')
    a = vol_path(unit, 0, sample_joint_driver(grid, unit.kernel(0), 50, RngStream(3, 0)), grid)
    b = vol_path(written, 0, sample_joint_driver(grid, written.kernel(0), 50, RngStream(3, 0)),
                 grid)
    np.testing.assert_allclose(a.numpy(), b.numpy(), rtol=1e-10)


def test_simulated_driver_reproduces_the_paths():
    # GBM asset and a fully leveraged Stein-Stein asset, so dW drops out
    model = ModelSpec((GBM(0.2), FractionalSteinStein(0.6, 0.3, -1.)))
    n = CHUNK_SIZE + 300
    cfg = SimConfig.for_maturity(0.01, 0.001, n, 19)
    batch = euler_simulate(model, (100., 96.), cfg)
    dt = torch.from_numpy(cfg.grid.dt)

    gbm = simulate_driver(model, 0, cfg)
    assert gbm.n_paths == n and gbm.volterra is None
    expected = np.log(100.) - 0.02 * 0.01 + 0.2 * gbm.bm.sum(dim=1).numpy()
    np.testing.assert_allclose(np.log(batch.terminal[:, 0]), expected, rtol=1e-12)

    fss = simulate_driver(model, 1, cfg)
    level = vol_path(model, 1, fss, cfg.grid)[:, :-1]
    z = np.log(96.) + torch.sum(-0.5 * level ** 2 * dt - level * fss.bm, dim=1).numpy()
    np.testing.assert_allclose(np.log(batch.terminal[:, 1]), z, rtol=1e-12)

    with pytest.raises(ValueError):
        simulate_driver(model, 2, cfg)
