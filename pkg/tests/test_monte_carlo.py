import numpy as np
import pytest
from scipy.stats import norm

from rankskew.model.dynamics import DT_GBM, GBM, ModelSpec, SimConfig
from rankskew.model.index import IndexSpec, futures_price, terminal_index
from rankskew.pricing.monte_carlo import MIN_DK, SkewEstimate, atm_skew, atm_skew_digital, \
    atm_skew_fd, default_dk, mc_call_price, mc_digital


def test_skew_estimate_validation():
    SkewEstimate(0.1, 0.5, 0.01, 'digital')
    with pytest.raises(ValueError):
        SkewEstimate(0.1, 0.5, 0.01, 'formula')
    with pytest.raises(ValueError):
        SkewEstimate(0.1, 0.5, -0.01, 'digital')
    with pytest.raises(ValueError):
        SkewEstimate(0.1, 0.5, 0.01, 'finite_difference', dk=0.)


def test_default_dk():
    assert default_dk(0.2, 0.25) == pytest.approx(0.05)
    assert default_dk(0.2, 1e-6) == MIN_DK


def test_call_and_digital_prices(gbm_model, tie_spec, short_cfg):
    T = 0.02
    F = futures_price(gbm_model, tie_spec, T, short_cfg).value
    call = mc_call_price(gbm_model, tie_spec, T, 0., F, short_cfg)
    digital = mc_digital(gbm_model, tie_spec, T, F, short_cfg)
    values = terminal_index(gbm_model, tie_spec, short_cfg)
    assert call.value == pytest.approx(np.maximum(values - F, 0.).mean())
    assert 0. < digital.value < 1.
    assert digital.stderr == pytest.approx(np.sqrt(digital.value * (1 - digital.value) / 4000))
    with pytest.raises(ValueError):
        mc_call_price(gbm_model, tie_spec, T, 0., -1., short_cfg)


def test_single_gbm_has_flat_smile():
    model = ModelSpec((GBM(0.2),))
    spec = IndexSpec((100.,), (1.,))
    T = 0.05
    cfg = SimConfig.for_maturity(T, DT_GBM, 20000, 5)
    est = atm_skew_fd(model, spec, T, cfg)
    assert abs(est.skew) < 4 * est.stderr
    assert est.sigma_atm == pytest.approx(0.2, abs=0.01)
    assert est.dk == pytest.approx(default_dk(est.sigma_atm, T))


def test_tie_skew_is_positive_and_reproducible(gbm_model, tie_spec, short_cfg):
    a = atm_skew(gbm_model, tie_spec, 0.02, short_cfg)
    terminal_index.cache_clear()
    b = atm_skew(gbm_model, tie_spec, 0.02, short_cfg)
    assert a == b
    assert a.skew > 3 * a.stderr


def test_estimators_share_paths(gbm_model, tie_spec, short_cfg):
    fd = atm_skew(gbm_model, tie_spec, 0.02, short_cfg, method='finite_difference')
    digital = atm_skew(gbm_model, tie_spec, 0.02, short_cfg, method='digital')
    assert digital.method == 'digital' and digital.dk is None
    assert fd.sigma_atm == digital.sigma_atm
    assert fd.futures == digital.futures
    with pytest.raises(ValueError):
        atm_skew(gbm_model, tie_spec, 0.02, short_cfg, method='formula')


def test_fixed_dk_is_used(gbm_model, distinct_spec, short_cfg):
    est = atm_skew_fd(gbm_model, distinct_spec, 0.02, short_cfg, dk=0.02)
    assert est.dk == 0.02
    with pytest.raises(ValueError):
        atm_skew_fd(gbm_model, distinct_spec, 0.02, short_cfg, dk=-0.01)


@pytest.mark.slow
@pytest.mark.parametrize('s0', [(100., 96.), (100., 100.)])
def test_estimators_agree(gbm_model, s0):
    spec = IndexSpec(s0, (1.,))
    for i, T in enumerate((2. / 365, 0.02, 0.1)):
        cfg = SimConfig.for_maturity(T, DT_GBM, 50000, 100 + i)
        fd = atm_skew_fd(gbm_model, spec, T, cfg)
        digital = atm_skew_digital(gbm_model, spec, T, cfg)
        assert abs(fd.skew - digital.skew) < 3 * np.hypot(fd.stderr, digital.stderr)


@pytest.fixture
def single_gbm():
    return ModelSpec((GBM(0.2),)), IndexSpec((100.,), (1.,))


def test_single_asset_call_is_black_scholes(single_gbm):
    model, spec = single_gbm
    cfg = SimConfig.for_maturity(1., 0.1, 50000, 31)
    call = mc_call_price(model, spec, 1., 0., 100., cfg)
    assert abs(call.value - 7.96557) < 3 * call.stderr


def test_call_prices_decrease_in_strike(gbm_model, tie_spec, short_cfg):
    T = 0.02
    F = futures_price(gbm_model, tie_spec, T, short_cfg).value
    ks = np.linspace(-0.1, 0.1, 41)
    prices = [mc_call_price(gbm_model, tie_spec, T, k, F, short_cfg).value for k in ks]
    assert np.all(np.diff(prices) <= 0.)

    far = mc_call_price(gbm_model, tie_spec, T, 50., F, short_cfg)
    assert far.value == 0. and far.stderr == 0.
    k = -5.
    deep = mc_call_price(gbm_model, tie_spec, T, k, F, short_cfg)
    # E[I_T] on these paths is F itself
    assert deep.value - (F - F * np.exp(k)) == pytest.approx(0., abs=1e-9)


def test_single_asset_digital(single_gbm):
    model, spec = single_gbm
    cfg = SimConfig.for_maturity(1., 0.1, 50000, 32)
    digital = mc_digital(model, spec, 1., 100., cfg)
    assert norm.cdf(-0.1) == pytest.approx(0.460172, abs=1e-6)
    assert abs(digital.value - norm.cdf(-0.1)) < 3 * digital.stderr
    assert mc_digital(model, spec, 1., 1e-12, cfg).value == 1.
    assert mc_digital(model, spec, 1., 1e12, cfg).value == 0.


def test_tie_skew_grows_and_vol_stays_bounded(gbm_model, tie_spec):
    skews, vols = {}, {}
    for i, T in enumerate((1. / 365, 1. / 52, 1. / 12, 0.25)):
        est = atm_skew_fd(gbm_model, tie_spec, T, SimConfig.for_maturity(T, T / 10, 20000, 50 + i))
        skews[T], vols[T] = est.skew, est.sigma_atm
    assert abs(skews[1. / 52]) > abs(skews[0.25])
    # ATM implied vol of order one: at most twice the largest vol times the largest weight
    assert all(0. < v <= 2. * 0.6 * 1. for v in vols.values())


def test_halving_dk_is_consistent(gbm_model, tie_spec):
    T = 0.05
    cfg = SimConfig.for_maturity(T, T / 10, 20000, 61)
    wide = atm_skew_fd(gbm_model, tie_spec, T, cfg)
    narrow = atm_skew_fd(gbm_model, tie_spec, T, cfg, dk=0.5 * wide.dk)
    assert narrow.dk == pytest.approx(0.5 * wide.dk)
    assert abs(wide.skew - narrow.skew) < 3 * np.hypot(wide.stderr, narrow.stderr)
