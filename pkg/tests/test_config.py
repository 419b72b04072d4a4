import json

import pytest

from rankskew.exceptions import ConfigError
from rankskew.experiments.config import DEFAULT_PATHS, DEFAULT_SEED, apply_overrides, \
    config_from_dict, config_to_dict, load_config, parse_config
from rankskew.experiments.presets import PRESETS, get_preset
from rankskew.model.dynamics import DT_GBM, GBM


def minimal(**extra):
    raw = {'model': {'assets': [{'type': 'gbm', 'sigma': 0.2}, {'type': 'gbm', 'sigma': 0.6}]},
           'index': {'s0': [100, 100], 'w': [1]}}
    raw.update(extra)
    return raw


def field_of(raw):
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    return info.value.field


@pytest.mark.parametrize('name', sorted(PRESETS))
def test_presets_survive_json(name):
    cfg = get_preset(name)
    assert parse_config(json.dumps(config_to_dict(cfg))) == cfg


def test_defaults():
    cfg = config_from_dict(minimal(), default_name='mine')
    assert cfg.name == 'mine'
    assert cfg.seed == DEFAULT_SEED and cfg.n_paths == DEFAULT_PATHS
    assert cfg.dt == DT_GBM
    assert cfg.model.assets == (GBM(0.2), GBM(0.6))
    assert cfg.index.n_top == 1
    assert len(cfg.maturities) == 16
    assert not cfg.is_family


def test_invalid_json_reports_line():
    text = '{\n  "model": {},\n  "index": {"s0": [100, 100],, "w": [1]}\n}\n'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == 3
    assert 'line 3' in str(info.value)


def test_unknown_keys_name_the_field():
    assert field_of(minimal(sedd=3)) == 'sedd'
    raw = minimal()
    raw['model']['assets'][0] = {'type': 'gbm', 'sigmaa': 0.2}
    assert field_of(raw) == 'model.assets[0].sigmaa'
    assert field_of(minimal(simulation={'paths': 10})) == 'simulation.paths'


def test_value_errors_name_the_field():
    raw = minimal()
    raw['model']['assets'][1] = {'type': 'fss', 'sigma0': 0.6, 'H': 1.2, 'rho': 0.}
    assert field_of(raw) == 'model.assets[1].H'

    raw = minimal()
    raw['index']['w'] = [0.]
    assert field_of(raw) == 'index.w[0]'

    raw = minimal()
    raw['model']['assets'].append({'type': 'gbm', 'sigma': 0.3})
    raw['index']['s0'] = [100, 96, 100]
    with pytest.raises(ConfigError, match='adjacent'):
        config_from_dict(raw)

    assert field_of(minimal(maturities=[0.1, 0.05])) == 'maturities'
    assert field_of(minimal(skew={'method': 'formula'})) == 'skew.method'
    assert field_of(minimal(seed=-1)) == 'seed'
    assert field_of({'index': {'s0': [100], 'w': [1]}}) == 'model'


def test_asset_count_must_match_prices():
    raw = minimal()
    raw['index']['s0'] = [100, 99, 98]
    assert field_of(raw) == 'index.s0'


def test_family_section():
    cfg = config_from_dict(minimal(s0_family=[[100, 94], [100, 98], [100, 100]]))
    assert cfg.is_family and cfg.s0_family[-1] == (100., 100.)
    assert field_of(minimal(s0_family=[[100, 94], [100, 98]])) == 's0_family'
    assert field_of(minimal(s0_family=[[100, 94], [100, 100]])) == 's0_family'


def test_explicit_maturity_grid():
    cfg = config_from_dict(minimal(maturities={'count': 4, 'lo': 0.01, 'hi': 0.08}))
    assert cfg.maturities == pytest.approx((0.01, 0.02, 0.04, 0.08))


def test_apply_overrides():
    cfg = get_preset('gbm-tie')
    changed = apply_overrides(cfg, paths=100, seed=5, dt=1e-3, out='elsewhere')
    assert (changed.n_paths, changed.seed, changed.dt, changed.output_dir) == \
        (100, 5, 1e-3, 'elsewhere')
    assert changed.model == cfg.model
    assert apply_overrides(cfg) == cfg
    with pytest.raises(ConfigError):
        apply_overrides(cfg, paths=1)


def test_load_config(tmp_path):
    path = tmp_path / 'exp.json'
    path.write_text(json.dumps(minimal(experiment='from-file', seed=9)))
    cfg = load_config(str(path))
    assert cfg.name == 'from-file' and cfg.seed == 9
