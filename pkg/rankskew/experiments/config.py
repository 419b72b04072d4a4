"""Experiment configuration: a JSON file with nested sections.

    {
        "experiment": "gbm-tie",
        "seed": 224,
        "model": {"normalization": "unit_variance", "scheme": "cholesky",
                  "assets": [{"type": "gbm", "sigma": 0.2},
                             {"type": "fss", "sigma0": 0.6, "H": 0.7, "rho": -0.5},
                             {"type": "bergomi", "var0": 0.04, "eta": 3.61, "H": 0.6}]},
        "index": {"s0": [100, 100], "w": [1], "n_top": 1},
        "simulation": {"n_paths": 50000, "dt": 0.000136986, "store_full_paths": false},
        "maturities": {"count": 16, "lo": 0.00273972, "hi": 0.25},
        "s0_family": [[100, 94], [100, 96], [100, 98], [100, 100]],
        "skew": {"method": "finite_difference", "dk": null},
        "output_dir": null
    }

`maturities` is either such a log-spaced grid or an explicit list. Every
section except `model` and `index` may be omitted. Unknown keys are errors.
"""
from dataclasses import dataclass, replace
from json import JSONDecodeError, loads
from typing import Optional, Tuple

import numpy as np

from rankskew.exceptions import ConfigError
from rankskew.model.dynamics import DT_GBM, DT_FRACTIONAL, GBM, FractionalBergomi, \
    FractionalSteinStein, ModelSpec
from rankskew.model.index import IndexSpec
from rankskew.modules.volterra import NORMALIZATIONS, SCHEMES
from rankskew.pricing.monte_carlo import METHODS
from rankskew.termstructure.curves import default_maturities

DEFAULT_SEED = 224
DEFAULT_PATHS = 30000

ASSET_TYPES = {
    'gbm': (GBM, ('sigma',)),
    'fss': (FractionalSteinStein, ('sigma0', 'H', 'rho')),
    'bergomi': (FractionalBergomi, ('var0', 'eta', 'H', 'rho')),
}
TOP_LEVEL_KEYS = ('experiment', 'seed', 'model', 'index', 'simulation', 'maturities',
                  's0_family', 'skew', 'output_dir')


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; frozen so it can be echoed and compared."""
    name: str
    model: ModelSpec
    index: IndexSpec
    n_paths: int = DEFAULT_PATHS
    dt: float = DT_FRACTIONAL
    seed: int = DEFAULT_SEED
    maturities: Tuple[float, ...] = default_maturities()
    s0_family: Optional[Tuple[Tuple[float, ...], ...]] = None
    output_dir: Optional[str] = None
    method: str = 'finite_difference'
    dk: Optional[float] = None
    store_full_paths: bool = False

    @property
    def is_family(self):
        return self.s0_family is not None


def _check_keys(section, allowed, path):
    if not isinstance(section, dict):
        raise ConfigError('expected an object', field=path or None)
    for key in section:
        if key not in allowed:
            dotted = f'{path}.{key}' if path else key
            raise ConfigError(f'unknown key (allowed: {", ".join(allowed)})', field=dotted)


def _number(value, path, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f'expected a number, got {value!r}', field=path)
    if integer and int(value) != value:
        raise ConfigError(f'expected an integer, got {value!r}', field=path)
    if not np.isfinite(value):
        raise ConfigError('must be finite', field=path)
    if positive and not value > 0:
        raise ConfigError(f'must be positive, got {value}', field=path)
    return int(value) if integer else float(value)


def _check_s0(s0, path):
    if not isinstance(s0, (list, tuple)) or not s0:
        raise ConfigError('expected a non-empty list of prices', field=path)
    s0 = tuple(_number(x, f'{path}[{i}]', positive=True) for i, x in enumerate(s0))
    for i, x in enumerate(s0):
        later = [j for j in range(i + 1, len(s0)) if s0[j] == x]
        if any(j != i + 1 for j in later):
            raise ConfigError(f'tied prices {x} must be adjacent', field=path)
    if any(b > a for a, b in zip(s0, s0[1:])):
        raise ConfigError(f'prices must be sorted non-increasing, got {list(s0)}', field=path)
    if sum(a == b for a, b in zip(s0, s0[1:])) > 1:
        raise ConfigError('at most one pair of prices may be tied', field=path)
    return s0


def _parse_asset(raw, path):
    if not isinstance(raw, dict) or 'type' not in raw:
        raise ConfigError('asset needs a "type"', field=path)
    if raw['type'] not in ASSET_TYPES:
        raise ConfigError(f'unknown asset type "{raw["type"]}" '
                          f'(one of {", ".join(ASSET_TYPES)})', field=f'{path}.type')
    cls, names = ASSET_TYPES[raw['type']]
    _check_keys(raw, ('type',) + names, path)
    values = {}
    for name in names:
        if name in raw:
            values[name] = _number(raw[name], f'{path}.{name}')
    if 'H' in values and not 0. < values['H'] < 1.:
        raise ConfigError(f'Hurst exponent must lie in (0, 1), got {values["H"]}',
                          field=f'{path}.H')
    if 'rho' in values and not -1. <= values['rho'] <= 1.:
        raise ConfigError(f'correlation must lie in [-1, 1], got {values["rho"]}',
                          field=f'{path}.rho')
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), field=path) from e


def _parse_model(raw):
    _check_keys(raw, ('normalization', 'scheme', 'assets'), 'model')
    normalization = raw.get('normalization', 'unit_variance')
    if normalization not in NORMALIZATIONS:
        raise ConfigError(f'unknown normalization "{normalization}"', field='model.normalization')
    scheme = raw.get('scheme', 'cholesky')
    if scheme not in SCHEMES:
        raise ConfigError(f'unknown scheme "{scheme}"', field='model.scheme')
    assets = raw.get('assets')
    if not isinstance(assets, list) or not assets:
        raise ConfigError('expected a non-empty list of assets', field='model.assets')
    return ModelSpec(tuple(_parse_asset(a, f'model.assets[{i}]') for i, a in enumerate(assets)),
                     normalization, scheme)


def _parse_index(raw):
    _check_keys(raw, ('s0', 'w', 'n_top'), 'index')
    s0 = _check_s0(raw.get('s0'), 'index.s0')
    w = raw.get('w')
    if not isinstance(w, list) or not w:
        raise ConfigError('expected a non-empty list of weights', field='index.w')
    w = tuple(_number(x, f'index.w[{i}]') for i, x in enumerate(w))
    for i, x in enumerate(w):
        if not x > 0:
            raise ConfigError(f'weights must be positive, got {x}', field=f'index.w[{i}]')
    n_top = raw.get('n_top', len(w))
    n_top = _number(n_top, 'index.n_top', positive=True, integer=True)
    try:
        return IndexSpec(s0, w, n_top)
    except ValueError as e:
        raise ConfigError(str(e), field='index') from e


def _parse_maturities(raw):
    if isinstance(raw, dict):
        _check_keys(raw, ('count', 'lo', 'hi'), 'maturities')
        count = _number(raw.get('count', 16), 'maturities.count', positive=True, integer=True)
        lo = _number(raw.get('lo', 1. / 365), 'maturities.lo', positive=True)
        hi = _number(raw.get('hi', 0.25), 'maturities.hi', positive=True)
        if not lo < hi:
            raise ConfigError(f'lo must be below hi, got {lo} >= {hi}', field='maturities')
        return default_maturities(count, lo, hi)
    if not isinstance(raw, list) or not raw:
        raise ConfigError('expected a grid object or a non-empty list', field='maturities')
    grid = tuple(_number(T, f'maturities[{i}]', positive=True) for i, T in enumerate(raw))
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError('maturities must be strictly increasing', field='maturities')
    return grid


def _parse_family(raw, index):
    if raw is None:
        return None
    if not isinstance(raw, list) or len(raw) < 2:
        raise ConfigError('expected a list of at least 2 price vectors', field='s0_family')
    family = tuple(_check_s0(s0, f's0_family[{i}]') for i, s0 in enumerate(raw))
    for i, s0 in enumerate(family):
        if len(s0) != index.n:
            raise ConfigError(f'expected {index.n} prices, got {len(s0)}',
                              field=f's0_family[{i}]')
    tied = sum(any(a == b for a, b in zip(s0, s0[1:])) for s0 in family)
    if tied != 1:
        raise ConfigError(f'family needs exactly one tied member, found {tied}',
                          field='s0_family')
    if len(family) - tied < 2:
        raise ConfigError('family needs at least 2 untied members', field='s0_family')
    return family


def config_from_dict(raw, default_name='experiment'):
    """Validate a parsed config object and build an `ExperimentConfig`."""
    _check_keys(raw, TOP_LEVEL_KEYS, '')
    for section in ('model', 'index'):
        if section not in raw:
            raise ConfigError('missing section', field=section)
    model = _parse_model(raw['model'])
    index = _parse_index(raw['index'])
    if model.n != index.n:
        raise ConfigError(f'model has {model.n} assets but index.s0 has {index.n} prices',
                          field='index.s0')

    simulation = raw.get('simulation', {})
    _check_keys(simulation, ('n_paths', 'dt', 'store_full_paths'), 'simulation')
    all_gbm = all(isinstance(a, GBM) for a in model.assets)
    n_paths = _number(simulation.get('n_paths', DEFAULT_PATHS), 'simulation.n_paths',
                      positive=True, integer=True)
    if n_paths < 2:
        raise ConfigError('need at least 2 paths', field='simulation.n_paths')
    dt = _number(simulation.get('dt', DT_GBM if all_gbm else DT_FRACTIONAL),
                 'simulation.dt', positive=True)
    store_full = simulation.get('store_full_paths', False)
    if not isinstance(store_full, bool):
        raise ConfigError('expected true or false', field='simulation.store_full_paths')

    skew = raw.get('skew', {})
    _check_keys(skew, ('method', 'dk'), 'skew')
    method = skew.get('method', 'finite_difference')
    if method not in METHODS:
        raise ConfigError(f'unknown method "{method}" (one of {", ".join(METHODS)})',
                          field='skew.method')
    dk = skew.get('dk')
    if dk is not None:
        dk = _number(dk, 'skew.dk', positive=True)

    seed = _number(raw.get('seed', DEFAULT_SEED), 'seed', integer=True)
    if seed < 0:
        raise ConfigError(f'seed must be non-negative, got {seed}', field='seed')
    output_dir = raw.get('output_dir')
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError('expected a path or null', field='output_dir')
    name = raw.get('experiment', default_name)
    if not isinstance(name, str) or not name:
        raise ConfigError('expected a non-empty name', field='experiment')

    return ExperimentConfig(
        name=name, model=model, index=index, n_paths=n_paths, dt=dt, seed=seed,
        maturities=_parse_maturities(raw.get('maturities', {})),
        s0_family=_parse_family(raw.get('s0_family'), index),
        output_dir=output_dir, method=method, dk=dk, store_full_paths=store_full)


def _asset_to_dict(asset):
    for type_name, (cls, names) in ASSET_TYPES.items():
        if isinstance(asset, cls):
            return {'type': type_name, **{name: getattr(asset, name) for name in names}}
    raise ValueError(f'Unknown asset {asset!r}')


def config_to_dict(cfg):
    """Inverse of `config_from_dict`; maturities are written out explicitly."""
    return {
        'experiment': cfg.name,
        'seed': cfg.seed,
        'model': {
            'normalization': cfg.model.normalization,
            'scheme': cfg.model.scheme,
            'assets': [_asset_to_dict(a) for a in cfg.model.assets],
        },
        'index': {'s0': list(cfg.index.s0), 'w': list(cfg.index.w), 'n_top': cfg.index.n_top},
        'simulation': {'n_paths': cfg.n_paths, 'dt': cfg.dt,
                       'store_full_paths': cfg.store_full_paths},
        'maturities': list(cfg.maturities),
        's0_family': None if cfg.s0_family is None else [list(s0) for s0 in cfg.s0_family],
        'skew': {'method': cfg.method, 'dk': cfg.dk},
        'output_dir': cfg.output_dir,
    }


def parse_config(text, source='<config>'):
    """Parse JSON text; syntax errors carry line and column."""
    try:
        raw = loads(text)
    except JSONDecodeError as e:
        raise ConfigError(f'{source}: invalid JSON at column {e.colno}: {e.msg}',
                          line=e.lineno) from e
    return config_from_dict(raw)


def load_config(path):
    with open(path, 'r') as fh:
        return parse_config(fh.read(), source=path)


def apply_overrides(cfg, paths=None, seed=None, dt=None, out=None):
    """CLI flags override config fields one for one."""
    changes = {}
    if paths is not None:
        if paths < 2:
            raise ConfigError(f'need at least 2 paths, got {paths}', field='simulation.n_paths')
        changes['n_paths'] = int(paths)
    if seed is not None:
        if seed < 0:
            raise ConfigError(f'seed must be non-negative, got {seed}', field='seed')
        changes['seed'] = int(seed)
    if dt is not None:
        if not dt > 0:
            raise ConfigError(f'dt must be positive, got {dt}', field='simulation.dt')
        changes['dt'] = float(dt)
    if out is not None:
        changes['output_dir'] = out
    return replace(cfg, **changes)
