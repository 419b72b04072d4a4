"""Built-in experiments: two-asset GBM, fractional Stein-Stein and fractional
Bergomi markets, each on a tie, near a tie, or over a family of second prices
approaching the tie."""
import pandas as pd

from rankskew.experiments.config import DEFAULT_SEED, ExperimentConfig
from rankskew.model.dynamics import DT_GBM, DT_FRACTIONAL, GBM, FractionalBergomi, \
    FractionalSteinStein, ModelSpec
from rankskew.model.index import IndexSpec

FAMILY_SECOND_PRICES = (94., 96., 98., 100.)


def _family(top=100.):
    return tuple((top, s) for s in FAMILY_SECOND_PRICES)


def _gbm(name, s0, family=False):
    model = ModelSpec((GBM(0.2), GBM(0.6)))
    return ExperimentConfig(name, model, IndexSpec(s0, (1.,)), n_paths=50000, dt=DT_GBM,
                            seed=DEFAULT_SEED, s0_family=_family() if family else None)


def _fss(name, H, s0, w=(1.,), n_paths=30000, family=False):
    model = ModelSpec(tuple(FractionalSteinStein(sigma0, h, -0.5)
                            for sigma0, h in zip((0.2, 0.6), H)))
    return ExperimentConfig(name, model, IndexSpec(s0, w), n_paths=n_paths, dt=DT_FRACTIONAL,
                            seed=DEFAULT_SEED, s0_family=_family() if family else None)


def _bergomi(name, family=False):
    eta = 1.9 ** 2
    model = ModelSpec((FractionalBergomi(0.04, eta, 0.7, 0.),
                       FractionalBergomi(0.36, eta, 0.6, 0.)),
                      scheme='hybrid')
    return ExperimentConfig(name, model, IndexSpec((100., 100.), (1.,)), n_paths=30000,
                            dt=DT_FRACTIONAL, seed=DEFAULT_SEED,
                            s0_family=_family() if family else None)


PRESETS = {cfg.name: cfg for cfg in (
    _gbm('gbm-distinct', (100., 96.)),
    _gbm('gbm-tie', (100., 100.)),
    _gbm('gbm-family', (100., 100.), family=True),
    _fss('fss-persistent-tie', (0.6, 0.7), (100., 100.)),
    _fss('fss-persistent-near', (0.6, 0.7), (100., 97.)),
    _fss('fss-persistent-family', (0.6, 0.7), (100., 100.), n_paths=15000, family=True),
    _fss('fss-rough-tie', (0.3, 0.4), (100., 100.)),
    _fss('fss-mixed-tie', (0.2, 0.7), (100., 100.)),
    _fss('fss-rough-distinct', (0.2, 0.3), (100., 90.)),
    _fss('fss-mixed-weights', (0.7, 0.2), (100., 90.), w=(0.7, 0.3)),
    _bergomi('bergomi-tie'),
    _bergomi('bergomi-family', family=True),
)}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f'Unknown preset "{name}"; run list-presets to see them') from None


def _fmt(values):
    return '(' + ', '.join(f'{v:g}' for v in values) + ')'


def preset_rows():
    """One summary dict per preset, sorted by name."""
    rows = []
    for name in sorted(PRESETS):
        cfg = PRESETS[name]
        assets = cfg.model.assets
        rows.append({
            'name': name,
            'model': type(assets[0]).__name__,
            'paths': cfg.n_paths,
            'dt': cfg.dt,
            'H': _fmt(a.H for a in assets) if hasattr(assets[0], 'H') else '-',
            'eta': _fmt(a.eta for a in assets) if hasattr(assets[0], 'eta') else '-',
            'rho': _fmt(a.rho for a in assets) if hasattr(assets[0], 'rho') else '-',
            's0': _fmt(cfg.index.s0),
            'w': _fmt(cfg.index.w),
            'family': '-' if cfg.s0_family is None else _fmt(s[1] for s in cfg.s0_family),
            'scheme': cfg.model.scheme,
        })
    return rows


def list_presets():
    """Preset table as text, one line per preset, sorted by name."""
    return pd.DataFrame(preset_rows()).to_string(index=False)
