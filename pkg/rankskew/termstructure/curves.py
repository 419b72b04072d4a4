"""ATM skew term structures, power-law fits and quasi-blow-up classification."""
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.stats import linregress
from tqdm import tqdm

from rankskew.exceptions import ArbitrageBoundError, InsufficientPointsError
from rankskew.model.dynamics import SimConfig
from rankskew.modules.rng import child_seed
from rankskew.pricing.monte_carlo import SkewEstimate, atm_skew
from rankskew.util import load_table, save_table

log = logging.getLogger(__name__)

MIN_FIT_POINTS = 4
SIGNIFICANCE = 3.
LOW_CONFIDENCE_PATHS = 5000

# clause (i) of the quasi-blow-up test
BLOW_UP_ALPHA = 0.3
BLOW_UP_R2 = 0.9
# smallest fitted exponent read as a blow-up when the curve does not flatten
MIN_RATE_ALPHA = 0.1
RATE_TOLERANCE = 0.1


@dataclass(frozen=True)
class SweepConfig:
    """Monte Carlo settings shared by every maturity of a curve.

    Maturity i runs on its own seed `child_seed(seed, i)`; all strikes of that
    maturity share its paths.
    """
    n_paths: int
    dt: float
    seed: int
    device: str = field(default='cpu', compare=False)
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.n_paths < 2:
            raise ValueError(f'n_paths must be >= 2, got {self.n_paths}')
        if not self.dt > 0:
            raise ValueError(f'dt must be positive, got {self.dt}')
        if self.workers < 1:
            raise ValueError(f'workers must be >= 1, got {self.workers}')

    def for_maturity(self, T, i):
        return SimConfig.for_maturity(T, self.dt, self.n_paths, child_seed(self.seed, i),
                                      device=self.device)


@dataclass(frozen=True)
class SkewCurve:
    """Skew estimates ordered by maturity.
    Args:
        points (tuple): SkewEstimate per maturity that priced.
        missing (tuple): Maturities whose prices hit an arbitrage bound.
        fingerprint (str): Hash of model, index and Monte Carlo settings.
        n_paths (int): Paths per maturity, if known.
    """
    points: Tuple[SkewEstimate, ...]
    missing: Tuple[float, ...] = ()
    fingerprint: str = ''
    n_paths: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'points', tuple(self.points))
        object.__setattr__(self, 'missing', tuple(float(T) for T in self.missing))
        if np.any(np.diff([p.T for p in self.points]) <= 0):
            raise ValueError('Skew curve maturities must be strictly increasing')

    @classmethod
    def from_arrays(cls, T, skew, stderr, method='finite_difference', **kwargs):
        points = tuple(SkewEstimate(float(t), float(s), float(e), method)
                       for t, s, e in zip(T, skew, stderr))
        return cls(points, **kwargs)

    @property
    def maturities(self):
        return np.array([p.T for p in self.points])

    @property
    def skews(self):
        return np.array([p.skew for p in self.points])

    @property
    def stderrs(self):
        return np.array([p.stderr for p in self.points])

    def at(self, T):
        """Estimate at maturity `T`, or None if it is missing."""
        for p in self.points:
            if np.isclose(p.T, T, rtol=1e-12, atol=0.):
                return p
        return None


@dataclass(frozen=True)
class PowerLawFit:
    """|skew| ~ c T^(-alpha), fitted by OLS in log-log space."""
    c: float
    alpha: float
    r2: float
    T_range: Tuple[float, float]
    alpha_stderr: float = 0.
    n_points: int = 0
    low_confidence: bool = False

    def __call__(self, T):
        return self.c * np.asarray(T, dtype=np.float64) ** (-self.alpha)


@dataclass(frozen=True)
class FamilyMember:
    s0: Tuple[float, ...]
    curve: SkewCurve = field(repr=False)
    fit: Optional[PowerLawFit]
    flattens: bool
    skew_at_T_star: Optional[float]
    stderr_at_T_star: Optional[float]

    @property
    def alpha(self):
        return None if self.fit is None else self.fit.alpha

    @property
    def r2(self):
        return None if self.fit is None else self.fit.r2


@dataclass(frozen=True)
class QuasiBlowUpReport:
    members: Tuple[FamilyMember, ...]
    tie_index: int
    T_star: float
    clause_i: bool
    clause_ii: bool
    clause_iii: bool

    @property
    def holds(self):
        return self.clause_i and self.clause_ii and self.clause_iii

    @property
    def tied(self):
        return self.members[self.tie_index]


def default_maturities(count=16, lo=1. / 365, hi=0.25):
    """`count` log-spaced maturities in [lo, hi]."""
    if count < 1 or not 0 < lo < hi:
        raise ValueError(f'Need count >= 1 and 0 < lo < hi, got ({count}, {lo}, {hi})')
    return tuple(float(T) for T in np.geomspace(lo, hi, count))


def curve_fingerprint(model, spec, cfg):
    key = repr((model, spec, cfg.n_paths, cfg.dt, cfg.seed))
    return hashlib.sha1(key.encode()).hexdigest()[:12]


def skew_curve(model, spec, T_grid, cfg, method='finite_difference', dk=None, progress=False):
    """ATM skew at every maturity of `T_grid`.
    Args:
        model (ModelSpec): Market model.
        spec (IndexSpec): Index definition.
        T_grid (sequence): Strictly increasing positive maturities.
        cfg (SweepConfig): Paths, step and master seed.
        method (str): Skew estimator, see `atm_skew`.
        dk (float): Fixed log-strike bump; None picks one per maturity.
        progress (bool): Show a tqdm bar over maturities.
    Returns:
        curve (SkewCurve): Estimates in grid order; failures listed in `missing`.
    """
    T_grid = np.asarray(T_grid, dtype=np.float64)
    if T_grid.ndim != 1 or T_grid.size == 0:
        raise ValueError('T_grid must be a non-empty 1-D sequence')
    if np.any(T_grid <= 0) or np.any(np.diff(T_grid) <= 0):
        raise ValueError(f'T_grid must be positive and strictly increasing, got {T_grid}')

    def run(i):
        T = float(T_grid[i])
        try:
            return atm_skew(model, spec, T, cfg.for_maturity(T, i), method, dk)
        except ArbitrageBoundError as e:
            log.warning(f'Maturity T={T:.6f} marked missing: {e}')
            return None

    points, missing = [], []
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        results = pool.map(run, range(T_grid.size))
        for T, estimate in tqdm(zip(T_grid, results), total=T_grid.size,
                                disable=not progress, leave=False):
            if estimate is None:
                missing.append(float(T))
            else:
                points.append(estimate)
                log.debug(f'T={T:.6f}: skew {estimate.skew:.6f} +- {estimate.stderr:.6f}')
    return SkewCurve(tuple(points), tuple(missing), curve_fingerprint(model, spec, cfg),
                     cfg.n_paths)


def significant_points(curve, T_range=None):
    """Points with |skew| > 3 stderr, optionally restricted to T_range."""
    keep = []
    for p in curve.points:
        if T_range is not None and not T_range[0] <= p.T <= T_range[1]:
            continue
        if abs(p.skew) > SIGNIFICANCE * p.stderr:
            keep.append(p)
    return keep


def fit_power_law(curve, T_range=None):
    """Fit |skew| = c T^(-alpha) by least squares of ln|skew| on ln T.
    Args:
        curve (SkewCurve): Skew term structure.
        T_range (tuple): Optional (T_lo, T_hi) window.
    Returns:
        fit (PowerLawFit): Amplitude, exponent and log-log r^2.
    """
    points = significant_points(curve, T_range)
    if len(points) < MIN_FIT_POINTS:
        raise InsufficientPointsError(len(points), MIN_FIT_POINTS)

    x = np.log([p.T for p in points])
    y = np.log([abs(p.skew) for p in points])
    used = (float(np.exp(x[0])), float(np.exp(x[-1])))
    low_confidence = curve.n_paths is not None and curve.n_paths < LOW_CONFIDENCE_PATHS

    # flat curve: r^2 is 0/0
    if np.ptp(y) <= 1e-12 * max(1., np.abs(y).max()):
        return PowerLawFit(float(np.exp(y.mean())), 0., 1., used, 0., len(points), low_confidence)

    res = linregress(x, y)
    r2 = min(max(res.rvalue ** 2, 0.), 1.)
    return PowerLawFit(float(np.exp(res.intercept)), float(-res.slope), float(r2), used,
                       float(res.stderr), len(points), low_confidence)


def flattening(curve, ratio=1.):
    """Whether |skew| at the shortest maturity is below `ratio` times the curve maximum."""
    if not curve.points:
        raise ValueError('Empty skew curve')
    magnitudes = np.abs(curve.skews)
    return bool(magnitudes[0] < ratio * magnitudes.max())


def _family_member(model, spec, T_grid, T_star, cfg, method, dk, progress):
    curve = skew_curve(model, spec, T_grid, cfg, method, dk, progress)
    try:
        fit = fit_power_law(curve)
    except InsufficientPointsError as e:
        log.warning(f's0={spec.s0}: no power-law fit ({e})')
        fit = None
    star = curve.at(T_star)
    return FamilyMember(spec.s0, curve, fit, flattening(curve) if curve.points else False,
                        None if star is None else star.skew,
                        None if star is None else star.stderr)


def classify_quasi_blow_up(model, base_spec, s0_family, T_grid, cfg,
                           method='finite_difference', dk=None, progress=False):
    """Test the three clauses of quasi-blow-up on a family of initial prices.

    (i) the tied member blows up: alpha >= 0.3 with r^2 >= 0.9.
    (ii) every untied member flattens at the shortest maturity.
    (iii) at T* (the grid point nearest the median maturity) the gap
        |skew(s0) - skew(tie)| shrinks as s0 approaches the tie, up to two
        combined standard errors per step.
    Args:
        model (ModelSpec): Market model.
        base_spec (IndexSpec): Index whose `s0` is replaced by each member.
        s0_family (sequence): Initial price vectors; one tied, >= 2 untied.
        T_grid (sequence): Maturities.
        cfg (SweepConfig): Monte Carlo settings, shared by every member.
        method (str): Skew estimator.
        dk (float): Fixed log-strike bump for every member; None picks one per maturity.
        progress (bool): Show tqdm bars.
    Returns:
        report (QuasiBlowUpReport): Per-member results and clause outcomes.
    """
    specs = [replace(base_spec, s0=tuple(s0)) for s0 in s0_family]
    tied = [i for i, spec in enumerate(specs) if spec.tie_position() is not None]
    if len(tied) != 1:
        raise ValueError(f'Family needs exactly one tied member, found {len(tied)}')
    if len(specs) - 1 < 2:
        raise ValueError(f'Family needs at least 2 untied members, found {len(specs) - 1}')

    T_grid = np.asarray(T_grid, dtype=np.float64)
    T_star = float(T_grid[np.argmin(np.abs(T_grid - np.median(T_grid)))])
    members = tuple(_family_member(model, spec, T_grid, T_star, cfg, method, dk, progress)
                    for spec in specs)
    tie = tied[0]
    tie_member = members[tie]
    log.info(f'Family of {len(members)} members, T* = {T_star:.6f}')

    clause_i = (tie_member.fit is not None and tie_member.fit.alpha >= BLOW_UP_ALPHA
                and tie_member.fit.r2 >= BLOW_UP_R2)
    untied = [m for i, m in enumerate(members) if i != tie]
    clause_ii = all(m.flattens for m in untied)
    clause_iii = _continuity_holds(tie_member, untied)

    log.info(f'Quasi-blow-up clauses: (i) {clause_i}, (ii) {clause_ii}, (iii) {clause_iii}')
    return QuasiBlowUpReport(members, tie, T_star, clause_i, clause_ii, clause_iii)


def _continuity_holds(tie_member, untied):
    if tie_member.skew_at_T_star is None or any(m.skew_at_T_star is None for m in untied):
        log.warning('Continuity clause undecided: T* missing on some member')
        return False
    tie_s0 = np.asarray(tie_member.s0)
    # farthest from the tie first
    ordered = sorted(untied, key=lambda m: -np.linalg.norm(np.asarray(m.s0) - tie_s0))
    gaps = [abs(m.skew_at_T_star - tie_member.skew_at_T_star) for m in ordered]
    errs = [np.hypot(m.stderr_at_T_star, tie_member.stderr_at_T_star) for m in ordered]
    for j in range(1, len(ordered)):
        if gaps[j] > gaps[j - 1] + 2. * np.hypot(errs[j], errs[j - 1]):
            log.debug(f'Continuity breaks at s0={ordered[j].s0}: gap {gaps[j]:.5f} '
                      f'after {gaps[j - 1]:.5f}')
            return False
    return True


def empirical_kind(curve, fit=None):
    """'no_blow_up' for a flattening curve, 'blow_up' for a resolved power law,
    'inconclusive' otherwise."""
    if not curve.points:
        return 'inconclusive'
    if flattening(curve):
        return 'no_blow_up'
    if fit is not None and fit.alpha >= MIN_RATE_ALPHA and fit.r2 >= BLOW_UP_R2:
        return 'blow_up'
    return 'inconclusive'


@dataclass(frozen=True)
class RateAgreement:
    predicted: str
    empirical: str
    exponent: Optional[float]
    alpha: Optional[float]
    agrees: bool


def rate_agreement(prediction, curve, fit=None, tol=RATE_TOLERANCE):
    """Compare a `RatePrediction` with the fitted curve.

    Blow-up kinds have to match; where a rate is predicted the fitted alpha
    must lie within `tol` of it. `no_prediction` agrees with anything.
    """
    kind = empirical_kind(curve, fit)
    alpha = None if fit is None else fit.alpha
    if prediction.kind == 'no_prediction':
        agrees = True
    elif prediction.kind == 'no_blow_up':
        agrees = kind == 'no_blow_up'
    else:
        agrees = kind == 'blow_up' and abs(alpha - prediction.exponent) <= tol
    return RateAgreement(prediction.kind, kind, prediction.exponent, alpha, agrees)


def save_curve_csv(curve, path):
    """Write T, skew, stderr, method (plus dk, sigma_atm, futures); missing
    maturities get empty values."""
    rows = [{'T': p.T, 'skew': p.skew, 'stderr': p.stderr, 'method': p.method,
             'dk': p.dk, 'sigma_atm': p.sigma_atm, 'futures': p.futures}
            for p in curve.points]
    rows += [{'T': T, 'method': 'missing'} for T in curve.missing]
    df = pd.DataFrame(rows, columns=['T', 'skew', 'stderr', 'method', 'dk', 'sigma_atm',
                                     'futures'])
    df = df.sort_values('T', kind='mergesort').reset_index(drop=True)
    return save_table(df, path, 'skew_curve')


def load_curve_csv(path):
    """Read a curve written by `save_curve_csv`."""
    df = load_table(path, 'skew_curve')
    for col in ('T', 'skew', 'stderr', 'method'):
        if col not in df.columns:
            raise ValueError(f'{path}: missing column "{col}"')

    def optional(row, col):
        value = row.get(col, np.nan)
        return None if pd.isna(value) else float(value)

    points, missing = [], []
    for _, row in df.iterrows():
        if row['method'] == 'missing' or pd.isna(row['skew']):
            missing.append(float(row['T']))
            continue
        points.append(SkewEstimate(float(row['T']), float(row['skew']), float(row['stderr']),
                                   row['method'], optional(row, 'dk'),
                                   optional(row, 'sigma_atm'), optional(row, 'futures')))
    return SkewCurve(tuple(points), tuple(missing))
