"""Predicted short-maturity behaviour of the ATM skew.

The prediction depends only on the Hurst exponents, the tie structure of the
initial prices and which leading futures coefficients vanish:

* tie and m5 != 0                              -> blow-up like T^(-1/2)
* distinct starts, m1 = 0, all H >= 1/2        -> no blow-up
* distinct starts, m1 = 0, H_min < 1/2, m2 != 0 -> blow-up like T^(H_min - 1/2)
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from rankskew.asymptotics.expansion import m5_total
from rankskew.model.dynamics import GBM

KINDS = ('no_blow_up', 'rate_half', 'rate_H_minus_half', 'no_prediction')


@dataclass(frozen=True)
class MFlags:
    m1_zero: bool = True
    m2_zero: bool = True
    m5_zero: bool = False


@dataclass(frozen=True)
class RatePrediction:
    """kind, the Hurst exponent behind a rate_H_minus_half prediction, and the
    expected alpha in |skew| ~ c T^(-alpha) (0 for no_blow_up)."""
    kind: str
    H: Optional[float] = None
    exponent: Optional[float] = None
    rationale: str = ''

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f'Unknown prediction kind "{self.kind}"')

    @property
    def blows_up(self):
        return self.kind in ('rate_half', 'rate_H_minus_half')


def predicted_rate(H, s0, m_flags):
    """Rate prediction from Hurst exponents, initial prices and m-flags.
    Args:
        H (array): Hurst exponent per asset (1/2 for GBM).
        s0 (array): Initial prices, non-increasing.
        m_flags (MFlags or dict): Which leading coefficients vanish.
    Returns:
        prediction (RatePrediction): Kind and exponent; `no_prediction` outside
            the covered configurations.
    """
    if isinstance(m_flags, dict):
        m_flags = MFlags(**m_flags)
    H = np.asarray(H, dtype=np.float64)
    s0 = np.asarray(s0, dtype=np.float64)
    if H.shape != s0.shape:
        raise ValueError(f'H and s0 must have the same length, got {H.shape}, {s0.shape}')
    tied = np.sum(np.diff(s0) == 0)
    if tied > 1:
        raise ValueError(f'At most one tie is allowed, got {s0}')

    if tied == 1:
        if not m_flags.m5_zero:
            return RatePrediction('rate_half', None, 0.5, 'tied starts, sqrt(T) futures term')
        return RatePrediction('no_prediction', rationale='tied starts with m5 = 0')

    if not m_flags.m1_zero:
        return RatePrediction('no_prediction', rationale='distinct starts with m1 != 0')
    h_min = float(H.min())
    if h_min >= 0.5:
        return RatePrediction('no_blow_up', None, 0., 'distinct starts, H >= 1/2')
    if not m_flags.m2_zero:
        return RatePrediction('rate_H_minus_half', h_min, 0.5 - h_min,
                              'distinct starts, rough factor with leverage')
    return RatePrediction('no_prediction', rationale='rough factor with m2 = 0')


def infer_m_flags(model, spec, atol=1e-12):
    """m-flags of a model/index pair under the centered Gaussian baseline.

    m1 vanishes (centered baseline). m2 is nonzero exactly when some indexed
    asset has H < 1/2 and nonzero leverage rho. m5 comes from `m5_total`.
    """
    m2_zero = True
    for asset in model.assets[:spec.n_top]:
        if not isinstance(asset, GBM) and asset.H < 0.5 and asset.rho != 0.:
            m2_zero = False
    if spec.tie_position() is None:
        m5_zero = True
    else:
        total = m5_total(spec, model.v0())
        m5_zero = abs(total) <= atol * max(spec.s0)
    return MFlags(True, m2_zero, m5_zero)
