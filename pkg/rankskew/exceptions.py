"""Exceptions raised by rankskew.

Config problems map to CLI exit code 2, numerical failures to exit code 3.
"""


class RankSkewError(Exception):
    """Base class for all package errors."""


class ConfigError(RankSkewError, ValueError):
    """Invalid experiment configuration.

    Args:
        message (str): What is wrong.
        field (str): Dotted path of the offending field, e.g. `index.s0`.
        line (int): Line in the config file, when known.
    """
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f'line {line}')
        if field is not None:
            where.append(f'field "{field}"')
        prefix = f'{", ".join(where)}: ' if where else ''
        super().__init__(f'{prefix}{message}')


class NumericalError(RankSkewError, RuntimeError):
    """Base class for numerical failures."""


class DriverFactorizationError(NumericalError):
    """Covariance of the joint driver is not positive definite, even with ridge."""
    def __init__(self, n_points, H):
        self.n_points = n_points
        self.H = H
        super().__init__(f'Joint (B, B^H) covariance not positive definite on a '
                         f'{n_points}-point grid with H={H}: refine H or coarsen the grid')


class SimulationError(NumericalError):
    """Non-finite log-price produced by the Euler scheme."""
    def __init__(self, step, asset=None):
        self.step = step
        self.asset = asset
        super().__init__(f'Non-finite log-price at step {step}'
                         + (f' (asset {asset})' if asset is not None else ''))


class ArbitrageBoundError(NumericalError):
    """Option price outside the open no-arbitrage interval.

    Args:
        bound (str): 'lower' or 'upper'.
        price (float): Offending price.
        limit (float): The violated bound.
    """
    def __init__(self, bound, price, limit):
        self.bound = bound
        self.price = price
        self.limit = limit
        side = '<=' if bound == 'lower' else '>='
        super().__init__(f'Price {price:.10g} {side} {bound} arbitrage bound {limit:.10g}; '
                         f'increase the number of paths')


class InsufficientPointsError(NumericalError):
    """Not enough significant skew points for a power-law fit."""
    def __init__(self, n_points, required=4):
        self.n_points = n_points
        self.required = required
        super().__init__(f'Power-law fit needs {required} significant points, got {n_points}')
