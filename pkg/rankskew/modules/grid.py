"""Time grids for the Euler scheme."""
from dataclasses import dataclass
from typing import Tuple

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times starting at 0, in years.

    Stored as a tuple so grids can key caches; use `array` for numerics.
    """
    t: Tuple[float, ...]

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise ValueError('TimeGrid needs at least two nodes')
        if not np.all(np.isfinite(t)):
            raise ValueError('TimeGrid nodes must be finite')
        if t[0] != 0.:
            raise ValueError(f'TimeGrid must start at 0, got {t[0]}')
        if np.any(np.diff(t) <= 0):
            raise ValueError('TimeGrid nodes must be strictly increasing')
        object.__setattr__(self, 't', tuple(float(x) for x in t))

    @classmethod
    def uniform(cls, T, dt):
        """Equal steps of about `dt` ending exactly at `T`."""
        if not T > 0 or not dt > 0:
            raise ValueError(f'T and dt must be positive, got T={T}, dt={dt}')
        n_steps = max(1, int(round(T / dt)))
        return cls(tuple(np.linspace(0., T, n_steps + 1)))

    @property
    def array(self):
        return np.asarray(self.t)

    @property
    def dt(self):
        return np.diff(self.array)

    @property
    def horizon(self):
        return self.t[-1]

    @property
    def n_steps(self):
        return len(self.t) - 1

    @property
    def is_uniform(self):
        dt = self.dt
        return bool(np.allclose(dt, dt[0], rtol=1e-9, atol=0.))
