"""Reflection of an input path and first/last passage extraction.

The reflected path subtracts gamma times the running infimum; passage
times are reported at grid resolution (first/last grid point strictly
above the level, never interpolated) and absence encodes "never within
the simulated horizon".
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .fbm import SamplePath


@dataclass(frozen=True)
class PassageRecord:
    """First/last passage summary of one path against one level."""

    tau1: float | None
    tau2: float | None
    ruined: bool
    level: float

    def __post_init__(self):
        if self.ruined != (self.tau1 is not None):
            raise ValueError("ruined flag must match tau1 presence")
        if (self.tau1 is None) != (self.tau2 is None):
            raise ValueError("tau1 and tau2 must be present together")
        if self.tau1 is not None and self.tau2 < self.tau1:
            raise ValueError("tau2 must not precede tau1")


def running_infimum(path: SamplePath) -> SamplePath:
    """Pointwise running minimum of the path values."""
    vals = backend.prefix_min(path.values)
    return SamplePath(grid=path.grid, values=vals, hurst=path.hurst)


def reflect(path: SamplePath, gamma: float) -> SamplePath:
    """values[i] - gamma * min(values[0..i]); gamma in [0,1]."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0,1], got {gamma}")
    vals = backend.reflect_path(path.values, gamma)
    return SamplePath(grid=path.grid, values=vals, hurst=path.hurst)


def passage_times(w: SamplePath, level: float) -> PassageRecord:
    """First/last grid time with w > level (strict); absent if none."""
    if not level > 0:
        raise ValueError(f"level must be positive, got {level}")
    first, last = backend.passage_scan(w.values, level)
    if first < 0:
        return PassageRecord(tau1=None, tau2=None, ruined=False, level=level)
    step = w.grid.step
    return PassageRecord(tau1=first * step, tau2=last * step, ruined=True,
                         level=level)
