"""Time discretizations of [0, T]: power-law grids and midpoint refinement."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    n: int
    T: float
    gamma: float
    times: np.ndarray
    steps: np.ndarray


def build(n: int, T: float, gamma: float = 1.0) -> TimeGrid:
    """Grid t_i = T * (1 - (1 - i/n)^gamma); gamma = 1 is uniform.

    gamma > 1 concentrates steps near T.  The endpoint is assigned T
    literally (the closed formula only reaches it up to rounding for
    non-integer gamma).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if T <= 0:
        raise ValueError("horizon must be positive")
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    i = np.arange(n + 1, dtype=float)
    times = T * (1.0 - (1.0 - i / n) ** gamma)
    times[0] = 0.0
    times[-1] = T
    return TimeGrid(n=n, T=T, gamma=gamma, times=times, steps=np.diff(times))


def refine_midpoints(grid: TimeGrid) -> TimeGrid:
    """Insert the midpoint of every step, doubling the step count."""
    times = np.empty(2 * grid.n + 1)
    times[0::2] = grid.times
    times[1::2] = 0.5 * (grid.times[:-1] + grid.times[1:])
    return TimeGrid(n=2 * grid.n, T=grid.T, gamma=grid.gamma, times=times, steps=np.diff(times))
