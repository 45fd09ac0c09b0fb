"""Forward dynamics along cubature paths.

The diffusion is rewritten with the Stratonovich-corrected drift and
integrated as an ordinary Riemann-Stieltjes ODE along each scaled
piecewise-linear path.  All coefficient callbacks are batched: states are
arrays of shape (..., d) and callbacks must broadcast over the leading
axes.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .cubature import CubatureFormula, Path, scale
from .timegrid import TimeGrid

_FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


class IntegrationError(RuntimeError):
    """Raised when a path ODE produces a non-finite state."""


@dataclass
class Problem:
    """Coupled forward-backward problem data.

    ``b`` and ``sigma`` are the Ito drift and diffusion; ``f`` is the
    generator f(t, x, y, z) with z the weighted-increment process (one
    component per Brownian dimension); ``g`` is the terminal condition.
    ``diffusion_jacobian(t, x)[..., i, j, k]`` must return the partial
    derivative of sigma[..., i, j] in x_k; when absent it is replaced by
    central finite differences.  ``f_lipschitz_y`` is a user-declared
    bound on |df/dy| used only to sanity-check the fixed-point step.
    """

    d: int
    r: int
    b: Callable
    sigma: Callable
    f: Callable
    g: Callable
    x0: np.ndarray
    T: float
    diffusion_jacobian: Optional[Callable] = None
    exact_solution: Optional[Callable] = None
    f_lipschitz_y: Optional[float] = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).reshape(self.d)


@dataclass
class ChildSet:
    """One-step cubature children of a state batch.

    ``states`` has shape x.shape[:-1] + (kappa, d); ``weights`` is the
    formula weight vector and ``increments[j]`` the path-j Brownian
    increment sqrt(h) * unit endpoint.
    """

    states: np.ndarray
    weights: np.ndarray
    increments: np.ndarray


def finite_difference_jacobian(problem: Problem, t: float, x: np.ndarray) -> np.ndarray:
    """Central-difference d sigma / dx with step cbrt(eps) * (1 + |x_k|)."""
    x = np.asarray(x, dtype=float)
    steps = _FD_STEP * (1.0 + np.abs(x))
    cols = []
    for k in range(problem.d):
        dx = np.zeros_like(x)
        dx[..., k] = steps[..., k]
        diff = problem.sigma(t, x + dx) - problem.sigma(t, x - dx)
        cols.append(diff / (2.0 * steps[..., k])[..., None, None])
    return np.stack(cols, axis=-1)


def stratonovich_drift(problem: Problem, t: float, x: np.ndarray) -> np.ndarray:
    """Ito drift minus the Stratonovich correction (1/2) sum sigma_kj d_k sigma_ij."""
    x = np.asarray(x, dtype=float)
    sig = problem.sigma(t, x)
    if problem.diffusion_jacobian is not None:
        jac = problem.diffusion_jacobian(t, x)
    else:
        jac = finite_difference_jacobian(problem, t, x)
    correction = 0.5 * np.einsum("...kj,...ijk->...i", sig, jac)
    return problem.b(t, x) - correction


def _rhs(problem: Problem, t: float, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    return stratonovich_drift(problem, t, x) + problem.sigma(t, x) @ w


def ode_step(
    problem: Problem,
    t0: float,
    t1: float,
    x: np.ndarray,
    path: Path,
    n_substeps: int = 4,
) -> np.ndarray:
    """Integrate dX = b_strat dt + sigma d(path) over [t0, t1].

    ``path`` must already be scaled to local times [0, t1 - t0].  Each
    linear segment is integrated with the classical 4th-order one-step
    method using ``n_substeps`` substeps; the per-step ODE error has to
    sit well below the scheme's own O(h^2) local error, which 4th order
    at h/4 achieves with margin.
    """
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    state = np.asarray(x, dtype=float)
    for k in range(len(path.times) - 1):
        s_a, s_b = path.times[k], path.times[k + 1]
        seg_len = s_b - s_a
        if seg_len <= 0:
            raise ValueError("path times must be strictly increasing")
        w = (path.points[k + 1] - path.points[k]) / seg_len
        sub = seg_len / n_substeps
        for m in range(n_substeps):
            t = t0 + s_a + m * sub
            k1 = _rhs(problem, t, state, w)
            k2 = _rhs(problem, t + 0.5 * sub, state + 0.5 * sub * k1, w)
            k3 = _rhs(problem, t + 0.5 * sub, state + 0.5 * sub * k2, w)
            k4 = _rhs(problem, t + sub, state + sub * k3, w)
            state = state + (sub / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(state)):
        bad = int(np.argwhere(~np.isfinite(np.atleast_2d(state)).all(axis=-1))[0][0])
        raise IntegrationError(
            f"non-finite state integrating over [{t0}, {t1}] (first bad row {bad})"
        )
    return state


def children(
    problem: Problem,
    grid: TimeGrid,
    i: int,
    x: np.ndarray,
    formula: CubatureFormula,
    n_substeps: int = 4,
) -> ChildSet:
    """All one-step cubature children of ``x`` across step i of the grid."""
    if not 0 <= i < grid.n:
        raise ValueError(f"step index {i} outside grid with {grid.n} steps")
    h = float(grid.steps[i])
    t0, t1 = float(grid.times[i]), float(grid.times[i + 1])
    scaled = scale(formula, h)
    states = []
    increments = []
    for j, path in enumerate(scaled.paths):
        try:
            states.append(ode_step(problem, t0, t1, x, path, n_substeps=n_substeps))
        except IntegrationError as exc:
            raise IntegrationError(f"step {i}, path {j}: {exc}") from exc
        increments.append(path.endpoint - path.points[0])
    return ChildSet(
        states=np.stack(states, axis=-2),
        weights=scaled.weights,
        increments=np.stack(increments),
    )
