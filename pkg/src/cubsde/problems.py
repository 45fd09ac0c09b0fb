"""Built-in problem instances with known reference values.

All coefficient callbacks are batched over the leading axes of x.  Each
entry documents where its reference value comes from; values are either
closed form or tensor Gauss-Hermite quadrature computed at construction.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .forward import Problem


@dataclass(frozen=True)
class NamedProblem:
    name: str
    problem: Problem
    exact_u0: Optional[float]
    regime: str  # "smooth" or "lipschitz"
    notes: str = ""


def _brownian_coefficients(d: int):
    identity = np.eye(d)

    def b(t, x):
        return np.zeros_like(x)

    def sigma(t, x):
        return np.broadcast_to(identity, x.shape[:-1] + (d, d)).copy()

    def jacobian(t, x):
        return np.zeros(x.shape[:-1] + (d, d, d))

    return b, sigma, jacobian


def gauss_hermite_expectation(g, d: int, mean: np.ndarray, variance: float, n_points: int = 64) -> float:
    """Tensor Gauss-Hermite value of E[g(mean + sqrt(variance) * xi)], xi standard normal."""
    nodes, weights = np.polynomial.hermite.hermgauss(n_points)
    std = math.sqrt(variance)
    index_axes = np.meshgrid(*([np.arange(n_points)] * d), indexing="ij")
    flat_idx = [a.ravel() for a in index_axes]
    points = np.stack([nodes[idx] for idx in flat_idx], axis=-1)
    w = np.ones(points.shape[0])
    for idx in flat_idx:
        w = w * weights[idx]
    values = g(mean + math.sqrt(2.0) * std * points)
    return float(np.sum(w * values) / math.pi ** (d / 2.0))


def logistic_benchmark(d: int) -> NamedProblem:
    """Brownian forward motion with a sigmoid terminal condition.

    g(x) = k / (1 + k) with k = exp(1 + sum(x)) and generator
    f(y, z) = (y - (2+d)/(2d)) * sum(z); the value at the origin is
    exactly 1/2.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    b, sigma, jacobian = _brownian_coefficients(d)
    shift = (2.0 + d) / (2.0 * d)

    def f(t, x, y, z):
        return (y - shift) * np.sum(z, axis=-1)

    def g(x):
        k = np.exp(1.0 + np.sum(x, axis=-1))
        return k / (1.0 + k)

    problem = Problem(
        d=d,
        r=d,
        b=b,
        sigma=sigma,
        f=f,
        g=g,
        x0=np.zeros(d),
        T=1.0,
        diffusion_jacobian=jacobian,
        f_lipschitz_y=0.25 * d + 0.5,
    )
    return NamedProblem(
        name="logistic-benchmark",
        problem=problem,
        exact_u0=0.5,
        regime="smooth",
        notes="value at the origin is 1/(1 + e^0) shifted to exactly 1/2",
    )


def linear_smooth(d: int) -> NamedProblem:
    """Brownian motion, zero generator, Gaussian bump terminal condition.

    exact_u0 comes from tensor Gauss-Hermite quadrature; for this g it
    also equals (1 + T)^(-d/2) in closed form, which the tests use as a
    cross-check of the quadrature oracle.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    b, sigma, jacobian = _brownian_coefficients(d)

    def f(t, x, y, z):
        return np.zeros(x.shape[:-1])

    def g(x):
        return np.exp(-0.5 * np.sum(x * x, axis=-1))

    T = 1.0
    exact = gauss_hermite_expectation(g, d, np.zeros(d), T, n_points=64)
    problem = Problem(
        d=d,
        r=d,
        b=b,
        sigma=sigma,
        f=f,
        g=g,
        x0=np.zeros(d),
        T=T,
        diffusion_jacobian=jacobian,
        f_lipschitz_y=0.0,
    )
    return NamedProblem(
        name="linear-smooth",
        problem=problem,
        exact_u0=exact,
        regime="smooth",
        notes="forward expectation benchmark; quadrature reference",
    )


def abs_payoff(d: int, strike: float = 0.5) -> NamedProblem:
    """Brownian motion, zero generator, |x_1 - strike| terminal condition.

    Lipschitz but not differentiable at the strike, the case where the
    decreasing-step grid (gamma > 2) earns its keep.  E|N(mu, s^2)| has
    the closed form s*sqrt(2/pi)*exp(-mu^2/(2 s^2)) + mu*(1 - 2*Phi(-mu/s)).
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    b, sigma, jacobian = _brownian_coefficients(d)

    def f(t, x, y, z):
        return np.zeros(x.shape[:-1])

    def g(x):
        return np.abs(x[..., 0] - strike)

    T = 1.0
    mu = -strike
    s = math.sqrt(T)
    phi = 0.5 * (1.0 + math.erf((-mu / s) / math.sqrt(2.0)))
    exact = s * math.sqrt(2.0 / math.pi) * math.exp(-mu * mu / (2 * s * s)) + mu * (1.0 - 2.0 * phi)
    problem = Problem(
        d=d,
        r=d,
        b=b,
        sigma=sigma,
        f=f,
        g=g,
        x0=np.zeros(d),
        T=T,
        diffusion_jacobian=jacobian,
        f_lipschitz_y=0.0,
    )
    return NamedProblem(
        name="abs-payoff",
        problem=problem,
        exact_u0=exact,
        regime="lipschitz",
        notes="folded-normal mean; quadrature cross-checked",
    )


REGISTRY = {
    "logistic-benchmark": logistic_benchmark,
    "linear-smooth": linear_smooth,
    "abs-payoff": abs_payoff,
}


def get(name: str, d: int) -> NamedProblem:
    if name not in REGISTRY:
        known = ", ".join(sorted(REGISTRY))
        raise KeyError(f"unknown problem {name!r}; known problems: {known}")
    return REGISTRY[name](d)
