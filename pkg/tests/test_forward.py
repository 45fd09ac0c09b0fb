import numpy as np
import pytest

from cubsde.cubature import make_order3, scale
from cubsde.forward import (
    IntegrationError,
    Problem,
    children,
    finite_difference_jacobian,
    ode_step,
    stratonovich_drift,
)
from cubsde.timegrid import build


def brownian_problem(d):
    eye = np.eye(d)
    return Problem(
        d=d,
        r=d,
        b=lambda t, x: np.zeros_like(x),
        sigma=lambda t, x: np.broadcast_to(eye, x.shape[:-1] + (d, d)).copy(),
        f=lambda t, x, y, z: np.zeros(x.shape[:-1]),
        g=lambda x: x[..., 0],
        x0=np.zeros(d),
        T=1.0,
    )


def gbm_problem(mu=0.3, s=0.7):
    return Problem(
        d=1,
        r=1,
        b=lambda t, x: mu * x,
        sigma=lambda t, x: (s * x)[..., None],
        f=lambda t, x, y, z: np.zeros(x.shape[:-1]),
        g=lambda x: x[..., 0],
        x0=np.array([1.0]),
        T=1.0,
    )


def test_constant_sigma_leaves_drift_alone():
    prob = brownian_problem(2)
    x = np.array([[0.3, -1.2]])
    np.testing.assert_array_equal(stratonovich_drift(prob, 0.1, x), np.zeros((1, 2)))


def test_gbm_correction_matches_hand_derivation():
    mu, s = 0.3, 0.7
    prob = gbm_problem(mu, s)
    x = np.array([[2.0]])
    got = stratonovich_drift(prob, 0.0, x)
    np.testing.assert_allclose(got, [[mu * 2.0 - s * s * 2.0 / 2.0]], rtol=1e-9)


def test_finite_difference_jacobian_matches_analytic():
    s = 0.7

    def sigma(t, x):
        return (s * x**2)[..., None]

    prob = Problem(
        d=1, r=1, b=lambda t, x: x, sigma=sigma,
        f=lambda t, x, y, z: np.zeros(x.shape[:-1]), g=lambda x: x[..., 0],
        x0=np.array([1.0]), T=1.0,
    )
    x = np.array([[1.7]])
    jac = finite_difference_jacobian(prob, 0.0, x)
    np.testing.assert_allclose(jac, [[[[2 * s * 1.7]]]], rtol=1e-7)


def test_diagonal_sigma_touches_matching_components_only():
    # sigma diagonal with sigma_kk depending only on x_k: the correction
    # stays componentwise
    def sigma(t, x):
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = x[..., 0]
        out[..., 1, 1] = 3.0
        return out

    prob = Problem(
        d=2, r=2, b=lambda t, x: np.zeros_like(x), sigma=sigma,
        f=lambda t, x, y, z: np.zeros(x.shape[:-1]), g=lambda x: x[..., 0],
        x0=np.zeros(2), T=1.0,
    )
    x = np.array([[1.5, -2.0]])
    drift = stratonovich_drift(prob, 0.0, x)
    np.testing.assert_allclose(drift[0, 0], -0.5 * 1.5, rtol=1e-7)
    np.testing.assert_allclose(drift[0, 1], 0.0, atol=1e-9)


def test_ode_step_exact_for_brownian():
    prob = brownian_problem(1)
    path = scale(make_order3(1), 0.25).paths[1]
    x = np.array([[0.3]])
    out = ode_step(prob, 0.0, 0.25, x, path)
    np.testing.assert_allclose(out, [[0.8]], atol=1e-14)


def test_ode_step_constant_drift_no_noise():
    c = -1.3
    prob = Problem(
        d=1, r=1, b=lambda t, x: np.full_like(x, c),
        sigma=lambda t, x: np.zeros(x.shape[:-1] + (1, 1)),
        f=lambda t, x, y, z: np.zeros(x.shape[:-1]), g=lambda x: x[..., 0],
        x0=np.zeros(1), T=1.0,
        diffusion_jacobian=lambda t, x: np.zeros(x.shape[:-1] + (1, 1, 1)),
    )
    path = scale(make_order3(1), 0.5).paths[0]
    out = ode_step(prob, 0.0, 0.5, np.array([[2.0]]), path)
    np.testing.assert_allclose(out, [[2.0 + c * 0.5]], atol=1e-13)


def test_ode_step_self_convergence_on_gbm():
    prob = gbm_problem()
    path = scale(make_order3(1), 0.25).paths[1]
    x = np.array([[2.0]])
    base = ode_step(prob, 0.0, 0.25, x, path, n_substeps=32)
    reference = ode_step(prob, 0.0, 0.25, x, path, n_substeps=64 * 32)
    rel = abs(base[0, 0] - reference[0, 0]) / abs(reference[0, 0])
    assert rel < 1e-10


def test_ode_step_is_fourth_order():
    prob = gbm_problem()
    path = scale(make_order3(1), 0.25).paths[1]
    x = np.array([[2.0]])
    reference = ode_step(prob, 0.0, 0.25, x, path, n_substeps=4096)[0, 0]
    errs = [abs(ode_step(prob, 0.0, 0.25, x, path, n_substeps=m)[0, 0] - reference) for m in (8, 16)]
    ratio = errs[0] / errs[1]
    assert 10.0 < ratio < 24.0  # 16x for a 4th-order method, with slack


@pytest.mark.filterwarnings("ignore:overflow", "ignore:invalid value")
def test_ode_step_reports_blowup():
    prob = Problem(
        d=1, r=1, b=lambda t, x: x**3,
        sigma=lambda t, x: np.zeros(x.shape[:-1] + (1, 1)),
        f=lambda t, x, y, z: np.zeros(x.shape[:-1]), g=lambda x: x[..., 0],
        x0=np.zeros(1), T=1.0,
        diffusion_jacobian=lambda t, x: np.zeros(x.shape[:-1] + (1, 1, 1)),
    )
    path = scale(make_order3(1), 1.0).paths[1]
    with pytest.raises(IntegrationError):
        ode_step(prob, 0.0, 1.0, np.array([[1e120]]), path)


def test_children_brownian_one_dimensional():
    prob = brownian_problem(1)
    grid = build(4, 1.0, 1.0)
    x = np.array([0.1])
    cs = children(prob, grid, 0, x, make_order3(1))
    np.testing.assert_allclose(sorted(cs.states[:, 0]), [0.1 - 0.5, 0.1 + 0.5], atol=1e-14)
    np.testing.assert_allclose(cs.weights, [0.5, 0.5])
    np.testing.assert_allclose(sorted(cs.increments[:, 0]), [-0.5, 0.5])


def test_children_symmetry_invariants():
    prob = brownian_problem(2)
    grid = build(5, 1.0, 1.0)
    x = np.array([[0.2, -0.4], [1.0, 1.0]])
    cs = children(prob, grid, 2, x, make_order3(2))
    assert cs.states.shape == (2, 4, 2)
    # weighted increment average is exactly zero for a symmetric family
    avg_inc = cs.weights @ cs.increments
    np.testing.assert_array_equal(avg_inc, np.zeros(2))
    # weighted child average equals the start point for driftless motion
    avg_child = np.einsum("k,nkd->nd", cs.weights, cs.states)
    np.testing.assert_allclose(avg_child, x, atol=1e-14)


def test_children_rejects_bad_step_index():
    prob = brownian_problem(1)
    grid = build(4, 1.0, 1.0)
    with pytest.raises(ValueError):
        children(prob, grid, 4, np.zeros(1), make_order3(1))
