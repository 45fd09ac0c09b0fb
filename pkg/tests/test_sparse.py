import json

import numpy as np
import pytest

from cubsde.sparse import (
    Hypercube,
    OutsideCubeError,
    count_nodes,
    count_positive_nodes,
    enumerate_nodes,
    eval_joint,
    grid_nodes,
    hierarchize,
    interpolant_from_node_values,
    minimal_hypercube,
    surplus_reference,
)

UNIT_SQUARE = Hypercube(lows=[0.0, 0.0], highs=[1.0, 1.0])


def test_minimal_hypercube_examples():
    degenerate = minimal_hypercube(np.array([[0.0, 0.0]]))
    np.testing.assert_array_equal(degenerate.lows, [0.0, 0.0])
    np.testing.assert_array_equal(degenerate.highs, [0.0, 0.0])

    cube = minimal_hypercube(np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 2.0]]))
    np.testing.assert_array_equal(cube.lows, [-1.0, 0.0])
    np.testing.assert_array_equal(cube.highs, [1.0, 2.0])

    corners = np.array([[-1.0, 0.0], [-1.0, 2.0], [1.0, 0.0], [1.0, 2.0]])
    again = minimal_hypercube(corners)
    np.testing.assert_array_equal(again.lows, cube.lows)
    np.testing.assert_array_equal(again.highs, cube.highs)


def test_minimal_hypercube_rejects_empty():
    with pytest.raises(ValueError):
        minimal_hypercube(np.empty((0, 2)))


def test_enumerate_nodes_d1():
    cube = Hypercube(lows=[0.0], highs=[1.0])
    level0 = enumerate_nodes(cube, 0)
    assert sorted(float(x[0]) for _, x in level0) == [0.0, 1.0]
    p3 = enumerate_nodes(cube, 3)
    assert len(p3) == 9
    assert sorted(float(x[0]) for _, x in p3) == [i / 8 for i in range(9)]


def test_enumerate_nodes_counts_match_formula():
    for d in range(1, 4):
        cube = Hypercube(lows=np.zeros(d), highs=np.ones(d))
        for p in range(0, 7):
            assert len(enumerate_nodes(cube, p)) == count_nodes(p, d)


def test_count_nodes_closed_forms():
    for p in range(0, 11):
        assert count_nodes(p, 1) == 2**p + 1
    assert count_nodes(0, 2) == 4
    assert count_positive_nodes(2, 3) == 0  # needs p >= d


def test_nodes_sorted_by_level_sum():
    sums = [sum(li.levels) for li, _ in enumerate_nodes(UNIT_SQUARE, 4)]
    assert sums == sorted(sums)


def test_constant_source_reproduced_everywhere():
    interp = hierarchize(UNIT_SQUARE, 4, lambda X: np.full(X.shape[0], 3.25), vectorized=True)
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 1, size=(200, 2))
    np.testing.assert_allclose(interp.eval_many(pts), 3.25, atol=1e-13)
    # all surpluses above level zero vanish
    for li, value in interp.coefficients().items():
        if sum(li.levels) > 0:
            assert abs(value) < 1e-13


def test_d1_equals_classical_linear_interpolation():
    cube = Hypercube(lows=[-1.0], highs=[2.0])
    f = lambda X: np.exp(X[..., 0]) * np.sin(3.0 * X[..., 0])
    p = 6
    interp = hierarchize(cube, p, f, vectorized=True)
    knots = np.linspace(-1.0, 2.0, 2**p + 1)
    rng = np.random.default_rng(7)
    queries = rng.uniform(-1.0, 2.0, 1000)
    classical = np.interp(queries, knots, f(knots[:, None]))
    got = interp.eval_many(queries[:, None])
    np.testing.assert_allclose(got, classical, atol=1e-12)


def test_node_interpolation_property():
    f = lambda X: X[..., 0] * X[..., 1]
    interp = hierarchize(UNIT_SQUARE, 5, f, vectorized=True)
    nodes = grid_nodes(UNIT_SQUARE, 5)
    np.testing.assert_allclose(interp.eval_many(nodes), f(nodes), atol=1e-13)


def test_linearity_of_coefficients_and_eval():
    rng = np.random.default_rng(3)
    f1 = lambda X: np.sin(X[..., 0] + 2 * X[..., 1])
    f2 = lambda X: np.cos(X[..., 0]) * X[..., 1] ** 2
    a, b = 1.7, -0.4
    combo = lambda X: a * f1(X) + b * f2(X)
    i1 = hierarchize(UNIT_SQUARE, 4, f1, vectorized=True)
    i2 = hierarchize(UNIT_SQUARE, 4, f2, vectorized=True)
    ic = hierarchize(UNIT_SQUARE, 4, combo, vectorized=True)
    c1, c2, cc = i1.coefficients(), i2.coefficients(), ic.coefficients()
    for key in cc:
        assert abs(cc[key] - (a * c1[key] + b * c2[key])) < 1e-12
    pts = rng.uniform(0, 1, size=(50, 2))
    np.testing.assert_allclose(
        ic.eval_many(pts), a * i1.eval_many(pts) + b * i2.eval_many(pts), atol=1e-12
    )


def test_positivity_and_sup_bound():
    rng = np.random.default_rng(11)
    for trial in range(5):
        coeffs = rng.uniform(0.2, 2.0, size=4)
        src = lambda X: (
            coeffs[0]
            + coeffs[1] * np.sin(3 * X[..., 0]) ** 2
            + coeffs[2] * X[..., 1] ** 2
            + coeffs[3] * np.abs(X[..., 0] - 0.3)
        )
        interp = hierarchize(UNIT_SQUARE, 4, src, vectorized=True)
        node_values = src(grid_nodes(UNIT_SQUARE, 4))
        pts = rng.uniform(0, 1, size=(400, 2))
        values = interp.eval_many(pts)
        assert np.all(values >= -1e-12)
        assert np.all(values <= node_values.max() + 1e-12)


@pytest.mark.parametrize("d,p", [(2, 3), (3, 2)])
def test_sweep_matches_direct_recursion(d, p):
    rng = np.random.default_rng(d)
    lows = rng.uniform(-2, 0, d)
    highs = lows + rng.uniform(0.5, 2.0, d)
    cube = Hypercube(lows=lows, highs=highs)
    w = rng.uniform(-1, 1, d)

    def src(X):
        return np.sin(np.atleast_2d(X) @ w).ravel() + 0.3 * np.atleast_2d(X)[:, 0] ** 2

    interp = hierarchize(cube, p, src, vectorized=True)
    for li, value in interp.coefficients().items():
        ref = surplus_reference(cube, li.levels, li.positions, lambda x: src(x[None, :])[0])
        assert abs(ref - value) < 1e-12, li


def test_collapsed_dimension_is_frozen():
    cube = Hypercube(lows=[0.0, 1.5], highs=[2.0, 1.5])
    f = lambda X: X[..., 0] ** 2 + 10.0 * X[..., 1]
    interp = hierarchize(cube, 5, f, vectorized=True)
    # levels in the collapsed dimension stay at zero with a single index
    assert all(li.levels[1] == 0 and li.positions[1] == 0 for li in interp.coefficients())
    xs = np.linspace(0, 2, 33)
    queries = np.column_stack([xs, np.full_like(xs, 1.5)])
    knots = np.linspace(0, 2, 2**5 + 1)
    np.testing.assert_allclose(
        interp.eval_many(queries),
        np.interp(xs, knots, f(np.column_stack([knots, np.full_like(knots, 1.5)]))),
        atol=1e-12,
    )


def test_clamping_policy():
    interp = hierarchize(UNIT_SQUARE, 3, lambda X: X[..., 0], vectorized=True)
    nudge = 1e-12  # inside the 1e-9 * edge tolerance
    assert abs(interp.eval(np.array([1.0 + nudge, 0.5])) - 1.0) < 1e-9
    with pytest.raises(OutsideCubeError):
        interp.eval(np.array([1.1, 0.5]))


def test_error_decay_on_sine_product():
    src = lambda X: np.sin(np.pi * X[..., 0]) * np.sin(np.pi * X[..., 1])
    g = np.linspace(0, 1, 101)
    A, B = np.meshgrid(g, g, indexing="ij")
    probe = np.column_stack([A.ravel(), B.ravel()])
    exact = src(probe)
    errs = []
    orders = range(3, 10)
    for p in orders:
        interp = hierarchize(UNIT_SQUARE, p, src, vectorized=True)
        errs.append(np.max(np.abs(interp.eval_many(probe) - exact)))
    slope = np.polyfit(list(orders), np.log2(errs), 1)[0]
    assert slope <= -1.7


def test_eval_joint_matches_individual():
    f1 = lambda X: np.sin(X[..., 0]) + X[..., 1]
    f2 = lambda X: X[..., 0] * X[..., 1]
    i1 = hierarchize(UNIT_SQUARE, 4, f1, vectorized=True)
    i2 = hierarchize(UNIT_SQUARE, 4, f2, vectorized=True)
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 1, size=(100, 2))
    joint = eval_joint([i1, i2], pts)
    np.testing.assert_array_equal(joint[0], i1.eval_many(pts))
    np.testing.assert_array_equal(joint[1], i2.eval_many(pts))


def test_interpolant_from_node_values_roundtrip():
    f = lambda X: np.cos(X[..., 0]) + X[..., 1] ** 2
    nodes = grid_nodes(UNIT_SQUARE, 4)
    interp = interpolant_from_node_values(UNIT_SQUARE, 4, f(nodes))
    other = hierarchize(UNIT_SQUARE, 4, f, vectorized=True)
    assert interp.coefficients() == other.coefficients()
    assert interp.coefficient_count == count_nodes(4, 2)


def test_serialization():
    interp = hierarchize(UNIT_SQUARE, 2, lambda X: X[..., 0], vectorized=True)
    payload = json.loads(interp.to_json())
    assert payload["order"] == 2
    assert len(payload["coefficients"]) == count_nodes(2, 2)
