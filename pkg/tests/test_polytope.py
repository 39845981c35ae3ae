"""Tests for the deterministic simplex LP solver and its brute-force twin."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repmab.polytope import (
    Infeasible,
    SimplexPolytopeLP,
    brute_force_optimum,
    least_violation_strategy,
    solve,
)


def test_unconstrained_argmax():
    lp = SimplexPolytopeLP([0.9, 0.5], np.zeros((0, 2)), np.zeros(0))
    x, value = solve(lp)
    assert np.array_equal(x, [1.0, 0.0])
    assert value == pytest.approx(0.9)


def test_binding_constraint_mixes():
    lp = SimplexPolytopeLP([0.9, 0.5], [[0.8, 0.2]], [0.5])
    x, value = solve(lp)
    assert np.allclose(x, [0.5, 0.5], atol=1e-9)
    assert value == pytest.approx(0.7, abs=1e-9)


def test_contradiction_with_simplex_is_infeasible():
    lp = SimplexPolytopeLP([1.0, 1.0, 1.0], [[1.0, 1.0, 1.0]], [0.5])
    with pytest.raises(Infeasible):
        solve(lp)
    with pytest.raises(Infeasible):
        brute_force_optimum(lp)


def test_brute_force_agrees_on_examples():
    for lp in [
        SimplexPolytopeLP([0.9, 0.5], np.zeros((0, 2)), np.zeros(0)),
        SimplexPolytopeLP([0.9, 0.5], [[0.8, 0.2]], [0.5]),
    ]:
        x_s, v_s = solve(lp)
        x_b, v_b = brute_force_optimum(lp)
        assert abs(v_s - v_b) <= 1e-9
        assert np.all(np.abs(x_s - x_b) <= 1e-9)


def test_single_arm_simplex():
    lp = SimplexPolytopeLP([0.4], [[0.3]], [0.5])
    x, value = solve(lp)
    assert np.array_equal(x, [1.0])
    assert value == pytest.approx(0.4)
    x_b, v_b = brute_force_optimum(lp)
    assert np.array_equal(x_b, [1.0])

    with pytest.raises(Infeasible):
        solve(SimplexPolytopeLP([0.4], [[0.9]], [0.5]))


def test_tie_break_prefers_low_arm_mass():
    # flat objective: the canonical optimum pushes mass onto arm 0
    lp = SimplexPolytopeLP([1.0, 1.0], [[0.8, 0.2]], [0.5])
    x, value = solve(lp)
    assert value == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(x, [0.5, 0.5], atol=1e-8)  # x0 maximized under the row

    lp2 = SimplexPolytopeLP([0.9, 0.5, 0.9], np.zeros((0, 3)), np.zeros(0))
    x2, _ = solve(lp2)
    assert np.array_equal(x2, [1.0, 0.0, 0.0])


def test_determinism_bitwise():
    rng = np.random.default_rng(11)
    obj = rng.random(4)
    mat = rng.random((3, 4))
    bnd = rng.random(3)
    lp = SimplexPolytopeLP(obj, mat, bnd)
    try:
        x1, v1 = solve(lp)
        x2, v2 = solve(lp)
    except Infeasible:
        return
    assert np.array_equal(x1, x2) and v1 == v2


def test_rejects_nonfinite():
    with pytest.raises(ValueError):
        SimplexPolytopeLP([np.nan, 1.0], np.zeros((0, 2)), np.zeros(0))


def test_least_violation_on_empty_region():
    # sum of x is 1, so the excess over 0.5 is exactly 0.5 everywhere
    x, worst = least_violation_strategy(np.array([[1.0, 1.0]]), np.array([0.5]))
    assert worst == pytest.approx(0.5, abs=1e-9)
    assert np.array_equal(x, [1.0, 0.0])


def test_least_violation_reaches_zero_when_feasible():
    x, worst = least_violation_strategy(np.array([[0.8, 0.2]]), np.array([0.5]))
    assert worst <= 1e-9
    assert 0.8 * x[0] + 0.2 * x[1] <= 0.5 + 1e-9


def _random_feasible_lp(rng):
    k = int(rng.integers(2, 5))
    m = int(rng.integers(0, 4))
    obj = rng.random(k)
    mat = rng.random((m, k))
    # anchor feasibility at a random simplex point
    anchor = rng.dirichlet(np.ones(k))
    bnd = mat @ anchor + rng.random(m) * 0.2
    return SimplexPolytopeLP(obj, mat, bnd)


def test_random_differential_small():
    rng = np.random.default_rng(7)
    for _ in range(60):
        lp = _random_feasible_lp(rng)
        x_s, v_s = solve(lp)
        x_b, v_b = brute_force_optimum(lp)
        assert abs(v_s - v_b) <= 1e-9
        assert np.all(x_s >= -1e-9)
        if lp.constraint_matrix.shape[0]:
            assert np.all(lp.constraint_matrix @ x_s <= lp.bounds + 1e-9)
        assert abs(float(np.sum(x_s)) - 1.0) <= 1e-9


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None, derandomize=True)
def test_loosening_bounds_never_hurts(seed):
    rng = np.random.default_rng(seed)
    lp = _random_feasible_lp(rng)
    if lp.constraint_matrix.shape[0] == 0:
        return
    _, v_tight = solve(lp)
    loose = SimplexPolytopeLP(
        lp.objective, lp.constraint_matrix, lp.bounds + rng.random(lp.bounds.size) * 0.5
    )
    _, v_loose = solve(loose)
    assert v_loose >= v_tight - 1e-9


def test_brute_force_size_guard():
    with pytest.raises(ValueError):
        brute_force_optimum(
            SimplexPolytopeLP(np.ones(7), np.zeros((0, 7)), np.zeros(0))
        )
