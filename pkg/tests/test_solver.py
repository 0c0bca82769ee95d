import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import disk_sweep, quad_values, random_concave_program, refined_grid_maxmin
from mairs.solver import (
    INFEASIBLE,
    MAX_ITER,
    OPTIMAL,
    MaxMinProgram,
    QuadConstraints,
    solve_maxmin,
    solve_reflection_program,
)


def test_single_concave_quadratic():
    p = MaxMinProgram(QuadConstraints([1.0], [[0.0, 0.0]], curvature=[1.0]),
                      lower=-np.ones(2), upper=np.ones(2))
    rep = solve_maxmin(p, [0.5, 0.5])
    assert rep.status == OPTIMAL
    np.testing.assert_allclose(rep.x, 0.0, atol=1e-6)
    assert rep.eta == pytest.approx(1.0, abs=1e-6)


def test_two_affine_pieces():
    p = MaxMinProgram(QuadConstraints([0.0, 1.0], [[1.0], [-1.0]]),
                      lower=np.zeros(1), upper=np.ones(1))
    rep = solve_maxmin(p, [0.0])
    assert rep.status == OPTIMAL
    assert rep.x[0] == pytest.approx(0.5, abs=1e-6)
    assert rep.eta == pytest.approx(0.5, abs=1e-6)
    assert rep.violation <= 1e-8


def test_certificate_and_history():
    rng = np.random.default_rng(3)
    const, lin, hess, box = random_concave_program(rng, 2)
    p = MaxMinProgram(QuadConstraints(const, lin, hessians=hess),
                      lower=-box * np.ones(2), upper=box * np.ones(2))
    rep = solve_maxmin(p, np.zeros(2))
    assert rep.status == OPTIMAL
    assert rep.gap <= 1e-6
    assert np.all(np.diff(rep.history) >= -1e-12)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_matches_grid_search_2d(seed):
    rng = np.random.default_rng(seed)
    const, lin, hess, box = random_concave_program(rng, 2)
    p = MaxMinProgram(QuadConstraints(const, lin, hessians=hess),
                      lower=-box * np.ones(2), upper=box * np.ones(2))
    rep = solve_maxmin(p, rng.uniform(-0.5, 0.5, 2))
    grid, _ = refined_grid_maxmin(const, lin, hess, box, 1e-2, 1e-3)
    assert rep.status == OPTIMAL
    assert abs(rep.eta - grid) <= 2e-3
    assert rep.eta >= grid - 1e-6


def test_affine_rows_and_grid():
    rng = np.random.default_rng(8)
    const, lin, hess, box = random_concave_program(rng, 2)
    a = np.array([[1.0, 1.0]])
    b = np.array([0.3])
    p = MaxMinProgram(QuadConstraints(const, lin, hessians=hess), lower=-np.ones(2),
                      upper=np.ones(2), affine_a=a, affine_b=b)
    rep = solve_maxmin(p, [0.9, 0.9])
    grid, _ = refined_grid_maxmin(const, lin, hess, box, 1e-2, 1e-3,
                                  feasible=lambda x: x @ a[0] >= b[0])
    assert rep.status == OPTIMAL
    assert abs(rep.eta - grid) <= 2e-3
    assert a[0] @ rep.x >= b[0] - 1e-8


def test_infeasible_warm_start_is_repaired():
    p = MaxMinProgram(QuadConstraints([1.0], [[0.0]], curvature=[1.0]),
                      lower=np.array([0.2]), upper=np.ones(1))
    rep = solve_maxmin(p, [-3.0])
    assert rep.status == OPTIMAL
    assert rep.x[0] == pytest.approx(0.2, abs=1e-5)


def test_infeasible_system():
    p = MaxMinProgram(QuadConstraints([1.0], [[0.0]]), lower=np.zeros(1), upper=np.ones(1),
                      affine_a=np.array([[1.0], [-1.0]]), affine_b=np.array([0.8, -0.2]))
    assert solve_maxmin(p, [0.5]).status == INFEASIBLE


def test_iteration_cap():
    p = MaxMinProgram(QuadConstraints([0.0, 1.0], [[1.0], [-1.0]]),
                      lower=np.zeros(1), upper=np.ones(1))
    rep = solve_maxmin(p, [0.1], max_iter=3)
    assert rep.status == MAX_ITER
    assert rep.iterations <= 3


def test_unbounded_program_rejected():
    p = MaxMinProgram(QuadConstraints([0.0], [[1.0, 0.0]]), lower=-np.ones(2))
    with pytest.raises(ValueError):
        solve_maxmin(p, [0.0, 0.0])


def test_reflection_single_constraint():
    rep = solve_reflection_program(QuadConstraints([0.0], [[2.0, 0.0]]), 1, [0.3j])
    assert rep.status == OPTIMAL
    assert rep.x[0] == pytest.approx(1.0, abs=1e-6)
    assert rep.eta == pytest.approx(2.0, abs=1e-6)


def _reflection_cons(q, c):
    q = np.asarray(q, dtype=complex)
    return QuadConstraints(np.asarray(c, dtype=float),
                           2.0 * np.column_stack([q.real, q.imag]))


def test_reflection_conflicting_constraints():
    q = [1.0, 1j]
    c = [0.0, 0.1]
    rep = solve_reflection_program(_reflection_cons(q, c), 1, [0.5])
    best, v = disk_sweep(q, c)
    assert abs(rep.x[0]) == pytest.approx(1.0, abs=1e-6)
    assert abs(rep.eta - best) <= 2e-3


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_reflection_phase_sweep(seed):
    rng = np.random.default_rng(seed)
    n_cons = int(rng.integers(1, 4))
    q = rng.normal(size=n_cons) + 1j * rng.normal(size=n_cons)
    c = rng.uniform(0, 1, n_cons)
    rep = solve_reflection_program(_reflection_cons(q, c), 1, [0.0])
    best, _ = disk_sweep(q, c)
    assert rep.status == OPTIMAL
    assert abs(rep.x[0]) <= 1 + 1e-9
    assert rep.eta >= best - 1e-6
    assert rep.eta - best <= 2e-3 * (1 + np.abs(q).max())


def test_stack_mixed_forms():
    a = QuadConstraints([1.0], [[0.0, 1.0]], curvature=[2.0])
    b = QuadConstraints([0.0], [[1.0, 0.0]], hessians=[np.diag([1.0, 0.0])])
    s = a.stack(b)
    x = np.array([0.3, -0.4])
    np.testing.assert_allclose(s.values(x), np.concatenate([a.values(x), b.values(x)]))
    const, lin, hess = np.array([1.0]), np.array([[0.0, 1.0]]), np.array([2 * np.eye(2)])
    np.testing.assert_allclose(a.values(x), quad_values(const, lin, hess, x[None])[0])
