import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from mairs.channel import ScenarioChannels
from mairs.harness import random_layout
from mairs.sca import (
    LOWER,
    UPPER,
    build_position_constraints,
    curvature_bound,
    distance_lb,
    evaluate_quad,
    reflection_constraints,
    reflection_lb,
    reflection_lb_from_rows,
    separate_coincident,
    spacing_constraints,
    surrogate_sense,
    z_hessian,
    z_surrogate,
    z_value_grad,
)
from mairs.snr import QuadraticForm, cosine_expansion, expected_snr, q_form

LAM = 0.1
freqs = st.tuples(st.floats(-2, 2), st.floats(-2, 2))
points = st.tuples(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))


def test_zero_frequency():
    z, g = z_value_grad((0.0, 0.0), [0.123, -0.07], LAM)
    assert z == 1.0
    np.testing.assert_array_equal(g, [0.0, 0.0])
    assert curvature_bound((0.0, 0.0), LAM) == 0.0
    for sense in (LOWER, UPPER):
        s = z_surrogate((0.0, 0.0), [0.01, 0.02], sense, LAM)
        assert s([0.2, -0.1]) == pytest.approx(1.0)


def test_quarter_period_value():
    z, g = z_value_grad((1.0, 0.0), [0.025, 0.0], LAM)
    assert z == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(g, [-20 * np.pi, 0.0])


def test_curvature_closed_form():
    assert curvature_bound((1.0, 0.0), LAM) == pytest.approx(400 * np.pi ** 2)
    assert curvature_bound((1.0, 0.0), LAM) == pytest.approx(3947.842, abs=1e-3)


@settings(max_examples=100)
@given(freqs, points, st.floats(-np.pi, np.pi))
def test_gradient_matches_finite_differences(nu, t, phase):
    t = np.array(t)
    _, g = z_value_grad(nu, t, LAM, phase)
    h = 1e-6
    fd = np.array([(z_value_grad(nu, t + h * e, LAM, phase)[0]
                    - z_value_grad(nu, t - h * e, LAM, phase)[0]) / (2 * h) for e in np.eye(2)])
    # central differences carry ~eps/h of rounding noise
    assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g) + 1e-9


@settings(max_examples=100)
@given(freqs, points, st.floats(-np.pi, np.pi))
def test_curvature_dominates_hessian(nu, t, phase):
    psi = curvature_bound(nu, LAM)
    hess = z_hessian(nu, np.array(t), LAM, phase)
    assert np.linalg.norm(hess) <= psi * (1 + 1e-12) + 1e-12
    assert np.linalg.eigvalsh(psi * np.eye(2) - hess).min() >= -1e-9 * max(psi, 1.0)


@settings(max_examples=50)
@given(freqs, points, st.floats(-np.pi, np.pi), st.integers(0, 2 ** 31 - 1))
def test_surrogate_touch_and_direction(nu, ref, phase, seed):
    ref = np.array(ref)
    lo = z_surrogate(nu, ref, LOWER, LAM, phase)
    hi = z_surrogate(nu, ref, UPPER, LAM, phase)
    z_ref = z_value_grad(nu, ref, LAM, phase)[0]
    assert lo(ref) == z_ref and hi(ref) == z_ref
    t = np.random.default_rng(seed).uniform(-0.3, 0.3, (200, 2))
    z = z_value_grad(nu, t, LAM, phase)[0]
    assert np.all(lo(t) <= z + 1e-9)
    assert np.all(hi(t) >= z - 1e-9)


def test_sense_rule():
    assert surrogate_sense(0.5) == LOWER
    assert surrogate_sense(-0.5) == UPPER
    with pytest.raises(ValueError):
        z_surrogate((1, 0), [0, 0], "sideways", LAM)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_position_minorant(seed):
    rng = np.random.default_rng(seed)
    spec, layout, v = random_instance(rng)
    ch = ScenarioChannels(spec)
    pc = ch.areas[0]
    exp = cosine_expansion(ch, v, pc)
    true_ref = expected_snr(ch, layout, v, pc)
    cons = build_position_constraints(exp, layout, true_ref.floor)
    np.testing.assert_allclose(evaluate_quad(cons, layout), true_ref.total, rtol=1e-9)
    for _ in range(10):
        t = random_layout(spec, rng)
        g = evaluate_quad(cons, t)
        assert np.all(g <= expected_snr(ch, t, v, pc).total * (1 + 1e-9) + 1e-12)
    if len(spec.panels) == 1:
        assert np.all(cons.linear == 0) and np.all(cons.curvature == 0)


def test_distance_examples():
    lin = distance_lb([0.1, 0.0], [0.0, 0.0])
    assert lin([0.1, 0.0], [0.0, 0.0]) == pytest.approx(0.01)
    assert lin([0.2, 0.0], [0.0, 0.0]) == pytest.approx(0.03)
    with pytest.raises(ValueError, match="degenerate pair linearization"):
        distance_lb([0.1, 0.1], [0.1, 0.1])


@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8))
def test_distance_global_bound(c):
    tm_r, tq_r, tm, tq = (np.array(c[i:i + 2]) for i in range(0, 8, 2))
    if np.allclose(tm_r, tq_r):
        return
    lin = distance_lb(tm_r, tq_r)
    assert lin(tm, tq) <= np.sum((tm - tq) ** 2) + 1e-12


def test_spacing_rows_and_coincident_refs():
    ref = np.array([[0.0, 0.0], [0.0, 0.0], [0.1, 0.0]])
    sep = separate_coincident(ref, 0.05)
    assert not np.allclose(sep[0], sep[1])
    a, b = spacing_constraints(ref, 0.05)
    assert a.shape == (3, 6) and b.shape == (3,)
    a1, b1 = spacing_constraints(np.zeros((1, 2)), 0.05)
    assert a1.shape == (0, 2)


def test_spacing_rows_enforce_true_spacing():
    rng = np.random.default_rng(0)
    ref = np.array([[0.0, 0.0], [0.07, 0.02]])
    a, b = spacing_constraints(ref, 0.05)
    for _ in range(500):
        x = rng.uniform(-0.2, 0.2, 4)
        if np.all(a @ x >= b):
            assert np.linalg.norm(x[:2] - x[2:]) >= 0.05 - 1e-12


def test_reflection_lb_identity_example():
    form = QuadraticForm(np.eye(3)[None].astype(complex), np.zeros(1))
    e0 = np.array([1, 0, 0], dtype=complex)
    lin = reflection_lb(form, e0)
    assert lin(e0)[0] == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_reflection_minorant(seed):
    rng = np.random.default_rng(seed)
    spec, layout, v = random_instance(rng)
    ch = ScenarioChannels(spec)
    form = q_form(ch, layout, ch.areas[0])
    lin = reflection_lb(form, v)
    np.testing.assert_allclose(lin(v), form.value(v), rtol=1e-10)
    cons = reflection_constraints(lin)
    x = np.concatenate([v.real, v.imag])
    np.testing.assert_allclose(cons.values(x), form.value(v), rtol=1e-10)
    for _ in range(20):
        w = np.sqrt(rng.uniform(0, 1, len(v))) * np.exp(1j * rng.uniform(0, 6.3, len(v)))
        assert np.all(lin(w) <= form.value(w) * (1 + 1e-9) + 1e-12)


def test_reflection_lb_from_rows_agrees():
    rng = np.random.default_rng(4)
    spec, layout, v = random_instance(rng)
    ch = ScenarioChannels(spec)
    pc = ch.areas[0]
    form = q_form(ch, layout, pc)
    phi = np.sqrt(spec.rf.p_bar) * ch.cascade(layout, pc)
    floor_diag = spec.rf.p_bar * spec.m_antennas * pc.floor_w
    a = reflection_lb(form, v)
    b = reflection_lb_from_rows(np.einsum("gnm,n->gm", phi, v), phi.conj(), floor_diag, v)
    np.testing.assert_allclose(a.coefficient, b.coefficient, rtol=1e-10)
    np.testing.assert_allclose(a.constant, b.constant, rtol=1e-10)
