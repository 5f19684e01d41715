import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mems_blowup.certificates import (
    F_lambda,
    blowup_time_bound,
    certify_state,
    check_blowup_bound,
    check_chain_ordering,
    check_energy_ode,
    check_jensen,
    check_lemma1,
    check_lemma2,
    check_lemma3,
    check_prop4,
    energy_E,
)
from mems_blowup.core import MembraneState, build_grid, integrate_x
from mems_blowup.potential import TraceSet, dirichlet_energy, extract_traces, solve_potential

from conftest import flat, parabola


def fake_traces(grid, gamma):
    g = np.full(grid.nx, gamma)
    return TraceSet(g, g, np.zeros((2, grid.nz)), np.ones((2, grid.nz)))


def solved(grid, depth, eps):
    s = parabola(grid, depth)
    f = solve_potential(s, eps, grid)
    tr = extract_traces(f, s, grid)
    return s, f, tr, dirichlet_energy(f, s, grid, eps)


def test_energy_examples(small_grid):
    assert energy_E(flat(small_grid), small_grid) == 0.0
    half = MembraneState(0.0, np.full(small_grid.nx, -0.5), np.zeros(small_grid.nx))
    assert energy_E(half, small_grid) == pytest.approx(0.5)
    assert energy_E(parabola(build_grid(257, 33), 0.3), build_grid(257, 33)) == pytest.approx(0.2, abs=1e-5)


@pytest.mark.parametrize("E,lam,eps,value", [(0.0, 2, 1, 1.0), (0.0, 1, 1, 0.0), (0.5, 4, 0.5, 10.0)])
def test_F_lambda_examples(E, lam, eps, value):
    assert F_lambda(E, lam, eps) == pytest.approx(value)


def test_F_lambda_rejects_E_at_one():
    with pytest.raises(ValueError):
        F_lambda(1.0, 2, 1)


@given(st.floats(0, 0.99), st.floats(0, 0.99), st.floats(0.01, 10), st.floats(0.05, 10))
def test_F_lambda_monotone(e1, e2, lam, eps):
    lo, hi = sorted((e1, e2))
    assert F_lambda(lo, lam, eps) <= F_lambda(hi, lam, eps) + 1e-12


@settings(max_examples=40)
@given(st.floats(0.0, 0.95), st.floats(0.0, 0.95))
def test_energy_in_unit_interval(c1, c2):
    g = build_grid(65, 33)
    x = g.x_nodes
    u = -c1 * (1 - x**2) * (1 + c2 * x) / (1 + c2)  # admissible: clamped, in (-1, 0]
    E = energy_E(MembraneState.from_samples(0, u, g), g)
    assert 0 <= E < 1


def test_flat_state_is_equality_case(grid):
    s, f, tr, D = solved(grid, 0.0, 1.0)
    for e in (check_lemma1(tr, s, grid, 1.0, 0), check_lemma2(tr, s, grid, 1.0, D, 0), check_lemma3(D, s, grid, 0), check_prop4(tr, s, grid, 1.0, 0)):
        assert e.lhs == pytest.approx(2.0, abs=1e-8) and e.rhs == pytest.approx(2.0, abs=1e-8)
        assert abs(e.slack) <= 1e-7


def test_b5_arithmetic(small_grid):
    s = flat(small_grid)
    for gamma, lhs, rhs in ((0.5, 0.5, 0.0), (0.9, 1.62, 1.6), (0.99, 1.9602, 1.96)):
        e = check_lemma1(fake_traces(small_grid, gamma), s, small_grid, 1.0, 1e-3)
        assert e.lhs == pytest.approx(lhs) and e.rhs == pytest.approx(rhs) and e.passed
    assert check_lemma1(fake_traces(small_grid, 0.99), s, small_grid, 1.0, 0).slack == pytest.approx(2e-4)


@pytest.mark.parametrize("depth,eps", [(0.3, 1.0), (0.5, 1.0), (0.5, 0.05)])
def test_chain_passes_on_deflected_states(grid, depth, eps):
    s, f, tr, D = solved(grid, depth, eps)
    tol = 50 * (grid.h_x**2 + grid.h_eta**2)
    entries = certify_state(f, s, grid, eps, tol, tr, D)
    assert {e.name for e in entries} >= {"b1_upper", "b1_lower", "b2", "b3a", "b3b", "b5", "b6", "b7", "b8", "jensen"}
    assert all(e.passed for e in entries), [e for e in entries if not e.passed]
    assert check_chain_ordering(entries, tol)


def test_small_aspect_ratio_collapses_chain():
    g = build_grid(129, 65)
    s, f, tr, D = solved(g, 0.5, 0.05)
    target = integrate_x(1 / s.gap, g)
    b6 = check_lemma2(tr, s, g, 0.05, D, 0)
    assert abs(b6.lhs - target) <= 5 * 0.05**2
    assert abs(b6.rhs - target) <= 5 * 0.05**2


def test_deep_deflection_b7():
    g = build_grid(513, 129)
    s, f, tr, D = solved(g, 0.9, 1.0)
    e = check_lemma3(D, s, g, 50 * (g.h_x**2 + g.h_eta**2))
    assert e.rhs > integrate_x(1 / parabola(g, 0.5).gap, g)
    assert e.passed


def test_b7_rejects_touchdown(small_grid):
    s = MembraneState(0.0, np.full(small_grid.nx, -1.0), np.zeros(small_grid.nx))
    with pytest.raises(ValueError):
        check_lemma3(2.0, s, small_grid, 0.0)


@settings(max_examples=40)
@given(st.floats(0.0, 0.95), st.floats(-0.9, 0.9))
def test_discrete_jensen(depth, tilt):
    g = build_grid(65, 33)
    x = g.x_nodes
    u = -depth * (1 - x**2) * (1 + tilt * x) / (1 + abs(tilt))
    assert check_jensen(MembraneState.from_samples(0, u, g), g, 0.0).slack >= -1e-14


def test_energy_ode_fabricated_stationary_fails():
    t = np.linspace(0, 0.1, 11)
    entries = check_energy_ode(t, np.zeros_like(t), 2.0, 1.0, 1e-3)
    assert len(entries) == 9
    assert not any(e.passed for e in entries)
    assert all(e.rhs == 1.0 and e.lhs == 0.0 for e in entries)


def test_energy_ode_slack_when_subcritical():
    t = np.linspace(0, 1, 6)
    entries = check_energy_ode(t, np.full(6, 0.1), 0.1, 1.0, 0.0)
    assert all(e.passed and e.rhs < 0 for e in entries)


def test_energy_ode_tolerance_includes_step():
    t = np.array([0.0, 0.1, 0.3])
    (e,) = check_energy_ode(t, np.zeros(3), 0.1, 1.0, 1e-3)
    assert e.tol == pytest.approx(1e-3 + 0.4)


def test_blowup_bounds(grid):
    b = blowup_time_bound(flat(grid), grid, 2.0, 1.0)
    assert b.t_paper == pytest.approx(1.0) and b.t_sharp == pytest.approx(1.0)
    b = blowup_time_bound(parabola(grid, 0.3), grid, 2.0, 1.0)
    assert b.t_paper == pytest.approx(0.8, abs=1e-5)
    assert b.t_sharp == pytest.approx(0.8 / 2.0, abs=1e-5)  # F_2(0.2) = 2 * 2 / 0.8 - 2 - 1 = 2
    assert blowup_time_bound(flat(grid), grid, 1.0, 1.0) is None
    assert blowup_time_bound(flat(grid), grid, 0.1, 1.0) is None


@given(st.floats(0.0, 0.9), st.floats(1.01, 20.0), st.floats(0.2, 5.0))
def test_sharp_bound_never_exceeds_paper_bound(depth, factor, eps):
    g = build_grid(33, 33)
    b = blowup_time_bound(parabola(g, depth), g, factor / eps, eps)
    assert 0 < b.t_sharp <= b.t_paper


def test_blowup_bound_certificate():
    from mems_blowup.certificates import BlowupBound

    b = BlowupBound(1.0, 1.0)
    assert check_blowup_bound(0.9, b, 0.05).passed
    assert check_blowup_bound(1.04, b, 0.05).passed
    assert not check_blowup_bound(1.2, b, 0.05).passed
