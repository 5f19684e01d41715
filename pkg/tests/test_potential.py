import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from mems_blowup.core import MembraneState, build_grid, physical_z
from mems_blowup.potential import (
    NearTouchdownError,
    PotentialField,
    assemble_transformed_operator,
    dirichlet_energy,
    extract_traces,
    solve_potential,
    transformed_coefficients,
    verify_potential_bounds,
)
from mems_blowup.verify import mms_errors

from conftest import flat, parabola


@pytest.mark.parametrize("eps", [0.1, 1.0, 5.0])
def test_flat_membrane_is_linear(grid, eps):
    s = flat(grid)
    f = solve_potential(s, eps, grid)
    z = physical_z(grid, s)
    assert np.max(np.abs(f.phi - (1 + z))) <= 1e-9
    tr = extract_traces(f, s, grid)
    np.testing.assert_allclose(tr.gamma_m, 1.0, atol=1e-8)
    np.testing.assert_allclose(tr.gamma_g, 1.0, atol=1e-8)
    assert dirichlet_energy(f, s, grid, eps) == pytest.approx(2.0, abs=1e-8)


def test_boundary_data_pinned(small_grid):
    s = parabola(small_grid, 0.4)
    f = solve_potential(s, 1.0, small_grid)
    assert np.all(f.phi[:, 0] == 0.0) and np.all(f.phi[:, -1] == 1.0)
    np.testing.assert_array_equal(f.phi[0], small_grid.eta_nodes)
    np.testing.assert_array_equal(f.phi[-1], small_grid.eta_nodes)
    assert f.residual_norm <= 1e-10


def test_mms_second_order():
    errs = mms_errors((65, 129, 257))
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert 3.5 <= r1 <= 4.5 and 3.5 <= r2 <= 4.5


def test_mms_anisotropic_epsilon():
    errs = mms_errors((65, 129), epsilon=0.3, depth=0.5)
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_broken_stencil_does_not_converge():
    errs = mms_errors((65, 129), break_stencil=True)
    assert errs[0] / errs[1] < 2


def _sympy_coefficients(depth, eps, xv, etav):
    """Coefficients of the mapped operator from the chain rule, computed symbolically.

    Apply eps^2 d_xx + d_zz to psi(x, z) = phi(x, eta(x, z)) for probe functions phi
    whose derivatives isolate each coefficient (the mapped operator has no phi_x term).
    """
    x, z, e = sympy.symbols("x z eta")
    a = 1 - depth * (1 - x**2)
    eta = (1 + z) / a

    def op(phi_expr):
        psi = phi_expr.subs(e, eta)
        out = eps**2 * sympy.diff(psi, x, 2) + sympy.diff(psi, z, 2)
        zv = -1 + etav * a.subs(x, xv)
        return float(out.subs({x: xv, z: zv}))

    D = op(e)
    A = op(x**2 / 2)
    C = op(e**2 / 2) - D * etav
    B = op(x * e) - D * xv
    return A, B, C, D


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_coefficients_match_symbolic_chain_rule(seed):
    g = build_grid(257, 129)
    rng = np.random.default_rng(seed)
    depth, eps = 0.6, float(rng.uniform(0.2, 3.0))
    i, j = int(rng.integers(1, 256)), int(rng.integers(1, 128))
    # central differences of a quadratic u are exact, so u'' and u' carry no grid error
    coef = transformed_coefficients(parabola(g, depth), eps, g)
    A, B, C, D = _sympy_coefficients(depth, eps, g.x_nodes[i], g.eta_nodes[j])
    np.testing.assert_allclose([coef.xx[i, j], coef.xeta[i, j], coef.etaeta[i, j], coef.eta[i, j]], [A, B, C, D], rtol=1e-10, atol=1e-12)


def test_mirror_symmetry(grid):
    s = parabola(grid, 0.5)
    f = solve_potential(s, 1.0, grid)
    assert np.max(np.abs(f.phi - f.phi[::-1])) <= 1e-10
    tr = extract_traces(f, s, grid)
    assert np.max(np.abs(tr.gamma_m - tr.gamma_m[::-1])) <= 1e-8
    np.testing.assert_allclose(tr.side_px[0], -tr.side_px[1], atol=1e-8)


def test_small_aspect_ratio_trace():
    """As eps -> 0 the membrane trace tends to 1/(1+u) at rate eps^2."""
    g = build_grid(129, 65)
    s = parabola(g, 0.5)
    gaps = []
    for eps in (0.1, 0.05):
        tr = extract_traces(solve_potential(s, eps, g), s, g)
        gaps.append(np.max(np.abs(tr.gamma_m - 1 / s.gap)))
    assert gaps[0] <= 2.0 * 0.1**2
    assert 3.0 <= gaps[0] / gaps[1] <= 5.0


def test_deflection_raises_trace():
    g = build_grid(129, 65)
    s = parabola(g, 0.5)
    tr = extract_traces(solve_potential(s, 1.0, g), s, g)
    assert tr.gamma_m[64] > 1.0 and tr.gamma_g[64] > 1.0


def test_energy_second_order_refinement():
    vals = []
    for nx, nz in ((65, 33), (129, 65), (257, 129)):
        g = build_grid(nx, nz)
        s = parabola(g, 0.5)
        vals.append(dirichlet_energy(solve_potential(s, 1.0, g), s, g, 1.0))
    ratio = abs(vals[0] - vals[2]) / abs(vals[1] - vals[2])
    assert 4.0 <= ratio <= 6.0  # Richardson ratio (16 - 1) / (4 - 1) for an h^2 error


def test_bounds_pass_on_deflected_state(grid):
    s = parabola(grid, 0.6)
    f = solve_potential(s, 1.0, grid)
    tol = 50 * (grid.h_x**2 + grid.h_eta**2)
    entries = verify_potential_bounds(f, s, grid, extract_traces(f, s, grid), tol)
    assert [e.name for e in entries] == ["b1_upper", "b1_lower", "b2"]
    assert all(e.passed for e in entries)


def test_bounds_detect_corrupted_field(small_grid):
    s = parabola(small_grid, 0.4)
    f = solve_potential(s, 1.0, small_grid)
    phi = f.phi.copy()
    phi[16, 16] = 1.5
    bad = PotentialField(phi, f.residual_norm)
    entries = {e.name: e for e in verify_potential_bounds(bad, s, small_grid, extract_traces(bad, s, small_grid), 1e-3)}
    assert not entries["b1_upper"].passed
    phi = f.phi.copy()
    phi[16, 16] = -0.5
    bad = PotentialField(phi, f.residual_norm)
    entries = {e.name: e for e in verify_potential_bounds(bad, s, small_grid, extract_traces(bad, s, small_grid), 1e-3)}
    assert not entries["b1_lower"].passed


def test_near_touchdown_rejected(small_grid):
    s = parabola(small_grid, 0.9995)
    with pytest.raises(NearTouchdownError):
        assemble_transformed_operator(s, 1.0, small_grid, delta_touch=1e-3)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 0.8), st.floats(0.2, 4.0))
def test_maximum_principle_property(depth, eps):
    g = build_grid(65, 33)
    s = parabola(g, depth)
    f = solve_potential(s, eps, g)
    tol = 50 * (g.h_x**2 + g.h_eta**2)
    assert np.max(f.phi) <= 1 + tol
    assert np.min(f.phi - (1 + physical_z(g, s))) >= -tol
