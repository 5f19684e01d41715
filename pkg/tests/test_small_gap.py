import numpy as np
import pytest
from scipy.optimize import brentq

from mems_blowup.core import Breakdown, InitialProfile, MembraneState, SimulationConfig, build_grid
from mems_blowup.potential import extract_traces, solve_potential
from mems_blowup.small_gap import (
    _correct,
    _laplacian,
    _tangent,
    compare_models,
    continue_branch,
    rhs_small_gap,
    run_small_gap,
    shooting_threshold,
    steady_residual,
)
from mems_blowup.stepper import rhs_electrostatic
from mems_blowup.verify import pullin_fixture

from conftest import flat, parabola

LAM_STAR = pullin_fixture()["lambda_star"]


@pytest.fixture(scope="module")
def branch257():
    return continue_branch(257)


def test_reaction_examples(small_grid):
    np.testing.assert_array_equal(rhs_small_gap(flat(small_grid), 2.0), -2.0)
    half = MembraneState(0.0, np.full(small_grid.nx, -0.5), np.zeros(small_grid.nx))
    np.testing.assert_allclose(rhs_small_gap(half, 1.0), -4.0)
    with pytest.raises(ValueError):
        rhs_small_gap(MembraneState(0.0, np.full(small_grid.nx, -1.0), np.zeros(small_grid.nx)), 1.0)


def test_reaction_matches_full_model_at_small_aspect_ratio():
    g = build_grid(129, 65)
    s = parabola(g, 0.3)
    errs = []
    for eps in (0.04, 0.02):
        tr = extract_traces(solve_potential(s, eps, g), s, g)
        errs.append(np.max(np.abs(rhs_electrostatic(s, tr, 1.0, eps) - rhs_small_gap(s, 1.0))))
    assert errs[1] <= 3 * 0.02**2
    assert 3.0 <= errs[0] / errs[1] <= 5.0


def test_fixture_provenance():
    fx = pullin_fixture()
    assert "shooting" in fx["method"].lower()
    assert 0.3 < fx["lambda_star"] < 0.4


def test_shooting_oracle_reproduces_fixture():
    assert shooting_threshold() == pytest.approx(LAM_STAR, rel=1e-9)


def test_fold_matches_oracle(branch257):
    lam_star, u_fold = branch257.fold
    assert abs(lam_star - LAM_STAR) / LAM_STAR < 5e-5
    assert -1 < u_fold < 0


def test_grid_robustness(branch257):
    fine = continue_branch(513).fold[0]
    assert f"{branch257.fold[0]:.4g}" == f"{fine:.4g}"


def test_branch_invariants(branch257):
    lam = np.array([p[0] for p in branch257.points])
    mu = np.array([p[1] for p in branch257.points])
    assert np.all(lam[1:] > 0) and np.all((mu > -1) & (mu <= 0))
    k = int(np.argmax(lam))
    assert 0 < k < lam.size - 1
    assert branch257.fold[0] >= lam.max() - 1e-9
    tail = lam[k:]
    assert tail.size >= 11 and np.all(np.diff(tail) < 0)
    assert np.all(np.diff([p[2] for p in branch257.points]) > 0)


def test_continuation_points_satisfy_steady_equation():
    """Re-run a few corrector steps and check their residual independently."""
    nx = 129
    g = build_grid(nx, 33)
    D2 = _laplacian(nx - 2, g.h_x)
    w = g.h_x / 2
    y = np.zeros(nx - 1)
    tau = _tangent(y[:-1], 0.0, D2, np.concatenate([np.zeros(nx - 2), [1.0]]), w)
    for _ in range(5):
        y_new = _correct(y + 0.05 * tau, tau, D2, w, 1e-10)
        tau = _tangent(y_new[:-1], y_new[-1], D2, tau, w)
        y = y_new
        assert np.max(np.abs(steady_residual(y[:-1], y[-1], D2))) <= 1e-10


def test_small_lambda_perturbation():
    nx = 257
    g = build_grid(nx, 33)
    D2 = _laplacian(nx - 2, g.h_x)
    # natural-parameter Newton at lam = 0.01 on the lower branch
    v = np.zeros(nx - 2)
    for _ in range(20):
        F = steady_residual(v, 0.01, D2)
        import scipy.sparse as sp
        import scipy.sparse.linalg as spla

        J = (D2 + sp.diags(2 * 0.01 / (1 + v) ** 3)).tocsc()
        v = v - spla.spsolve(J, F)
    assert v[(nx - 2) // 2] == pytest.approx(-0.005, rel=0.05)


def test_below_threshold_settles():
    cfg = SimulationConfig(lam=LAM_STAR / 2, epsilon=0.0, t_max=50.0)
    traj = run_small_gap(cfg)
    assert traj.status.kind is Breakdown.TIME_LIMIT
    assert traj.last_change < 1e-10
    assert not traj.anomalies


def test_above_threshold_touches_down():
    traj = run_small_gap(SimulationConfig(lam=2 * LAM_STAR, epsilon=0.0, t_max=50.0))
    assert traj.status.kind is Breakdown.TOUCHDOWN
    assert traj.status.t_event < 50.0


def test_zero_lambda_stays_at_rest():
    traj = run_small_gap(SimulationConfig(lam=0.0, epsilon=0.0, nx=65, t_max=1.0))
    assert traj.status.kind is Breakdown.TIME_LIMIT
    assert np.all(traj.final_state.u == 0.0)


def test_compare_models_trivial_entries():
    rep = compare_models(0.0, [0.0, 0.1], u0=InitialProfile("parabolic", 0.3), t_probe=0.1, nx=65, nz=33)
    assert rep.distances[0] == 0.0
    # pure relaxation: the models differ only through the curvature denominator, O(eps^2)
    assert 0 < rep.distances[1] <= 0.1**2


def test_compare_models_marks_incomparable():
    rep = compare_models(5.0, [0.5], t_probe=2.0, nx=65, nz=33)
    assert rep.distances == [None] and rep.ratios() == []
