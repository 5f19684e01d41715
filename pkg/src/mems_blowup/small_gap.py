"""The vanishing aspect-ratio model ``u_t = u_xx - lam / (1 + u)^2`` and its pull-in threshold.

``pullin_threshold`` follows the steady branch of ``u'' = lam / (1 + u)^2``,
``u(+-1) = 0`` by pseudo-arclength continuation and locates the fold in ``lam``
with a Moore-Spence extended system.  ``shooting_threshold`` is an independent
oracle built on the scaling invariance of the steady ODE.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .core import Breakdown, MembraneState, SimulationConfig, TransformedGrid, build_grid
from .stepper import SimulationFailure, Snapshot, Trajectory, integrate, run_simulation

log = logging.getLogger(__name__)


def rhs_small_gap(state: MembraneState, lam: float) -> np.ndarray:
    if state.min_gap <= 0:
        raise ValueError("membrane has reached the plate")
    return -lam / state.gap**2


def run_small_gap(config: SimulationConfig) -> Trajectory:
    """Same stepping contract as the full model, closed-form reaction, epsilon ignored."""
    grid = build_grid(config.nx, config.nz)

    def reaction(state: MembraneState, snap: Snapshot, certify: bool):
        return rhs_small_gap(state, config.lam), []

    traj = integrate(config, reaction, 0.0, grid)
    if traj.status.kind is Breakdown.GRADIENT_BLOWUP:
        traj.anomalies.append(f"gradient blow-up fired at t = {traj.status.t_event!r} in the semilinear model")
    return traj


# steady branch ---------------------------------------------------------------


@dataclass
class SteadyBranch:
    points: list[tuple[float, float, float]] = field(default_factory=list)  # (lam, min_u, s)
    fold: Optional[tuple[float, float]] = None  # (lam*, min_u at fold)
    nx: int = 0


class ContinuationStall(RuntimeError):
    def __init__(self, message: str, branch: SteadyBranch):
        super().__init__(message)
        self.branch = branch


def _laplacian(n_inner: int, h: float) -> sp.csr_matrix:
    main = np.full(n_inner, -2.0)
    off = np.ones(n_inner - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2


def steady_residual(v: np.ndarray, lam: float, D2: sp.csr_matrix) -> np.ndarray:
    return D2 @ v - lam / (1 + v) ** 2


def _jacobians(v, lam, D2):
    Ju = D2 + sp.diags(2 * lam / (1 + v) ** 3)
    Jl = -1.0 / (1 + v) ** 2
    return Ju.tocsr(), Jl


def _bordered(Ju, Jl, row_u, row_l):
    return sp.bmat(
        [[Ju, sp.csr_matrix(Jl[:, None])], [sp.csr_matrix(row_u[None, :]), sp.csr_matrix([[row_l]])]],
        format="csc",
    )


def _tangent(v, lam, D2, prev, w):
    """Unit tangent of the branch, oriented along ``prev``; ``w`` weights the u-block."""
    Ju, Jl = _jacobians(v, lam, D2)
    n = v.size
    A = _bordered(Ju, Jl, w * prev[:n], prev[n])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    tau = spla.spsolve(A, rhs)
    return tau / math.sqrt(w * tau[:n] @ tau[:n] + tau[n] ** 2)


def _correct(y_pred, tau, D2, w, tol, max_iter=30):
    n = y_pred.size - 1
    y = y_pred.copy()
    for _ in range(max_iter):
        v, lam = y[:n], y[n]
        if np.min(1 + v) <= 0:
            return None
        F = steady_residual(v, lam, D2)
        g = w * tau[:n] @ (v - y_pred[:n]) + tau[n] * (lam - y_pred[n])
        if np.max(np.abs(F)) <= tol and abs(g) <= tol:
            return y
        Ju, Jl = _jacobians(v, lam, D2)
        A = _bordered(Ju, Jl, w * tau[:n], tau[n])
        y = y - spla.spsolve(A, np.concatenate([F, [g]]))
    return None


def refine_fold(v, lam, D2, tol=1e-12, max_iter=30):
    """Newton on F = 0, J_u phi = 0, <phi0, phi> = 1 (Moore-Spence)."""
    n = v.size
    Ju, _ = _jacobians(v, lam, D2)
    # approximate null vector from the near-singular Jacobian
    phi = spla.spsolve(Ju.tocsc(), np.ones(n))
    phi /= np.linalg.norm(phi)
    ref = phi.copy()
    for _ in range(max_iter):
        Ju, Jl = _jacobians(v, lam, D2)
        F = steady_residual(v, lam, D2)
        G = Ju @ phi
        H = ref @ phi - 1.0
        if max(np.max(np.abs(F)), np.max(np.abs(G)) / max(np.max(np.abs(phi)), 1.0), abs(H)) <= tol:
            break
        Guu = sp.diags(-6 * lam * phi / (1 + v) ** 4)
        Gl = 2 * phi / (1 + v) ** 3
        A = sp.bmat(
            [
                [Ju, sp.csr_matrix(Jl[:, None]), None],
                [Guu, sp.csr_matrix(Gl[:, None]), Ju],
                [None, None, sp.csr_matrix(ref[None, :])],
            ],
            format="csc",
        )
        d = spla.spsolve(A, np.concatenate([F, G, [H]]))
        v = v - d[:n]
        lam = lam - d[n]
        phi = phi - d[n + 1 :]
    return v, lam


def continue_branch(
    nx: int,
    ds: float = 0.05,
    tol: float = 1e-10,
    max_steps: int = 2000,
    steps_after_fold: int = 12,
    ds_min: float = 1e-8,
) -> SteadyBranch:
    grid = build_grid(nx, 33)
    h = grid.h_x
    n = nx - 2
    D2 = _laplacian(n, h)
    w = h / 2  # discrete L2 weight for the u-block
    branch = SteadyBranch(nx=nx)

    y = np.zeros(n + 1)
    tau = _tangent(y[:n], 0.0, D2, np.concatenate([np.zeros(n), [1.0]]), w)
    s = 0.0
    branch.points.append((0.0, 0.0, 0.0))
    after = None
    for _ in range(max_steps):
        new = _correct(y + ds * tau, tau, D2, w, tol)
        if new is None:
            ds /= 2
            if ds < ds_min:
                raise ContinuationStall(f"corrector failed with ds = {ds:.2e} at lam = {y[n]!r}", branch)
            continue
        tau_new = _tangent(new[:n], new[n], D2, tau, w)
        s += ds
        branch.points.append((float(new[n]), float(np.min(new[:n])), s))
        if branch.fold is None and tau[n] > 0 >= tau_new[n]:
            start = new if abs(tau_new[n]) < abs(tau[n]) else y
            v_f, lam_f = refine_fold(start[:n], start[n], D2)
            branch.fold = (float(lam_f), float(np.min(v_f)))
            after = 0
        y, tau = new, tau_new
        if after is not None:
            after += 1
            if after >= steps_after_fold:
                return branch
        ds = min(ds * 1.3, 0.1 if after is None else 0.02)
        if y[n] <= 0 or np.min(1 + y[:n]) < 0.05:
            break
    if branch.fold is None:
        raise ContinuationStall("branch ended before a fold was traversed", branch)
    raise ContinuationStall("branch too short past the fold", branch)


def pullin_threshold(nx: int = 257, tol: float = 1e-10) -> float:
    branch = continue_branch(nx, tol=tol)
    return branch.fold[0]


def shooting_threshold(rtol: float = 1e-12) -> float:
    """Continuous threshold from the scaled family ``W'' = 1/W^2``, ``W(0) = 1``, ``W'(0) = 0``.

    A symmetric steady state with centre gap ``alpha`` is ``1 + u(x) = alpha W(s x)``;
    clamping at ``x = 1`` forces ``alpha = 1/W(s)`` and ``lam = s^2 / W(s)^3``.
    The threshold is the maximum of ``lam`` over the single shooting parameter ``s``.
    """

    def W(s):
        sol = solve_ivp(lambda x, y: [y[1], 1.0 / y[0] ** 2], (0.0, s), [1.0, 0.0], rtol=rtol, atol=1e-14, method="DOP853")
        return sol.y[0, -1]

    res = minimize_scalar(lambda s: -(s**2) / W(s) ** 3, bounds=(0.1, 5.0), method="bounded", options={"xatol": 1e-10})
    return float(-res.fun)


# model comparison ------------------------------------------------------------


@dataclass
class ModelComparison:
    lam: float
    t_probe: float
    epsilons: list[float]
    distances: list[Optional[float]]  # None marks an incomparable entry

    def ratios(self) -> list[Optional[float]]:
        out = []
        for a, b in zip(self.distances, self.distances[1:]):
            out.append(a / b if a is not None and b else None)
        return out


def compare_models(
    lam: float,
    epsilons: Sequence[float],
    u0=None,
    t_probe: float = 1.0,
    *,
    nx: int = 129,
    nz: int = 33,
    dt: float = 2e-3,
) -> ModelComparison:
    """Max-norm distance at ``t_probe`` between full-model and small-gap runs.

    Both models use the same fixed step so their time-discretization errors match
    to leading order and the distance isolates the aspect-ratio effect.
    """
    base = SimulationConfig(lam=lam, epsilon=0.0, nx=nx, nz=nz, t_max=t_probe, dt_init=dt, adaptive=False)
    if u0 is not None:
        base = replace(base, initial_profile=u0)
    try:
        ref = run_small_gap(base)
        u_ref = ref.final_state.u if ref.status.kind is Breakdown.TIME_LIMIT else None
    except SimulationFailure:
        u_ref = None
    dists: list[Optional[float]] = []
    for eps in epsilons:
        if u_ref is None:
            dists.append(None)
            continue
        if eps == 0:
            dists.append(0.0)
            continue
        try:
            tr = run_simulation(replace(base, epsilon=eps))
        except SimulationFailure:
            dists.append(None)
            continue
        if tr.status.kind is not Breakdown.TIME_LIMIT:
            dists.append(None)
            continue
        dists.append(float(np.max(np.abs(tr.final_state.u - u_ref))))
    return ModelComparison(lam, t_probe, list(epsilons), dists)


def settles(lam: float, t_max: float = 200.0, nx: int = 257) -> bool:
    """True when the small-gap run from rest survives to ``t_max``."""
    cfg = SimulationConfig(lam=lam, epsilon=0.0, nx=nx, t_max=t_max)
    try:
        return run_small_gap(cfg).status.kind is Breakdown.TIME_LIMIT
    except SimulationFailure:
        return False


def dynamic_threshold_bracket(lo: float, hi: float, iterations: int = 8, **kw) -> tuple[float, float]:
    """Bisect on touchdown-versus-settle; ``lo`` must settle and ``hi`` must touch down."""
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if settles(mid, **kw):
            lo = mid
        else:
            hi = mid
    return lo, hi
