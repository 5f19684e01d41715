"""Semi-implicit time integration of the membrane equation.

Each step freezes the curvature mobility ``1/sqrt(1 + eps^2 u_x^2)`` at the old
state (a linear tridiagonal implicit diffusion) and treats the electrostatic
reaction explicitly.  First order in time, second order in space.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .certificates import (
    BlowupBound,
    blowup_time_bound,
    certify_state,
    check_blowup_bound,
    check_energy_ode,
    check_lemma1,
    check_lemma2,
    check_lemma3,
    check_prop4,
    energy_E,
)
from .core import (
    Breakdown,
    BreakdownStatus,
    CertificateEntry,
    MembraneState,
    SimulationConfig,
    TransformedGrid,
    build_grid,
    second_difference_x,
)
from .potential import TraceSet, dirichlet_energy, extract_traces, solve_potential

log = logging.getLogger(__name__)

GROWTH = 1.2


class StepError(RuntimeError):
    pass


class TouchdownOvershoot(StepError):
    """The step carried the membrane through the plate; retry with a smaller dt."""


class PositivityError(StepError):
    pass


class StepStall(StepError):
    """dt fell below ``dt_min``."""


class SimulationFailure(RuntimeError):
    """A run aborted; ``trajectory`` holds everything recorded up to the failure."""

    def __init__(self, message: str, trajectory: "Trajectory"):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class Snapshot:
    t: float
    dt: float
    min_u: float
    max_abs_ux: float
    max_abs_uxx: float
    E: float
    dirichlet_energy: float = math.nan
    slacks: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    snapshots: list[Snapshot] = field(default_factory=list)
    certificates: list[list[CertificateEntry]] = field(default_factory=list)
    ode_certificates: list[CertificateEntry] = field(default_factory=list)
    bound_certificate: Optional[CertificateEntry] = None
    status: BreakdownStatus = BreakdownStatus(Breakdown.RUNNING, 0.0)
    t_end: float = 0.0
    final_state: Optional[MembraneState] = None
    bound: Optional[BlowupBound] = None
    last_change: float = math.nan
    min_gap_seen: float = 1.0
    anomalies: list[str] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.E for s in self.snapshots])

    def all_certificates(self) -> list[CertificateEntry]:
        out = [e for group in self.certificates for e in group]
        out.extend(self.ode_certificates)
        if self.bound_certificate is not None:
            out.append(self.bound_certificate)
        return out

    @property
    def failed_certificates(self) -> list[CertificateEntry]:
        """Failures on resolved states; these decide the exit code."""
        return [e for e in self.all_certificates() if e.resolved and not e.passed]

    @property
    def worst_slack(self) -> float:
        """Smallest ``slack + tol`` over all certificates (negative means a failure)."""
        entries = [e for e in self.all_certificates() if e.resolved]
        return min((e.slack + e.tol for e in entries), default=math.nan)


def face_differences(u: np.ndarray, grid: TransformedGrid) -> np.ndarray:
    return np.diff(u) / grid.h_x


def curvature_operator(state: MembraneState, epsilon: float, grid: TransformedGrid) -> np.ndarray:
    """Divergence-form d/dx (u_x / sqrt(1 + eps^2 u_x^2)); zero at the clamped ends."""
    du = face_differences(state.u, grid)
    q = du / np.sqrt(1 + epsilon**2 * du**2)
    out = np.zeros_like(state.u)
    out[1:-1] = np.diff(q) / grid.h_x
    return out


def rhs_electrostatic(state: MembraneState, traces: TraceSet, lam: float, epsilon: float) -> np.ndarray:
    return -lam * (1 + epsilon**2 * state.ux**2) * traces.gamma_m**2


def step(
    state: MembraneState,
    dt: float,
    reaction: np.ndarray,
    epsilon: float,
    grid: TransformedGrid,
    clip_tol: float,
) -> MembraneState:
    """One lagged-mobility step with the reaction ``reaction`` held explicit."""
    n = grid.nx
    du = face_differences(state.u, grid)
    mob = 1.0 / np.sqrt(1 + epsilon**2 * du**2)
    r = dt / grid.h_x**2

    ab = np.zeros((3, n))
    ab[1, :] = 1.0
    ab[1, 1:-1] += r * (mob[:-1] + mob[1:])
    ab[0, 2:] = -r * mob[1:]  # superdiagonal, row i couples to i+1
    ab[2, :-2] = -r * mob[:-1]  # subdiagonal, row i couples to i-1
    rhs = state.u + dt * reaction
    rhs[0] = rhs[-1] = 0.0

    u_new = solve_banded((1, 1), ab, rhs)
    u_new[0] = u_new[-1] = 0.0
    if np.min(u_new) <= -1.0:
        raise TouchdownOvershoot(f"step of dt={dt:.3e} crosses the plate (min u = {np.min(u_new):.6f})")
    top = float(np.max(u_new))
    if top > clip_tol:
        raise PositivityError(f"membrane rose to {top:.3e} above rest, beyond clip tolerance {clip_tol:.3e}")
    np.minimum(u_new, 0.0, out=u_new)
    return MembraneState.from_samples(state.t + dt, u_new, grid)


def dt_cap(state: MembraneState, lam: float, c_dt: float) -> float:
    return c_dt * state.min_gap**2 / max(lam, 1.0)


def adapt_dt(state: MembraneState, dt_prev: float, lam: float, c_dt: float = 0.1, dt_min: float = 1e-12) -> float:
    dt = min(dt_prev * GROWTH, dt_cap(state, lam, c_dt))
    if dt < dt_min:
        raise StepStall(f"dt = {dt:.3e} below dt_min = {dt_min:.3e} at t = {state.t:.6g} (min(1+u) = {state.min_gap:.3e})")
    return dt


def _too_fast(old: MembraneState, new: MembraneState) -> bool:
    """Step-acceptance rule: at most halve the gap, at most double the slope (above 1)."""
    if new.min_gap < 0.5 * old.min_gap:
        return True
    slope_old = max(float(np.max(np.abs(old.ux))), 1.0)
    return float(np.max(np.abs(new.ux))) > 2.0 * slope_old


def detect_breakdown(state: MembraneState, config: SimulationConfig, grid: TransformedGrid) -> BreakdownStatus:
    if state.min_gap <= config.delta_touch:
        return BreakdownStatus(Breakdown.TOUCHDOWN, state.t)
    if np.max(np.abs(second_difference_x(state.u, grid))) >= config.grad_max:
        return BreakdownStatus(Breakdown.GRADIENT_BLOWUP, state.t)
    if state.t >= config.t_max:
        return BreakdownStatus(Breakdown.TIME_LIMIT, state.t)
    return BreakdownStatus(Breakdown.RUNNING, state.t)


def initial_state(config: SimulationConfig, grid: TransformedGrid) -> MembraneState:
    u0 = config.initial_profile.sample(grid.x_nodes)
    u0[0] = u0[-1] = 0.0
    state = MembraneState.from_samples(0.0, u0, grid)
    state.validate(0.0)
    return state


def _summarize(state: MembraneState, dt: float, grid: TransformedGrid) -> Snapshot:
    return Snapshot(
        t=state.t,
        dt=dt,
        min_u=float(np.min(state.u)),
        max_abs_ux=float(np.max(np.abs(state.ux))),
        max_abs_uxx=float(np.max(np.abs(second_difference_x(state.u, grid)))),
        E=energy_E(state, grid),
    )


# A reaction model maps (state, snapshot, certify?) to the explicit reaction term,
# filling snapshot extras and returning certificates when certify is True.
Reaction = Callable[[MembraneState, Snapshot, bool], tuple[np.ndarray, list[CertificateEntry]]]


def full_model_reaction(config: SimulationConfig, grid: TransformedGrid) -> Reaction:
    lam, eps = config.lam, config.epsilon
    tol = config.cert_tolerance(grid)

    def evaluate(state, snap, certify):
        field_ = solve_potential(state, eps, grid, tol_linear=config.tol_linear, delta_touch=config.delta_touch)
        traces = extract_traces(field_, state, grid)
        energy = dirichlet_energy(field_, state, grid, eps)
        snap.dirichlet_energy = energy
        chain = [
            check_lemma1(traces, state, grid, eps, tol),
            check_lemma2(traces, state, grid, eps, energy, tol),
            check_lemma3(energy, state, grid, tol),
            check_prop4(traces, state, grid, eps, tol),
        ]
        snap.slacks = {e.name: e.slack for e in chain}
        certs = []
        if certify:
            resolved = config.resolves(state, grid)
            certs = [replace(e, resolved=resolved) for e in certify_state(field_, state, grid, eps, tol, traces, energy)]
        return rhs_electrostatic(state, traces, lam, eps), certs

    return evaluate


def integrate(
    config: SimulationConfig,
    reaction: Reaction,
    epsilon: float,
    grid: Optional[TransformedGrid] = None,
) -> Trajectory:
    """Shared stepping loop: evaluate reaction, certify on cadence, step, adapt."""
    grid = grid or build_grid(config.nx, config.nz)
    clip_tol = config.cert_tolerance(grid)
    state = initial_state(config, grid)
    traj = Trajectory(final_state=state)
    dt = min(config.dt_init, dt_cap(state, config.lam, config.c_dt)) if config.adaptive else config.dt_init
    dt_last = 0.0
    n_accepted = 0
    last_certified = -1
    pending: Optional[tuple[MembraneState, Snapshot]] = None

    def finish(status):
        traj.status = status
        traj.t_end = state.t
        traj.final_state = state

    try:
        while True:
            status = detect_breakdown(state, config, grid)
            snap = _summarize(state, dt_last, grid)
            traj.min_gap_seen = min(traj.min_gap_seen, state.min_gap)
            if status.is_breakdown:
                traj.snapshots.append(snap)
                if pending is not None and last_certified != n_accepted - 1:
                    _, certs = reaction(*pending, True)
                    traj.certificates.append(certs)
                finish(status)
                break
            certify = n_accepted % config.cert_every == 0
            g, certs = reaction(state, snap, certify)
            traj.snapshots.append(snap)
            if certify:
                traj.certificates.append(certs)
                last_certified = n_accepted
            pending = (state, Snapshot(**{**snap.__dict__, "slacks": {}}))
            if status.kind is Breakdown.TIME_LIMIT:
                if last_certified != n_accepted:
                    traj.certificates.append(reaction(state, snap, True)[1])
                finish(status)
                break

            dt_try = min(dt, config.t_max - state.t)
            while True:
                if dt_try < config.dt_min:
                    raise StepStall(f"dt = {dt_try:.3e} below dt_min at t = {state.t:.6g}")
                try:
                    new = step(state, dt_try, g, epsilon, grid, clip_tol)
                except TouchdownOvershoot:
                    dt_try /= 2
                    continue
                # a step that lands inside the touchdown band ends the run; its time error is one dt
                if config.adaptive and new.min_gap > config.delta_touch and _too_fast(state, new):
                    dt_try /= 2
                    continue
                break
            if abs(new.t - config.t_max) <= 1e-12 * max(1.0, config.t_max):
                new = MembraneState(config.t_max, new.u, new.ux)
            traj.last_change = float(np.max(np.abs(new.u - state.u)))
            state = new
            dt_last = dt_try
            n_accepted += 1
            dt = adapt_dt(state, dt_try, config.lam, config.c_dt, config.dt_min) if config.adaptive else config.dt_init
    except Exception as exc:
        finish(BreakdownStatus(Breakdown.RUNNING, state.t))
        raise SimulationFailure(f"{type(exc).__name__}: {exc}", traj) from exc
    return traj


def run_simulation(config: SimulationConfig) -> Trajectory:
    if config.epsilon <= 0:
        raise ValueError("the full model needs epsilon > 0; use run_small_gap for epsilon = 0")
    grid = build_grid(config.nx, config.nz)
    traj = integrate(config, full_model_reaction(config, grid), config.epsilon, grid)
    _finalize(traj, config, grid)
    return traj


def _finalize(traj: Trajectory, config: SimulationConfig, grid: TransformedGrid) -> None:
    eps = config.epsilon
    if eps > 0 and len(traj.snapshots) >= 3:
        tol = config.cert_tolerance(grid)
        traj.ode_certificates = check_energy_ode(traj.times, traj.energies, config.lam, eps, tol)
    traj.bound = blowup_time_bound(initial_state(config, grid), grid, config.lam, eps) if eps > 0 else None
    if traj.bound is not None and traj.status.is_breakdown:
        traj.bound_certificate = check_blowup_bound(traj.status.t_event, traj.bound, 0.05 * traj.bound.t_paper)
