"""Inequality certificates evaluated on computed states and trajectories.

Every check returns :class:`~mems_blowup.core.CertificateEntry` objects oriented
as ``lhs >= rhs``.  Tolerances are discretization-level, not rigorous bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import CertificateEntry, MembraneState, TransformedGrid, integrate_x
from .potential import (
    PotentialField,
    TraceSet,
    dirichlet_energy,
    extract_traces,
    tangential_residual,
    verify_potential_bounds,
)


def energy_E(state: MembraneState, grid: TransformedGrid) -> float:
    return -0.5 * integrate_x(state.u, grid)


def F_lambda(E: float, lam: float, epsilon: float) -> float:
    """Lower bound on dE/dt: ``2 lam / (1 - E) - lam - 1/eps``."""
    if E >= 1:
        raise ValueError(f"E must be < 1, got {E!r}")
    return 2 * lam / (1 - E) - lam - 1 / epsilon


def _weight(state: MembraneState, epsilon: float) -> np.ndarray:
    return 1.0 + epsilon**2 * state.ux**2


def check_lemma1(traces: TraceSet, state: MembraneState, grid: TransformedGrid, epsilon: float, tol: float):
    w = _weight(state, epsilon)
    lhs = integrate_x(w * traces.gamma_m**2, grid)
    rhs = 2 * integrate_x(w * traces.gamma_m, grid) - 2
    return CertificateEntry("b5", lhs, rhs, tol, state.t)


def check_lemma2(traces: TraceSet, state: MembraneState, grid: TransformedGrid, epsilon: float, dirichlet: float, tol: float):
    lhs = integrate_x(_weight(state, epsilon) * traces.gamma_m, grid)
    return CertificateEntry("b6", lhs, dirichlet, tol, state.t)


def check_lemma3(dirichlet: float, state: MembraneState, grid: TransformedGrid, tol: float):
    if state.min_gap <= 0:
        raise ValueError("membrane has reached the plate")
    return CertificateEntry("b7", dirichlet, integrate_x(1.0 / state.gap, grid), tol, state.t)


def check_prop4(traces: TraceSet, state: MembraneState, grid: TransformedGrid, epsilon: float, tol: float):
    lhs = integrate_x(_weight(state, epsilon) * traces.gamma_m**2, grid)
    E = energy_E(state, grid)
    return CertificateEntry("b8", lhs, 4 / (1 - E) - 2, tol, state.t)


def check_jensen(state: MembraneState, grid: TransformedGrid, tol: float):
    mean_phi = 0.5 * integrate_x(1.0 / state.gap, grid)
    return CertificateEntry("jensen", mean_phi, 1.0 / (1.0 + 0.5 * integrate_x(state.u, grid)), tol, state.t)


def check_boundary_derivatives(field: PotentialField, traces: TraceSet, state: MembraneState, grid: TransformedGrid, tol: float):
    """Residual forms of the differentiated boundary conditions (tangential and lateral)."""
    top, bottom = tangential_residual(field, state, grid)
    lateral = float(np.max(np.abs(traces.side_pz - 1.0)))
    return [
        CertificateEntry("b3a", -max(top, bottom), 0.0, tol, state.t),
        CertificateEntry("b3b", -lateral, 0.0, tol, state.t),
    ]


def certify_state(
    field: PotentialField,
    state: MembraneState,
    grid: TransformedGrid,
    epsilon: float,
    tol: float,
    traces: Optional[TraceSet] = None,
    dirichlet: Optional[float] = None,
) -> list[CertificateEntry]:
    """All pointwise and integral certificates for one solved state."""
    if traces is None:
        traces = extract_traces(field, state, grid)
    if dirichlet is None:
        dirichlet = dirichlet_energy(field, state, grid, epsilon)
    return [
        *verify_potential_bounds(field, state, grid, traces, tol),
        *check_boundary_derivatives(field, traces, state, grid, tol),
        check_lemma1(traces, state, grid, epsilon, tol),
        check_lemma2(traces, state, grid, epsilon, dirichlet, tol),
        check_lemma3(dirichlet, state, grid, tol),
        check_prop4(traces, state, grid, epsilon, tol),
        check_jensen(state, grid, tol),
    ]


def check_chain_ordering(entries: Sequence[CertificateEntry], tol: float) -> bool:
    """Joint form: lhs(b5) >= 2 D - 2 >= 2 int 1/(1+u) - 2 >= 4/(1-E) - 2, termwise."""
    by = {e.name: e for e in entries}
    lhs = by["b5"].lhs
    two_d = 2 * by["b6"].rhs - 2
    two_phi = 2 * by["b7"].rhs - 2
    jensen = by["b8"].rhs
    return lhs >= two_d - tol and two_d >= two_phi - tol and two_phi >= jensen - tol


def check_energy_ode(
    times: Sequence[float],
    energies: Sequence[float],
    lam: float,
    epsilon: float,
    tol: float,
) -> list[CertificateEntry]:
    """Centered-difference dE/dt >= F_lambda(E) at each interior snapshot.

    The per-entry tolerance is ``tol + 2 dt`` with ``dt`` the larger adjacent step.
    """
    t = np.asarray(times, dtype=float)
    E = np.asarray(energies, dtype=float)
    out = []
    for n in range(1, t.size - 1):
        dEdt = (E[n + 1] - E[n - 1]) / (t[n + 1] - t[n - 1])
        dt = max(t[n + 1] - t[n], t[n] - t[n - 1])
        out.append(CertificateEntry("b10", float(dEdt), F_lambda(float(E[n]), lam, epsilon), tol + 2 * dt, float(t[n])))
    return out


@dataclass(frozen=True)
class BlowupBound:
    t_paper: float
    t_sharp: float


def blowup_time_bound(u0: MembraneState, grid: TransformedGrid, lam: float, epsilon: float) -> Optional[BlowupBound]:
    """Upper bounds on the maximal existence time, or ``None`` when ``lam <= 1/eps``."""
    if epsilon <= 0 or lam <= 1 / epsilon:
        return None
    E0 = energy_E(u0, grid)
    return BlowupBound(
        t_paper=(1 - E0) / F_lambda(0.0, lam, epsilon),
        t_sharp=(1 - E0) / F_lambda(E0, lam, epsilon),
    )


def check_blowup_bound(t_event: float, bound: BlowupBound, tol_time: float) -> CertificateEntry:
    return CertificateEntry("thmC_bound", bound.t_paper, t_event, tol_time, t_event)
