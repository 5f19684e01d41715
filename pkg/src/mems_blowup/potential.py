"""Electrostatic potential on the mapped rectangle.

With ``a = 1 + u`` and ``L = a'/a`` the anisotropic Laplace equation
``eps^2 psi_xx + psi_zz = 0`` for ``phi(x, eta) = psi(x, -1 + eta a(x))`` reads

    eps^2 [phi_xx - 2 eta L phi_xeta + eta^2 L^2 phi_etaeta
           + eta (2 L^2 - a''/a) phi_eta] + phi_etaeta / a^2 = 0.

Second-order centered stencils are used throughout; the mixed derivative uses
the four-corner cross stencil.  The mixed term makes the matrix a non-M-matrix,
so discrete sign properties are only checked up to a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    CertificateEntry,
    MembraneState,
    TransformedGrid,
    derivative_x,
    physical_z,
    second_difference_x,
    trapezoid_weights,
)

BoundaryData = Callable[[np.ndarray, np.ndarray], np.ndarray]


class NearTouchdownError(ValueError):
    """The gap closed below ``delta_touch``; the mapped problem degenerates."""


class LinearSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet_mask: np.ndarray  # shape (nx, nz)


@dataclass(frozen=True)
class PotentialField:
    phi: np.ndarray  # shape (nx, nz)
    residual_norm: float


@dataclass(frozen=True)
class TraceSet:
    gamma_m: np.ndarray
    gamma_g: np.ndarray
    side_px: np.ndarray  # shape (2, nz): d psi/dx at x = -1 (row 0) and x = +1 (row 1)
    side_pz: np.ndarray  # shape (2, nz)


@dataclass(frozen=True)
class Coefficients:
    """Coefficients of phi_xx, phi_xeta, phi_etaeta, phi_eta at every node, shape (nx, nz)."""

    xx: np.ndarray
    xeta: np.ndarray
    etaeta: np.ndarray
    eta: np.ndarray


def transformed_coefficients(state: MembraneState, epsilon: float, grid: TransformedGrid) -> Coefficients:
    a = state.gap
    L = (state.ux / a)[:, None]
    app_over_a = (second_difference_x(state.u, grid) / a)[:, None]
    eta = grid.eta_nodes[None, :]
    e2 = epsilon**2
    shape = (grid.nx, grid.nz)
    return Coefficients(
        xx=np.full(shape, e2),
        xeta=-2 * e2 * eta * L,
        etaeta=e2 * eta**2 * L**2 + 1.0 / a[:, None] ** 2,
        eta=e2 * eta * (2 * L**2 - app_over_a),
    )


def _boundary_values(state: MembraneState, grid: TransformedGrid, boundary: Optional[BoundaryData]) -> np.ndarray:
    """Dirichlet values on the whole grid (only the boundary ring is used)."""
    if boundary is None:
        vals = np.broadcast_to(grid.eta_nodes, (grid.nx, grid.nz)).copy()
        vals[:, 0] = 0.0
        vals[:, -1] = 1.0
        return vals
    X = np.broadcast_to(grid.x_nodes[:, None], (grid.nx, grid.nz))
    return np.asarray(boundary(X, physical_z(grid, state)), dtype=float)


def assemble_transformed_operator(
    state: MembraneState,
    epsilon: float,
    grid: TransformedGrid,
    *,
    delta_touch: float = 1e-3,
    boundary: Optional[BoundaryData] = None,
    break_stencil: bool = False,
) -> LinearSystem:
    """Assemble the 9-point system over all nodes, with identity rows on the boundary.

    ``boundary(x, z)`` replaces the physical Dirichlet data (used for manufactured
    solutions).  ``break_stencil`` flips the sign of the east x-neighbour weight, an
    inconsistent stencil used as a negative control.
    """
    if state.min_gap < delta_touch:
        raise NearTouchdownError(f"min(1+u) = {state.min_gap:.3e} below delta_touch = {delta_touch:.3e}")
    nx, nz = grid.nx, grid.nz
    coef = transformed_coefficients(state, epsilon, grid)
    hx, he = grid.h_x, grid.h_eta

    idx = np.arange(nx * nz).reshape(nx, nz)
    mask = np.zeros((nx, nz), dtype=bool)
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True

    inner = (slice(1, -1), slice(1, -1))
    cxx = coef.xx[inner] / hx**2
    cee = coef.etaeta[inner] / he**2
    ce = coef.eta[inner] / (2 * he)
    cxe = coef.xeta[inner] / (4 * hx * he)

    # (di, dj, weight) for each stencil point
    stencil = [
        (0, 0, -2 * cxx - 2 * cee),
        (1, 0, -cxx if break_stencil else cxx),
        (-1, 0, cxx),
        (0, 1, cee + ce),
        (0, -1, cee - ce),
        (1, 1, cxe),
        (-1, -1, cxe),
        (1, -1, -cxe),
        (-1, 1, -cxe),
    ]
    centers = idx[inner]
    rows, cols, vals = [], [], []
    for di, dj, w in stencil:
        rows.append(centers.ravel())
        cols.append(idx[1 + di : nx - 1 + di, 1 + dj : nz - 1 + dj].ravel())
        vals.append(np.broadcast_to(w, centers.shape).ravel())
    bidx = idx[mask]
    rows.append(bidx)
    cols.append(bidx)
    vals.append(np.ones(bidx.size))
    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nx * nz, nx * nz)
    )

    rhs = np.zeros((nx, nz))
    rhs[mask] = _boundary_values(state, grid, boundary)[mask]
    return LinearSystem(matrix, rhs.ravel(), mask)


def solve_potential(
    state: MembraneState,
    epsilon: float,
    grid: TransformedGrid,
    *,
    tol_linear: float = 1e-10,
    delta_touch: float = 1e-3,
    boundary: Optional[BoundaryData] = None,
    break_stencil: bool = False,
) -> PotentialField:
    system = assemble_transformed_operator(
        state, epsilon, grid, delta_touch=delta_touch, boundary=boundary, break_stencil=break_stencil
    )
    # row equilibration: interior rows carry 1/h^2 weights, Dirichlet rows are unit
    inv_diag = 1.0 / system.matrix.diagonal()
    A = (sp.diags(inv_diag) @ system.matrix).tocsc()
    b = inv_diag * system.rhs
    sol = spla.spsolve(A, b, permc_spec="MMD_AT_PLUS_A")
    scale = max(np.linalg.norm(b), 1e-300)
    residual = float(np.linalg.norm(A @ sol - b) / scale)
    if not np.all(np.isfinite(sol)) or residual > tol_linear:
        raise LinearSolveError(f"potential solve failed: relative residual {residual:.3e} > {tol_linear:.3e}")
    phi = sol.reshape(grid.nx, grid.nz)
    # pin Dirichlet rows to their data exactly
    phi[system.dirichlet_mask] = system.rhs.reshape(grid.nx, grid.nz)[system.dirichlet_mask]
    return PotentialField(phi, residual)


def _d_eta(phi: np.ndarray, h: float) -> np.ndarray:
    d = np.empty_like(phi)
    d[:, 1:-1] = (phi[:, 2:] - phi[:, :-2]) / (2 * h)
    d[:, 0] = (-3 * phi[:, 0] + 4 * phi[:, 1] - phi[:, 2]) / (2 * h)
    d[:, -1] = (3 * phi[:, -1] - 4 * phi[:, -2] + phi[:, -3]) / (2 * h)
    return d


def physical_gradient(field: PotentialField, state: MembraneState, grid: TransformedGrid):
    """(psi_x, psi_z) at every reference node via the chain rule of the map."""
    phi_x = derivative_x(field.phi, grid)
    phi_eta = _d_eta(field.phi, grid.h_eta)
    a = state.gap[:, None]
    L = (state.ux / state.gap)[:, None]
    eta = grid.eta_nodes[None, :]
    return phi_x - eta * L * phi_eta, phi_eta / a


def extract_traces(field: PotentialField, state: MembraneState, grid: TransformedGrid) -> TraceSet:
    phi = field.phi
    he = grid.h_eta
    a = state.gap
    gamma_m = (3 * phi[:, -1] - 4 * phi[:, -2] + phi[:, -3]) / (2 * he) / a
    gamma_g = (-3 * phi[:, 0] + 4 * phi[:, 1] - phi[:, 2]) / (2 * he) / a

    psi_x, psi_z = physical_gradient(field, state, grid)
    return TraceSet(
        gamma_m=gamma_m,
        gamma_g=gamma_g,
        side_px=np.stack([psi_x[0], psi_x[-1]]),
        side_pz=np.stack([psi_z[0], psi_z[-1]]),
    )


def dirichlet_energy(field: PotentialField, state: MembraneState, grid: TransformedGrid, epsilon: float) -> float:
    """Integral of eps^2 psi_x^2 + psi_z^2 over the physical region (Jacobian 1 + u)."""
    psi_x, psi_z = physical_gradient(field, state, grid)
    integrand = (epsilon**2 * psi_x**2 + psi_z**2) * state.gap[:, None]
    wx = trapezoid_weights(grid.nx, grid.h_x)
    we = trapezoid_weights(grid.nz, grid.h_eta)
    return float(wx @ integrand @ we)


def _extrapolate_top(g: np.ndarray) -> np.ndarray:
    return 3 * g[:, -2] - 3 * g[:, -3] + g[:, -4]


def _extrapolate_bottom(g: np.ndarray) -> np.ndarray:
    return 3 * g[:, 1] - 3 * g[:, 2] + g[:, 3]


def tangential_residual(field: PotentialField, state: MembraneState, grid: TransformedGrid) -> tuple[float, float]:
    """Max residuals of psi_x + u_x psi_z = 0 on the membrane and psi_x = 0 on the plate.

    The boundary gradient is reconstructed by quadratic extrapolation from the
    three adjacent interior rows, so the check does not reduce to the Dirichlet
    data on the boundary row itself.
    """
    psi_x, psi_z = physical_gradient(field, state, grid)
    inner = slice(1, -1)
    top = _extrapolate_top(psi_x) + state.ux * _extrapolate_top(psi_z)
    bottom = _extrapolate_bottom(psi_x)
    return float(np.max(np.abs(top[inner]))), float(np.max(np.abs(bottom[inner])))


def verify_potential_bounds(
    field: PotentialField, state: MembraneState, grid: TransformedGrid, traces: TraceSet, tol: float
) -> list[CertificateEntry]:
    phi = field.phi
    lower = 1.0 + physical_z(grid, state)
    side = np.concatenate([traces.side_px[0], -traces.side_px[1]])
    return [
        CertificateEntry("b1_upper", 1.0, float(np.max(phi)), tol, state.t),
        CertificateEntry("b1_lower", float(np.min(phi - lower)), 0.0, tol, state.t),
        CertificateEntry("b2", 0.0, float(np.max(-side)), tol, state.t),
    ]
