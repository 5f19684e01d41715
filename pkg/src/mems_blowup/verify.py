"""Property suites behind the ``verify`` subcommand."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from .certificates import certify_state
from .core import MembraneState, build_grid, physical_z
from .potential import solve_potential
from .small_gap import pullin_threshold

FLAT_EPSILONS = (0.1, 1.0, 5.0)
CHAIN_DEPTHS = (0.1, 0.3, 0.6)
CHAIN_EPSILONS = (0.1, 1.0, 2.0)
CHAIN_NAMES = ("b1_upper", "b1_lower", "b2", "b3a", "b5", "b6", "b7", "b8")


def mms_solution(epsilon: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """``sin(pi x) sinh(eps pi (1+z))`` solves ``eps^2 psi_xx + psi_zz = 0`` exactly."""
    return lambda x, z: np.sin(np.pi * x) * np.sinh(epsilon * np.pi * (1 + z))


def mms_errors(sizes=(65, 129, 257), epsilon: float = 1.0, depth: float = 0.25, break_stencil: bool = False):
    """Interior max error of the manufactured solution on the fixed domain ``-1 < z < -depth``."""
    exact = mms_solution(epsilon)
    errors = []
    for n in sizes:
        grid = build_grid(n, n)
        state = MembraneState.from_samples(0.0, np.full(n, -depth), grid)
        field = solve_potential(state, epsilon, grid, boundary=exact, break_stencil=break_stencil)
        err = field.phi - exact(grid.x_nodes[:, None], physical_z(grid, state))
        errors.append(float(np.max(np.abs(err[1:-1, 1:-1]))))
    return errors


def flat_slacks(epsilons=FLAT_EPSILONS, nx: int = 257, nz: int = 129) -> dict[str, float]:
    """Largest |slack| of each chain certificate on the flat membrane."""
    grid = build_grid(nx, nz)
    state = MembraneState.from_samples(0.0, np.zeros(nx), grid)
    worst = {k: 0.0 for k in ("b5", "b6", "b7", "b8")}
    for eps in epsilons:
        field = solve_potential(state, eps, grid)
        for e in certify_state(field, state, grid, eps, 0.0):
            if e.name in worst:
                worst[e.name] = max(worst[e.name], abs(e.slack))
    return worst


def lemma_chain(depths=CHAIN_DEPTHS, epsilons=CHAIN_EPSILONS, nx: int = 257, nz: int = 129, cert_factor: float = 50.0):
    """Certificate sets on ``u = -c (1 - x^2)``; returns {(c, eps): entries}."""
    grid = build_grid(nx, nz)
    tol = cert_factor * (grid.h_x**2 + grid.h_eta**2)
    out = {}
    for c in depths:
        state = MembraneState.from_samples(0.0, -c * (1 - grid.x_nodes**2), grid)
        for eps in epsilons:
            field = solve_potential(state, eps, grid)
            out[(c, eps)] = [e for e in certify_state(field, state, grid, eps, tol) if e.name in CHAIN_NAMES]
    return out


def pullin_fixture() -> dict:
    return json.loads(resources.files("mems_blowup").joinpath("fixtures/pullin.json").read_text())


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def run_suites(tol_scale: float = 1.0, break_stencil: bool = False) -> list[SuiteResult]:
    results = []

    errors = mms_errors(break_stencil=break_stencil)
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    ok = all(abs(r - 4) <= 0.5 for r in ratios)
    results.append(SuiteResult("mms", ok, "contraction " + ", ".join(f"{r:.3f}" for r in ratios)))

    worst = flat_slacks()
    bound = 1e-7 * tol_scale
    ok = all(v <= bound for v in worst.values())
    results.append(SuiteResult("flat_saturation", ok, f"max |slack| {max(worst.values()):.2e} (bound {bound:.1e})"))

    sets = lemma_chain(cert_factor=50.0 * tol_scale)
    failed = [(key, e.name) for key, entries in sets.items() for e in entries if not e.passed]
    results.append(SuiteResult("lemma_chain", not failed, f"{len(sets)} sets, {len(failed)} failures"))

    fixture = pullin_fixture()["lambda_star"]
    lam = pullin_threshold(257)
    rel = abs(lam - fixture) / fixture
    results.append(SuiteResult("pullin", rel < 5e-5, f"continuation {lam:.8f} vs oracle {fixture:.8f}"))
    return results
