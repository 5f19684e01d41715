"""Grids, state containers and the shared x-direction stencils.

The moving region ``{-1 < z < u(x)}`` is mapped onto the fixed rectangle
``[-1, 1] x [0, 1]`` by ``eta = (1 + z) / (1 + u(x))`` so the membrane is always
the line ``eta = 1`` and the ground plate is ``eta = 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

MIN_NODES = 33


class ConfigError(ValueError):
    """Invalid configuration value; ``key`` names the offending setting."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class InitialProfile:
    """Tagged initial displacement: ``flat``, ``parabolic`` (depth ``c``) or ``table``."""

    kind: str = "flat"
    c: float = 0.0
    table: tuple[tuple[float, float], ...] = ()

    def sample(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "flat":
            return np.zeros_like(x)
        if self.kind == "parabolic":
            return -self.c * (1.0 - x**2)
        if self.kind == "table":
            xs, us = zip(*self.table)
            return np.interp(x, xs, us)
        raise ConfigError("initial_profile", f"unknown profile kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "flat":
            return "flat"
        if self.kind == "parabolic":
            return f"parabolic({self.c!r})"
        return "table(" + ", ".join(f"{a!r}:{b!r}" for a, b in self.table) + ")"


@dataclass(frozen=True)
class SimulationConfig:
    lam: float = 1.0
    epsilon: float = 1.0
    nx: int = 257
    nz: int = 129
    dt_init: float = 1e-4
    t_max: float = 10.0
    delta_touch: float = 1e-3
    grad_max: float = 1e4
    tol_linear: float = 1e-10
    cert_factor: float = 50.0
    initial_profile: InitialProfile = field(default_factory=InitialProfile)
    c_dt: float = 0.1
    dt_min: float = 1e-12
    cert_every: int = 10
    max_cell_slope: float = 0.125
    adaptive: bool = True
    small_gap: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def positive(key, value):
            if not (np.isfinite(value) and value > 0):
                raise ConfigError(key, f"must be positive, got {value!r}")

        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError("lambda", f"must be non-negative, got {self.lam!r}")
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ConfigError("epsilon", f"must be non-negative, got {self.epsilon!r}")
        for key in ("nx", "nz"):
            n = getattr(self, key)
            if n < MIN_NODES or n % 2 == 0:
                raise ConfigError(key, f"must be an odd integer >= {MIN_NODES}, got {n!r}")
        for key in ("dt_init", "t_max", "grad_max", "tol_linear", "cert_factor", "c_dt", "dt_min", "max_cell_slope"):
            positive(key, getattr(self, key))
        if not (0 < self.delta_touch <= 0.1):
            raise ConfigError("delta_touch", f"must lie in (0, 0.1], got {self.delta_touch!r}")
        if self.cert_every < 1:
            raise ConfigError("cert_every", "must be >= 1")

        p = self.initial_profile
        if p.kind == "parabolic" and not (0 <= p.c < 1):
            raise ConfigError("initial_profile", f"parabolic depth must lie in [0, 1), got {p.c!r}")
        if p.kind == "table":
            xs = [a for a, _ in p.table]
            us = [b for _, b in p.table]
            if len(xs) < 2 or xs[0] != -1.0 or xs[-1] != 1.0 or np.any(np.diff(xs) <= 0):
                raise ConfigError("initial_profile", "table abscissae must increase from -1 to 1")
            if us[0] != 0.0 or us[-1] != 0.0:
                raise ConfigError("initial_profile", "table must vanish at x = -1 and x = 1")
            if any(not (-1 < v <= 0) for v in us):
                raise ConfigError("initial_profile", "table values must lie in (-1, 0]")

    @property
    def uses_small_gap(self) -> bool:
        return self.small_gap or self.epsilon == 0

    def resolves(self, state: "MembraneState", grid: "TransformedGrid") -> bool:
        """Certificates are binding only while one cell spans at most ``max_cell_slope`` in u."""
        return grid.h_x * float(np.max(np.abs(state.ux))) <= self.max_cell_slope

    def cert_tolerance(self, grid: "TransformedGrid") -> float:
        return self.cert_factor * (grid.h_x**2 + grid.h_eta**2)


@dataclass(frozen=True)
class TransformedGrid:
    x_nodes: np.ndarray
    eta_nodes: np.ndarray
    h_x: float
    h_eta: float

    @property
    def nx(self) -> int:
        return self.x_nodes.size

    @property
    def nz(self) -> int:
        return self.eta_nodes.size


def build_grid(nx: int, nz: int) -> TransformedGrid:
    for key, n in (("nx", nx), ("nz", nz)):
        if int(n) != n or n < MIN_NODES or n % 2 == 0:
            raise ConfigError(key, f"must be an odd integer >= {MIN_NODES}, got {n!r}")
    h_x = 2.0 / (nx - 1)
    h_eta = 1.0 / (nz - 1)
    x = -1.0 + h_x * np.arange(nx)
    eta = h_eta * np.arange(nz)
    x[-1] = 1.0
    eta[-1] = 1.0
    return TransformedGrid(x, eta, h_x, h_eta)


def _check_length(samples: np.ndarray, grid: TransformedGrid) -> np.ndarray:
    s = np.asarray(samples, dtype=float)
    if s.shape[0] != grid.nx:
        raise ValueError(f"expected {grid.nx} samples along x, got {s.shape[0]}")
    return s


def derivative_x(samples: np.ndarray, grid: TransformedGrid) -> np.ndarray:
    """Second-order d/dx along axis 0: centered inside, 3-point one-sided at x = +-1."""
    s = _check_length(samples, grid)
    h = grid.h_x
    d = np.empty_like(s)
    d[1:-1] = (s[2:] - s[:-2]) / (2 * h)
    d[0] = (-3 * s[0] + 4 * s[1] - s[2]) / (2 * h)
    d[-1] = (3 * s[-1] - 4 * s[-2] + s[-3]) / (2 * h)
    return d


def second_difference_x(samples: np.ndarray, grid: TransformedGrid) -> np.ndarray:
    """Centered second difference at interior nodes; zero at the two end nodes."""
    s = _check_length(samples, grid)
    d = np.zeros_like(s)
    d[1:-1] = (s[2:] - 2 * s[1:-1] + s[:-2]) / grid.h_x**2
    return d


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def integrate_x(samples: np.ndarray, grid: TransformedGrid) -> float:
    s = _check_length(samples, grid)
    return float(trapezoid_weights(grid.nx, grid.h_x) @ s)


@dataclass(frozen=True)
class MembraneState:
    t: float
    u: np.ndarray
    ux: np.ndarray

    @classmethod
    def from_samples(cls, t: float, u: np.ndarray, grid: TransformedGrid) -> "MembraneState":
        u = np.array(u, dtype=float)
        return cls(float(t), u, derivative_x(u, grid))

    @property
    def gap(self) -> np.ndarray:
        return 1.0 + self.u

    @property
    def min_gap(self) -> float:
        return float(np.min(1.0 + self.u))

    def validate(self, tol_zero: float) -> None:
        u = self.u
        if u[0] != 0.0 or u[-1] != 0.0:
            raise InvalidStateError("membrane must be clamped: u(-1) = u(1) = 0")
        if np.min(u) <= -1.0:
            raise InvalidStateError(f"membrane touches the plate: min u = {np.min(u)!r}")
        if np.max(u) > tol_zero:
            raise InvalidStateError(f"membrane above its rest line: max u = {np.max(u)!r}")


def physical_height(x_index: int, eta: float, state: MembraneState) -> float:
    return -1.0 + eta * (1.0 + state.u[x_index])


def physical_z(grid: TransformedGrid, state: MembraneState) -> np.ndarray:
    """z at every reference node, shape (nx, nz)."""
    return -1.0 + np.outer(1.0 + state.u, grid.eta_nodes)


class Breakdown(str, enum.Enum):
    RUNNING = "running"
    TIME_LIMIT = "time_limit"
    TOUCHDOWN = "touchdown"
    GRADIENT_BLOWUP = "gradient_blowup"


@dataclass(frozen=True)
class BreakdownStatus:
    kind: Breakdown
    t_event: float

    @property
    def is_breakdown(self) -> bool:
        return self.kind in (Breakdown.TOUCHDOWN, Breakdown.GRADIENT_BLOWUP)


@dataclass(frozen=True)
class CertificateEntry:
    """One evaluated inequality ``lhs >= rhs``; passes when ``lhs - rhs >= -tol``."""

    name: str
    lhs: float
    rhs: float
    tol: float
    t: float = 0.0
    resolved: bool = True

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return bool(self.slack >= -self.tol)
