"""Free-boundary MEMS membrane simulator with inequality certificates."""

from .core import (
    Breakdown,
    BreakdownStatus,
    CertificateEntry,
    ConfigError,
    InitialProfile,
    MembraneState,
    SimulationConfig,
    TransformedGrid,
    build_grid,
    derivative_x,
    integrate_x,
    physical_height,
)
from .certificates import F_lambda, blowup_time_bound, energy_E
from .potential import dirichlet_energy, extract_traces, solve_potential
from .small_gap import compare_models, pullin_threshold, run_small_gap
from .stepper import Trajectory, run_simulation

__version__ = "0.1.0"
