"""Stability analysis and simulation of cyclic negative-feedback systems with diffusion."""

from ._backend import COMPILED
from .errors import (
    ConfigError,
    ConsistencyError,
    ConvergenceError,
    CyclostabError,
    DomainError,
    LyapunovError,
    PreconditionError,
    QuadratureError,
    SimulationError,
    StiffnessError,
    ValidationError,
)
from .lyapunov import (
    LyapunovWeights,
    MonitorReport,
    certify_gains,
    jensen_lower_bound,
    monitor_decrease,
    storage_pde,
    total_V,
)
from .model import (
    CompartmentalSystem,
    ConditionReport,
    GainVector,
    LinearCyclicSystem,
    NonlinearCyclicSystem,
    ScalarFn,
    check_conditions,
    counterexample_system,
    mapk_gains,
    mapk_system,
    sat,
    two_compartment_system,
)
from .ode import (
    OscillationReport,
    compartmental_rhs,
    detect_oscillation,
    lumped_rhs,
    simulate_ode,
)
from .pde import (
    Equilibrium,
    SpatialGrid,
    equilibrium_solve,
    field_norm,
    rhs,
    simulate_pde,
)
from .secant import (
    DiagonalScaling,
    ModalBlock,
    build_A0,
    diagonal_scaling,
    gain_matrix,
    hurwitz,
    modal_matrices,
    normalize,
    pk_norm_bound,
    secant_satisfied,
    secant_threshold,
    solve_lyapunov,
    spectral_norm,
    verify_modal_series,
)
from .trajectory import Trajectory

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
