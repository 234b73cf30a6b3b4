"""Multi-symplectic solvers and verification suite for the Serre-Green-Naghdi equations."""

__version__ = "0.1.0"

from .core import DiffOperator, Grid1D, Params, PhysicalState
from .errors import (
    CertificationError,
    ConfigError,
    DryStateError,
    GridMismatchError,
    InstabilityError,
    NewtonDivergenceError,
    SgnError,
    SingularJacobianError,
    SolverBreakdownError,
)
from .integrators import BoxSchemeConfig, TangentPair, box_step, run_simulation
from .structure import (
    ZState,
    build_K,
    build_M,
    grad_S,
    hamiltonian_S,
    hess_S,
    lift,
    project,
)

__all__ = [
    "__version__",
    "BoxSchemeConfig",
    "CertificationError",
    "ConfigError",
    "DiffOperator",
    "DryStateError",
    "Grid1D",
    "GridMismatchError",
    "InstabilityError",
    "NewtonDivergenceError",
    "Params",
    "PhysicalState",
    "SgnError",
    "SingularJacobianError",
    "SolverBreakdownError",
    "TangentPair",
    "ZState",
    "box_step",
    "build_K",
    "build_M",
    "grad_S",
    "hamiltonian_S",
    "hess_S",
    "lift",
    "project",
    "run_simulation",
]
