"""Autonomous optimal control: Pontryagin extremals by indirect shooting, with
machine checks of the extremal conditions and of Hamiltonian constancy."""

from .augment import (
    AugmentedProblem,
    LiftedExtremal,
    augment,
    augmented_cost,
    augmented_hamiltonian,
    lift,
    restrict,
    verify_lift,
)
from .backend import BACKEND, available_backends
from .errors import (
    DomainError,
    ExprSyntaxError,
    GridMismatch,
    HorizonTooShort,
    IntegrationFailure,
    NoConvergence,
    PmpError,
    UnboundedHamiltonian,
    UnknownEntry,
    UnknownSymbol,
    VBarOutOfRange,
)
from .expr import Expr, evaluate, grad_x, parse
from .model import (
    BoundarySpec,
    Box,
    ControlProblem,
    Extremal,
    FiniteSet,
    OpenUnitInterval,
    Unconstrained,
    cost,
    dynamics,
    hamiltonian,
    hamiltonian_partials,
    hamiltonian_values,
    validate,
)
from .numerics import IntegratorConfig, ShootingConfig, maximize_hamiltonian, propagate, shoot
from .verify import (
    VerificationReport,
    hamiltonian_constancy,
    maximality_gap,
    residual_adjoint,
    residual_control,
    verify_extremal,
)

__version__ = "0.1.0"
