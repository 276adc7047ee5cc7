"""Deterministic desk-scale solver for a kinetic collision model.

Velocity-space quadrature of the non-cutoff Boltzmann collision operator
on a periodic-in-space, boxed-in-velocity lattice, with weighted norms,
level-set energy machinery, an iteration-constants calculator, time
stepping, self-verification cases, and a command-line front end.
"""

from .cli import anisotropic_perturbation, config_reference, load_config, main
from .collision import (
    CollisionResult,
    LinearizedCollision,
    QuadratureSpec,
    assemble_linearized,
    conservative_correction,
    q_apply,
    q_apply_multi,
    weak_moments,
)
from .degiorgi import (
    ComparisonCertificate,
    LadderParams,
    LevelEnergySeries,
    certify_comparison,
    derive_constants,
    empirical_ladder,
    fit_recursion_constant,
    threshold_K0,
    threshold_branches,
)
from .dynamics import (
    DIAG_COLUMNS,
    DiagnosticsRow,
    RunConfig,
    RunResult,
    SimState,
    cutoff_profile,
    l_alpha_apply,
    run,
    step,
)
from .errors import (
    BoltzdvError,
    ConfigError,
    DomainError,
    NumericalError,
    ParameterRejection,
    QuadratureError,
    StepFailure,
    UsageError,
)
from .functionals import (
    EnergySpec,
    LevelSetSpec,
    NormSpec,
    energy_functional,
    level_set,
    norm,
    project_P,
)
from .grid import (
    Field,
    GridSpec,
    checkpoint_load,
    checkpoint_save,
    interpolate,
    make_field,
    make_maxwellian,
    mask_to_ball,
    sobolev_multiplier,
    velocity_weight,
    x_sobolev_multiplier,
)
from .kernel import (
    CollisionPair,
    KernelSpec,
    angular_b,
    cancellation_S,
    cancellation_constant,
    kernel_B,
    post_collision,
)
from .verify import (
    CASE_IDS,
    VerificationReport,
    fit_decay,
    hypoellipticity_bound,
    hypoellipticity_diagnostic,
    verify_identity,
)

__all__ = [
    "BoltzdvError",
    "ConfigError",
    "DomainError",
    "NumericalError",
    "ParameterRejection",
    "QuadratureError",
    "StepFailure",
    "UsageError",
    "Field",
    "GridSpec",
    "checkpoint_load",
    "checkpoint_save",
    "interpolate",
    "make_field",
    "make_maxwellian",
    "mask_to_ball",
    "sobolev_multiplier",
    "velocity_weight",
    "x_sobolev_multiplier",
    "CollisionPair",
    "KernelSpec",
    "angular_b",
    "cancellation_S",
    "cancellation_constant",
    "kernel_B",
    "post_collision",
    "CollisionResult",
    "LinearizedCollision",
    "QuadratureSpec",
    "assemble_linearized",
    "conservative_correction",
    "q_apply",
    "q_apply_multi",
    "weak_moments",
    "EnergySpec",
    "LevelSetSpec",
    "NormSpec",
    "energy_functional",
    "level_set",
    "norm",
    "project_P",
    "ComparisonCertificate",
    "LadderParams",
    "LevelEnergySeries",
    "certify_comparison",
    "derive_constants",
    "empirical_ladder",
    "fit_recursion_constant",
    "threshold_K0",
    "threshold_branches",
    "DIAG_COLUMNS",
    "DiagnosticsRow",
    "RunConfig",
    "RunResult",
    "SimState",
    "cutoff_profile",
    "l_alpha_apply",
    "run",
    "step",
    "CASE_IDS",
    "VerificationReport",
    "fit_decay",
    "hypoellipticity_bound",
    "hypoellipticity_diagnostic",
    "verify_identity",
    "anisotropic_perturbation",
    "config_reference",
    "load_config",
    "main",
]

__version__ = "0.1.0"
