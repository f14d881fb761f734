"""Robust variational PINN solver for 1D diffusion-advection problems.

A small tanh network is trained to minimize the Gram-preconditioned weak
residual r^T G^-1 r (plus an optional boundary penalty); the square root of
that quadratic form is the test norm of the residual's Riesz representative
and doubles as a built-in energy-error estimator that is insensitive to the
choice of test basis.
"""

from .autodiff import Dual, Tape, Var
from .mlp import (
    DEFAULT_ARCHITECTURE,
    MlpParams,
    grad_scalar,
    mlp_eval,
    mlp_init,
    network_output,
)
from .problem import (
    AnalyticSource,
    BcMode,
    ConstantSource,
    DiracSource,
    ExactSolution,
    NoExactSolutionError,
    Problem,
    advection_problem,
    bilinear_a,
    continuity_constant,
    delta_problem,
    exact_solution,
    inf_sup_constant,
    linear_l,
    manufactured_source,
    smooth_problem,
)
from .quadrature import QuadratureRule, gauss_legendre, integrate, trapezoid
from .report import (
    BoundSummary,
    EnergyErrorEvaluator,
    energy_error,
    export_history,
    export_solution,
    load_history,
    verify_bounds,
)
from .residual import (
    LossAssembler,
    ResidualAssembly,
    SpdViolationError,
    boundary_penalty,
    classical_vpinn_loss,
    residual_vector,
    rvpinn_loss,
    spectral_series_loss,
)
from .testspace import (
    FeHatSpace,
    GramFactorization,
    GramNotSPDError,
    RescaledSpace,
    SpectralSineSpace,
    basis_eval,
    basis_tables,
    default_quadrature,
    gram_assemble,
    gram_assemble_numeric,
    gram_factorize,
    rescale_basis,
    riesz_solve,
)
from .trainer import (
    AdamState,
    IterationRecord,
    TrainConfig,
    TrainResult,
    TrainingAbort,
    adam_step,
    train,
)

__version__ = "0.1.0"
