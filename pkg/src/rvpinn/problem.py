"""Diffusion-advection boundary-value problems on (-1, 1).

    -(eps * u')' + beta * u' = f,    u(-1) = u(1) = 0

with weak forms a(u, v) = (eps*u' - beta*u, v') and l(v) = <f, v>, the
eps-weighted H1 seminorm as energy norm, and the three benchmark problems
(smooth manufactured solution, Dirac point source, boundary layer).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .quadrature import QuadratureRule, integrate

DOMAIN = (-1.0, 1.0)

# sharp Poincare constant of H0^1 on an interval of length 2
POINCARE_CONSTANT = 2.0 / np.pi


class BcMode(str, enum.Enum):
    """How homogeneous Dirichlet conditions are imposed on the network."""

    STRONG = "strong"          # output multiplied by (x+1)(x-1)
    CONSTRAINED = "constrained"  # boundary values penalized in the loss


class NoExactSolutionError(LookupError):
    """Raised when a problem has no registered closed-form solution."""


@dataclass(frozen=True)
class AnalyticSource:
    fn: Callable


@dataclass(frozen=True)
class ConstantSource:
    value: float


@dataclass(frozen=True)
class DiracSource:
    location: float

    def __post_init__(self):
        if not DOMAIN[0] < self.location < DOMAIN[1]:
            raise ValueError("point-source location must be strictly interior")


SourceSpec = Union[AnalyticSource, ConstantSource, DiracSource]


@dataclass(frozen=True)
class Problem:
    epsilon: float
    beta: float
    source: SourceSpec
    bc: BcMode = BcMode.STRONG
    label: Optional[str] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("diffusion coefficient must be positive")


@dataclass(frozen=True)
class ExactSolution:
    u: Callable
    du_dx: Callable
    label: str


def bilinear_a(problem: Problem, u, du, dv):
    """Pointwise integrand of a(., .): (eps*u' - beta*u) * v'."""
    return (problem.epsilon * du - problem.beta * u) * dv


def linear_l(problem: Problem, basis_fn: Callable, rule: Optional[QuadratureRule] = None):
    """Action of the source on a test function.

    Analytic/constant sources are integrated with `rule`; a Dirac source is
    evaluated exactly at its location (quadrature cannot represent it).
    """
    src = problem.source
    if isinstance(src, DiracSource):
        return float(basis_fn(src.location))
    if rule is None:
        raise ValueError("integrable sources need a quadrature rule")
    if isinstance(src, ConstantSource):
        return src.value * integrate(rule, basis_fn)
    return integrate(rule, lambda x: src.fn(x) * basis_fn(x))


def source_values(problem: Problem, x: np.ndarray) -> np.ndarray:
    """Source samples for integrable sources (Dirac has no point values)."""
    src = problem.source
    if isinstance(src, ConstantSource):
        return np.full(np.shape(x), float(src.value))
    if isinstance(src, AnalyticSource):
        return np.asarray(src.fn(np.asarray(x, dtype=float)), dtype=float)
    raise ValueError("a Dirac source has no pointwise values")


def continuity_constant(problem: Problem) -> float:
    """Boundedness constant mu = 1 + C_Omega*|beta|/eps of the weak form."""
    return 1.0 + POINCARE_CONSTANT * abs(problem.beta) / problem.epsilon


def inf_sup_constant(problem: Problem) -> float:
    """Stability constant alpha; the form is coercive in the energy norm."""
    return 1.0


# --- benchmark problems ----------------------------------------------------

def _smooth_u(x):
    return x * np.sin(np.pi * (x + 1.0))


def _smooth_du(x):
    return np.sin(np.pi * (x + 1.0)) + np.pi * x * np.cos(np.pi * (x + 1.0))


def _smooth_d2u(x):
    return 2.0 * np.pi * np.cos(np.pi * (x + 1.0)) - np.pi**2 * x * np.sin(
        np.pi * (x + 1.0)
    )


def manufactured_source(epsilon: float = 1.0) -> AnalyticSource:
    """Forcing that makes x*sin(pi(x+1)) the solution of -eps*u'' = f."""
    return AnalyticSource(lambda x: -epsilon * _smooth_d2u(x))


def smooth_problem(epsilon: float = 1.0, bc: BcMode = BcMode.STRONG) -> Problem:
    return Problem(epsilon, 0.0, manufactured_source(epsilon), bc, label="smooth")


def delta_problem(epsilon: float = 1.0, bc: BcMode = BcMode.STRONG) -> Problem:
    return Problem(epsilon, 0.0, DiracSource(0.5), bc, label="delta")


def advection_problem(epsilon: float, bc: BcMode = BcMode.STRONG) -> Problem:
    """Advection-dominated regime: beta = 1, f = 1, boundary layer at x = 1."""
    return Problem(epsilon, 1.0, ConstantSource(1.0), bc, label="advection")


def _delta_u(x, epsilon):
    x = np.asarray(x, dtype=float)
    return np.where(x <= 0.5, (x + 1.0) / (4.0 * epsilon), 3.0 * (1.0 - x) / (4.0 * epsilon))


def _delta_du(x, epsilon):
    x = np.asarray(x, dtype=float)
    return np.where(x <= 0.5, 1.0 / (4.0 * epsilon), -3.0 / (4.0 * epsilon))


def _advection_u(x, epsilon):
    # expm1 form stays finite and cancellation-free as epsilon -> 0
    x = np.asarray(x, dtype=float)
    return 2.0 * np.expm1((x - 1.0) / epsilon) / math.expm1(-2.0 / epsilon) + x - 1.0


def _advection_du(x, epsilon):
    x = np.asarray(x, dtype=float)
    return (2.0 / epsilon) * np.exp((x - 1.0) / epsilon) / math.expm1(-2.0 / epsilon) + 1.0


def exact_solution(problem: Problem) -> ExactSolution:
    """Closed-form solution of a benchmark problem.

    Raises NoExactSolutionError for configurations without one (training is
    still possible; only error reporting is unavailable).
    """
    eps = problem.epsilon
    if problem.label == "smooth" and problem.beta == 0.0:
        return ExactSolution(_smooth_u, _smooth_du, "smooth")
    if problem.label == "delta" and problem.beta == 0.0:
        return ExactSolution(
            lambda x: _delta_u(x, eps), lambda x: _delta_du(x, eps), "delta"
        )
    if problem.label == "advection" and problem.beta == 1.0:
        return ExactSolution(
            lambda x: _advection_u(x, eps), lambda x: _advection_du(x, eps), "advection"
        )
    raise NoExactSolutionError(
        f"no exact solution registered for this configuration (label={problem.label!r})"
    )


def has_exact_solution(problem: Problem) -> bool:
    try:
        exact_solution(problem)
        return True
    except NoExactSolutionError:
        return False
