"""Weak-residual vector, representative solve, and loss functionals.

For the test basis {phi_n} the residual vector is

    r_n(theta) = l(phi_n) - int (eps*u' - beta*u) * phi_n'.

The robust loss is the Gram quadratic form r^T G^-1 r (= squared test-norm of
the residual's Riesz representative) plus the boundary penalty; the classical
loss is the plain sum of squares sum_n r_n^2 plus the penalty, kept as the
contrast path for basis-sensitivity experiments. Every quantity is
differentiable with respect to the network parameters when evaluated on a
tape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .autodiff import Var, dot, matvec
from .mlp import MlpParams, boundary_values, network_output
from .problem import BcMode, DiracSource, Problem, source_values
from .quadrature import QuadratureRule
from .testspace import (
    GramFactorization,
    TestSpace,
    basis_tables,
    default_quadrature,
    gram_assemble,
    gram_factorize,
)

# tolerance separating rounding noise from genuine SPD violations in r.G^-1.r
SPD_SLACK = 1e-12


class SpdViolationError(ArithmeticError):
    """The Gram quadratic form came out negative beyond rounding slack."""


@dataclass(frozen=True)
class ResidualAssembly:
    """Residual vector, representative coefficients, and loss bookkeeping."""

    residual: np.ndarray      # r_n = weak residual against basis function n
    riesz_coeffs: np.ndarray  # solution of G * coeffs = residual
    loss: float               # residual . coeffs + penalty
    phi_norm: float           # test norm of the representative, sqrt(r . coeffs)
    penalty: float            # boundary term (zero under strong BCs)


def gram_quadform(fact: GramFactorization, residual):
    """r^T G^-1 r and the representative coefficients.

    Backward pass uses d(r^T G^-1 r)/dr = 2 * coeffs (G is symmetric and
    parameter-independent), so no extra triangular solves are recorded.
    """
    if isinstance(residual, Var):
        coeffs = fact.solve(residual.value)
        value = float(residual.value @ coeffs)

        def backward(g):
            residual._accum((2.0 * g) * coeffs)

        return residual.tape.record(value, backward), coeffs
    coeffs = fact.solve(np.asarray(residual, dtype=float))
    return float(residual @ coeffs), coeffs


def load_vector(problem: Problem, space: TestSpace, rule: QuadratureRule) -> np.ndarray:
    """l(phi_n) for every basis function: quadrature for integrable sources,
    exact point evaluation for a Dirac source."""
    if isinstance(problem.source, DiracSource):
        loc = problem.source.location
        return np.array(
            [float(space.eval(m, loc)[0]) for m in range(1, space.dimension + 1)]
        )
    values, _ = basis_tables(space, rule.nodes)
    f_vals = source_values(problem, rule.nodes)
    return values @ (rule.weights * f_vals)


class LossAssembler:
    """Precomputed tables for repeated loss evaluations on a fixed rule.

    All theta-independent pieces (basis tables, load vector, Gram
    factorization) are built once; `rvpinn` / `classical` then only evaluate
    the network at the quadrature nodes.
    """

    def __init__(
        self,
        problem: Problem,
        space: TestSpace,
        rule: Optional[QuadratureRule] = None,
        fact: Optional[GramFactorization] = None,
    ):
        self.problem = problem
        self.space = space
        self.rule = rule if rule is not None else default_quadrature(space)
        self.fact = (
            fact
            if fact is not None
            else gram_factorize(gram_assemble(space, problem.epsilon))
        )
        if self.fact.dimension != space.dimension:
            raise ValueError("Gram factorization dimension does not match the space")
        _, derivs = basis_tables(space, self.rule.nodes)
        # rows are w_q * phi_n'(x_q); residual integral becomes one matvec
        self.weighted_derivs = derivs * self.rule.weights
        self.load = load_vector(problem, space, self.rule)

    def field_on_nodes(self, params, field: Optional[Callable] = None):
        """(u, u') at the quadrature nodes, from the network or an injected
        oracle field (callable x -> (u, u'))."""
        if field is not None:
            u, du = field(self.rule.nodes)
            return np.asarray(u, dtype=float), np.asarray(du, dtype=float)
        out = network_output(params, self.rule.nodes, self.problem.bc)
        return out.value, out.dx

    def residual(self, params, field: Optional[Callable] = None):
        u, du = self.field_on_nodes(params, field)
        integrand = self.problem.epsilon * du - self.problem.beta * u
        return self.load - matvec(self.weighted_derivs, integrand)

    def penalty(self, params, field: Optional[Callable] = None):
        if self.problem.bc == BcMode.STRONG:
            return 0.0
        if field is not None:
            u, _ = field(np.array([-1.0, 1.0]))
            return float(u[0] ** 2 + u[1] ** 2)
        vals = boundary_values(params)
        return dot(vals, vals)

    def rvpinn(self, params, field: Optional[Callable] = None):
        """(loss, residual, coeffs, quadform, penalty); loss/penalty are tape
        Vars when `params` is a taped view."""
        residual = self.residual(params, field)
        quadform, coeffs = gram_quadform(self.fact, residual)
        penalty = self.penalty(params, field)
        loss = quadform + penalty if not _is_zero(penalty) else quadform
        return loss, residual, coeffs, quadform, penalty

    def classical(self, params, field: Optional[Callable] = None):
        """Basis-dependent sum-of-squares loss (contrast path)."""
        residual = self.residual(params, field)
        sq = dot(residual, residual)
        penalty = self.penalty(params, field)
        return sq + penalty if not _is_zero(penalty) else sq


def _is_zero(x) -> bool:
    return not isinstance(x, Var) and x == 0.0


def _detach(x) -> float:
    return float(x.value) if isinstance(x, Var) else float(x)


def assembly_from_parts(loss, residual, coeffs, quadform, penalty) -> ResidualAssembly:
    quadform_val = _detach(quadform)
    if quadform_val < -SPD_SLACK:
        raise SpdViolationError(
            f"residual quadratic form is {quadform_val}, below the SPD slack"
        )
    res_val = residual.value if isinstance(residual, Var) else residual
    return ResidualAssembly(
        residual=np.asarray(res_val, dtype=float),
        riesz_coeffs=np.asarray(coeffs, dtype=float),
        loss=_detach(loss),
        phi_norm=float(np.sqrt(max(quadform_val, 0.0))),
        penalty=_detach(penalty),
    )


def residual_vector(
    params: MlpParams,
    problem: Problem,
    space: TestSpace,
    rule: Optional[QuadratureRule] = None,
    field: Optional[Callable] = None,
) -> np.ndarray:
    """Weak-residual vector of the current network (or injected field)."""
    assembler = LossAssembler(problem, space, rule, fact=_identity_fact(space))
    return np.asarray(assembler.residual(params, field), dtype=float)


def _identity_fact(space: TestSpace) -> GramFactorization:
    # residual_vector never solves; a unit factorization avoids assembling G
    eye = np.eye(space.dimension)
    return GramFactorization(eye, eye)


def rvpinn_loss(
    params: MlpParams,
    problem: Problem,
    space: TestSpace,
    fact: Optional[GramFactorization] = None,
    rule: Optional[QuadratureRule] = None,
    field: Optional[Callable] = None,
) -> ResidualAssembly:
    """Robust loss r^T G^-1 r + penalty with full diagnostics."""
    assembler = LossAssembler(problem, space, rule, fact)
    return assembly_from_parts(*assembler.rvpinn(params, field))


def classical_vpinn_loss(
    params: MlpParams,
    problem: Problem,
    space: TestSpace,
    rule: Optional[QuadratureRule] = None,
    field: Optional[Callable] = None,
) -> float:
    """Sum-of-squares loss sum_n r_n^2 + penalty (basis-sensitive)."""
    assembler = LossAssembler(problem, space, rule, fact=_identity_fact(space))
    return _detach(assembler.classical(params, field))


def boundary_penalty(params, bc: BcMode) -> float:
    """C(u) = |u(-1)|^2 + |u(1)|^2 under constrained BCs, else zero."""
    if bc == BcMode.STRONG:
        return 0.0
    vals = boundary_values(params)
    return _detach(dot(vals, vals))


def spectral_series_loss(
    params,
    problem: Problem,
    dimension: int,
    rule: Optional[QuadratureRule] = None,
    field: Optional[Callable] = None,
):
    """Robust loss written as the explicit mode-weighted series.

    Tests the residual against the raw sines s_m = sin(m*pi*(x+1)/2) and sums
    4/(eps*pi^2) * r(u, s_m)^2 / m^2 plus the penalty; for the normalized
    spectral space both routes measure the same quantity.
    """
    from .quadrature import trapezoid

    if rule is None:
        rule = trapezoid(4000, -1.0, 1.0)
    modes = np.arange(1, dimension + 1)
    phases = 0.5 * np.pi * modes[:, None] * (rule.nodes[None, :] + 1.0)
    values = np.sin(phases)
    derivs = 0.5 * np.pi * modes[:, None] * np.cos(phases)

    if isinstance(problem.source, DiracSource):
        loc = problem.source.location
        load = np.sin(0.5 * np.pi * modes * (loc + 1.0))
    else:
        load = values @ (rule.weights * source_values(problem, rule.nodes))

    if field is not None:
        u, du = field(rule.nodes)
    else:
        out = network_output(params, rule.nodes, problem.bc)
        u, du = out.value, out.dx
    integrand = problem.epsilon * du - problem.beta * u
    residual = load - matvec(derivs * rule.weights, integrand)
    mode_weights = 4.0 / (problem.epsilon * np.pi**2 * modes.astype(float) ** 2)
    series = dot(residual, mul_weights(residual, mode_weights))

    if problem.bc == BcMode.STRONG:
        return series
    if field is not None:
        u_b, _ = field(np.array([-1.0, 1.0]))
        return series + float(u_b[0] ** 2 + u_b[1] ** 2)
    vals = boundary_values(params)
    return series + dot(vals, vals)


def mul_weights(vec, weights: np.ndarray):
    """Elementwise product with a constant weight vector."""
    if isinstance(vec, Var):
        return vec * weights
    return np.asarray(vec) * weights
