"""Discrete test spaces and their Gram machinery.

Two families: interior piecewise-linear hats on a uniform mesh, and sine
modes normalized to be orthonormal in the eps-weighted H1-seminorm inner
product. The Gram matrix in that inner product is assembled once per run and
Cholesky-factorized for the repeated representative solves G * coeffs = r.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import solve_triangular

from .quadrature import QuadratureRule, gauss_legendre, trapezoid


class GramNotSPDError(ValueError):
    """Gram matrix not symmetric positive definite (basis/inner-product bug)."""


@dataclass(frozen=True)
class FeHatSpace:
    """M interior hat functions on M+1 uniform cells of (-1, 1)."""

    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("test space dimension must be >= 1")

    @property
    def h(self) -> float:
        return 2.0 / (self.dimension + 1)

    @property
    def mesh(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.dimension + 2)

    def eval(self, m: int, x):
        """Value and derivative of hat m; derivative is right-continuous at
        mesh nodes (inert in integrals: Gauss nodes avoid mesh nodes)."""
        _check_index(m, self.dimension)
        x = np.asarray(x, dtype=float)
        h = self.h
        center = -1.0 + m * h
        on_left = (x >= center - h) & (x < center)
        on_right = (x >= center) & (x < center + h)
        value = np.where(
            on_left, (x - center + h) / h, np.where(on_right, (center + h - x) / h, 0.0)
        )
        deriv = np.where(on_left, 1.0 / h, np.where(on_right, -1.0 / h, 0.0))
        return value, deriv


@dataclass(frozen=True)
class SpectralSineSpace:
    """First M Dirichlet-Laplacian eigenfunctions sin(m*pi*(x+1)/2),
    normalized by 2/(sqrt(eps)*pi*m) to unit eps-weighted H1-seminorm."""

    dimension: int
    epsilon: float

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("test space dimension must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("normalization needs a positive diffusion coefficient")

    def eval(self, m: int, x):
        _check_index(m, self.dimension)
        x = np.asarray(x, dtype=float)
        scale = 2.0 / (np.sqrt(self.epsilon) * np.pi * m)
        phase = 0.5 * m * np.pi * (x + 1.0)
        value = scale * np.sin(phase)
        deriv = np.cos(phase) / np.sqrt(self.epsilon)
        return value, deriv


@dataclass(frozen=True)
class RescaledSpace:
    """A space with basis function k replaced by factors[k-1] * phi_k.

    Spans the same space; used to probe (in)sensitivity of losses to the
    choice of basis.
    """

    base: "TestSpace"
    factors: np.ndarray

    def __post_init__(self):
        factors = np.asarray(self.factors, dtype=float)
        if factors.shape != (self.base.dimension,):
            raise ValueError("need one scale factor per basis function")
        if np.any(factors == 0.0):
            raise ValueError("scale factors must be nonzero")
        object.__setattr__(self, "factors", factors)

    @property
    def dimension(self) -> int:
        return self.base.dimension

    def eval(self, m: int, x):
        value, deriv = self.base.eval(m, x)
        return self.factors[m - 1] * value, self.factors[m - 1] * deriv


TestSpace = Union[FeHatSpace, SpectralSineSpace, RescaledSpace]


def _check_index(m: int, dimension: int) -> None:
    if not 1 <= m <= dimension:
        raise IndexError(f"basis index {m} outside 1..{dimension}")


def rescale_basis(space: TestSpace, index: int, factor: float) -> RescaledSpace:
    """Space with basis function `index` multiplied by `factor`."""
    _check_index(index, space.dimension)
    factors = np.ones(space.dimension)
    factors[index - 1] = factor
    return RescaledSpace(space, factors)


def basis_eval(space: TestSpace, m: int, x):
    """(value, derivative) of basis function m at x."""
    return space.eval(m, x)


def basis_tables(space: TestSpace, x: np.ndarray):
    """Stacked values and derivatives of all basis functions at the points x.

    Returns two (M, len(x)) arrays.
    """
    x = np.asarray(x, dtype=float)
    values = np.empty((space.dimension, x.size))
    derivs = np.empty((space.dimension, x.size))
    for m in range(1, space.dimension + 1):
        values[m - 1], derivs[m - 1] = space.eval(m, x)
    return values, derivs


def gram_assemble(space: TestSpace, epsilon: float) -> np.ndarray:
    """Gram matrix G_nm = eps * int(phi_m' * phi_n') in closed form.

    FE hats give the tridiagonal (2, -1)-pattern scaled by eps/h; the
    normalized spectral basis is orthonormal, so its Gram is the identity.
    """
    if isinstance(space, FeHatSpace):
        m = space.dimension
        scale = epsilon / space.h
        gram = 2.0 * scale * np.eye(m)
        off = -scale * np.eye(m, k=1)
        return gram + off + off.T
    if isinstance(space, SpectralSineSpace):
        if not np.isclose(space.epsilon, epsilon):
            raise ValueError(
                "spectral basis was normalized for a different diffusion coefficient"
            )
        return np.eye(space.dimension)
    if isinstance(space, RescaledSpace):
        base = gram_assemble(space.base, epsilon)
        return space.factors[:, None] * base * space.factors[None, :]
    raise TypeError(f"unknown test space {type(space).__name__}")


def gram_assemble_numeric(
    space: TestSpace, epsilon: float, rule: QuadratureRule
) -> np.ndarray:
    """Quadrature-assembled Gram matrix; independent check of the closed form."""
    _, derivs = basis_tables(space, rule.nodes)
    return epsilon * (derivs * rule.weights) @ derivs.T


def default_quadrature(space: TestSpace) -> QuadratureRule:
    """The rule a space's integrals are meant to be computed with:
    5-point Gauss per cell for FE hats, 4000-node trapezoid for sines."""
    base = space.base if isinstance(space, RescaledSpace) else space
    if isinstance(base, FeHatSpace):
        return gauss_legendre(5, base.mesh)
    return trapezoid(4000, -1.0, 1.0)


@dataclass(frozen=True)
class GramFactorization:
    """SPD Gram matrix with its lower-triangular Cholesky factor."""

    matrix: np.ndarray
    chol: np.ndarray

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve G * out = rhs by forward + back substitution."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.dimension,):
            raise ValueError(
                f"right-hand side has shape {rhs.shape}, expected ({self.dimension},)"
            )
        half = solve_triangular(self.chol, rhs, lower=True, check_finite=False)
        return solve_triangular(self.chol.T, half, lower=False, check_finite=False)


def gram_factorize(gram: np.ndarray) -> GramFactorization:
    """Cholesky-factorize an SPD Gram matrix (done once: G is theta-free)."""
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError("Gram matrix must be square")
    scale = np.max(np.abs(gram)) or 1.0
    if np.max(np.abs(gram - gram.T)) > 1e-10 * scale:
        raise GramNotSPDError("Gram matrix is not symmetric")
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as err:
        raise GramNotSPDError(f"Gram matrix not SPD: {err}") from err
    return GramFactorization(gram, chol)


def riesz_solve(fact: GramFactorization, residual: np.ndarray) -> np.ndarray:
    """Coefficients of the residual representative: G * coeffs = residual."""
    return fact.solve(residual)
