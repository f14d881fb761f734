"""Fixed numerical integration rules.

Composite Gauss-Legendre (per-element, for piecewise-polynomial test
functions) and the composite trapezoid rule (whole-domain, for spectral test
functions and error norms). Node/weight tables for up to five Gauss points
are closed-form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .autodiff import Var, dot

# roots/weights of the Legendre polynomials on [-1, 1]
_GAUSS_TABLE = {
    1: (
        np.array([0.0]),
        np.array([2.0]),
    ),
    2: (
        np.array([-1.0, 1.0]) / np.sqrt(3.0),
        np.array([1.0, 1.0]),
    ),
    3: (
        np.array([-1.0, 0.0, 1.0]) * np.sqrt(3.0 / 5.0),
        np.array([5.0, 8.0, 5.0]) / 9.0,
    ),
    4: (
        np.array(
            [
                -np.sqrt(3.0 / 7.0 + 2.0 / 7.0 * np.sqrt(6.0 / 5.0)),
                -np.sqrt(3.0 / 7.0 - 2.0 / 7.0 * np.sqrt(6.0 / 5.0)),
                np.sqrt(3.0 / 7.0 - 2.0 / 7.0 * np.sqrt(6.0 / 5.0)),
                np.sqrt(3.0 / 7.0 + 2.0 / 7.0 * np.sqrt(6.0 / 5.0)),
            ]
        ),
        np.array(
            [
                (18.0 - np.sqrt(30.0)) / 36.0,
                (18.0 + np.sqrt(30.0)) / 36.0,
                (18.0 + np.sqrt(30.0)) / 36.0,
                (18.0 - np.sqrt(30.0)) / 36.0,
            ]
        ),
    ),
    5: (
        np.array(
            [
                -np.sqrt(5.0 + 2.0 * np.sqrt(10.0 / 7.0)) / 3.0,
                -np.sqrt(5.0 - 2.0 * np.sqrt(10.0 / 7.0)) / 3.0,
                0.0,
                np.sqrt(5.0 - 2.0 * np.sqrt(10.0 / 7.0)) / 3.0,
                np.sqrt(5.0 + 2.0 * np.sqrt(10.0 / 7.0)) / 3.0,
            ]
        ),
        np.array(
            [
                (322.0 - 13.0 * np.sqrt(70.0)) / 900.0,
                (322.0 + 13.0 * np.sqrt(70.0)) / 900.0,
                128.0 / 225.0,
                (322.0 + 13.0 * np.sqrt(70.0)) / 900.0,
                (322.0 - 13.0 * np.sqrt(70.0)) / 900.0,
            ]
        ),
    ),
}


@dataclass(frozen=True)
class QuadratureRule:
    """Point rule: integrate f as sum(weights * f(nodes))."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    @property
    def n_nodes(self) -> int:
        return self.nodes.size


def reference_gauss(points: int):
    """Gauss-Legendre nodes/weights on [-1, 1]."""
    if points < 1:
        raise ValueError("need at least one Gauss point")
    if points in _GAUSS_TABLE:
        return _GAUSS_TABLE[points]
    return np.polynomial.legendre.leggauss(points)


def gauss_legendre(points_per_element: int, mesh: Sequence[float]) -> QuadratureRule:
    """Composite Gauss rule with `points_per_element` nodes on every cell."""
    mesh = np.asarray(mesh, dtype=float)
    if mesh.size < 2:
        raise ValueError("mesh needs at least two nodes")
    if np.any(np.diff(mesh) <= 0):
        raise ValueError("mesh nodes must be strictly increasing")
    ref_x, ref_w = reference_gauss(int(points_per_element))
    lo, hi = mesh[:-1], mesh[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * ref_x[None, :]).ravel()
    weights = (half[:, None] * ref_w[None, :]).ravel()
    return QuadratureRule(nodes, weights, kind="gauss")


def trapezoid(n_nodes: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    """Composite trapezoid rule on uniform nodes including both endpoints."""
    if n_nodes < 2:
        raise ValueError("trapezoid rule needs at least two nodes")
    nodes = np.linspace(a, b, int(n_nodes))
    h = (b - a) / (n_nodes - 1)
    weights = np.full(int(n_nodes), h)
    weights[0] = weights[-1] = 0.5 * h
    return QuadratureRule(nodes, weights, kind="trapezoid")


def integrate(rule: QuadratureRule, integrand: Callable):
    """Weighted sum of `integrand(nodes)`.

    The integrand may return a tape Var, in which case the result is a Var
    (the sum is a recorded linear combination).
    """
    values = integrand(rule.nodes)
    if isinstance(values, Var):
        return dot(rule.weights, values)
    return float(np.dot(rule.weights, np.asarray(values, dtype=float)))
