"""Fully-connected tanh network with exact spatial derivatives.

The network maps a 1-D coordinate to a scalar. Evaluation returns both the
output and its exact x-derivative (dual-number forward pass); gradients with
respect to every weight and bias flow through a reverse-mode tape, including
through the derivative channel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .autodiff import Dual, Tape, Var, dual_linear, dual_tanh, reshape
from .problem import BcMode

DEFAULT_ARCHITECTURE = (1, 25, 25, 25, 25, 1)


@dataclass
class MlpParams:
    """Trainable weights/biases; weight matrices are (n_out, n_in)."""

    layer_weights: list
    layer_biases: list
    architecture: tuple
    seed: int = 0

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.layer_weights) + sum(
            b.size for b in self.layer_biases
        )

    def flatten(self) -> np.ndarray:
        """All parameters as one vector, layer by layer (weights then bias)."""
        parts = []
        for w, b in zip(self.layer_weights, self.layer_biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, architecture: Sequence[int], flat: np.ndarray, seed: int = 0) -> "MlpParams":
        architecture = tuple(architecture)
        _validate_architecture(architecture)
        flat = np.asarray(flat, dtype=float)
        weights, biases = [], []
        pos = 0
        for n_in, n_out in zip(architecture[:-1], architecture[1:]):
            weights.append(flat[pos : pos + n_out * n_in].reshape(n_out, n_in).copy())
            pos += n_out * n_in
            biases.append(flat[pos : pos + n_out].copy())
            pos += n_out
        if pos != flat.size:
            raise ValueError(
                f"flat vector has {flat.size} entries, architecture needs {pos}"
            )
        return cls(weights, biases, architecture, seed)


class TapedMlpParams:
    """Tape-leaf view of MlpParams used inside differentiable pipelines."""

    def __init__(self, params: MlpParams, tape: Tape):
        self.architecture = params.architecture
        self.layer_weights = [tape.leaf(w) for w in params.layer_weights]
        self.layer_biases = [tape.leaf(b) for b in params.layer_biases]

    def grad_flat(self) -> np.ndarray:
        """Accumulated gradient in `MlpParams.flatten` order."""
        parts = []
        for w, b in zip(self.layer_weights, self.layer_biases):
            gw = w.grad if w.grad is not None else np.zeros(w.shape)
            gb = b.grad if b.grad is not None else np.zeros(b.shape)
            parts.append(np.asarray(gw).ravel())
            parts.append(np.asarray(gb).ravel())
        return np.concatenate(parts)


def _validate_architecture(architecture: Sequence[int]) -> None:
    if len(architecture) < 2:
        raise ValueError("architecture needs at least an input and an output width")
    if architecture[0] != 1 or architecture[-1] != 1:
        raise ValueError("architecture must begin and end with width 1")
    if any(int(w) < 1 for w in architecture):
        raise ValueError("all layer widths must be >= 1")


def mlp_init(architecture: Sequence[int] = DEFAULT_ARCHITECTURE, seed: int = 0) -> MlpParams:
    """Glorot-uniform weights, zero biases; deterministic for a given seed."""
    architecture = tuple(int(w) for w in architecture)
    _validate_architecture(architecture)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(architecture[:-1], architecture[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    return MlpParams(weights, biases, architecture, seed)


def network_output(params, x: np.ndarray, bc: BcMode) -> Dual:
    """u and du/dx at the points `x` (constant 1-D array).

    `params` is either MlpParams (plain numpy evaluation) or TapedMlpParams
    (every returned quantity differentiable w.r.t. the parameters). Under
    strong boundary conditions the raw output is multiplied by (x+1)(x-1),
    with the product rule applied to the derivative channel.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.shape[0]
    z = Dual(x.reshape(n, 1), np.ones((n, 1)))
    n_layers = len(params.layer_weights)
    for i, (w, b) in enumerate(zip(params.layer_weights, params.layer_biases)):
        z = dual_linear(z, w, b)
        if i < n_layers - 1:
            z = dual_tanh(z)
    u = Dual(reshape(z.value, (n,)), reshape(z.dx, (n,)))
    if bc == BcMode.STRONG:
        u = u * Dual(x * x - 1.0, 2.0 * x)
    return u


def mlp_eval(params: MlpParams, x, bc: BcMode):
    """Network output and exact spatial derivative at x (scalar or array)."""
    scalar = np.ndim(x) == 0
    out = network_output(params, x, bc)
    if scalar:
        return float(out.value[0]), float(out.dx[0])
    return out.value, out.dx


def grad_scalar(params: MlpParams, scalar_fn: Callable) -> np.ndarray:
    """Gradient of `scalar_fn(taped_params)` with respect to every parameter.

    `scalar_fn` must be built from tape-recorded operations (network
    evaluation, quadrature sums, triangular solves against a fixed
    factorization); it receives a TapedMlpParams and returns a scalar Var.
    """
    tape = Tape()
    taped = TapedMlpParams(params, tape)
    out = scalar_fn(taped)
    if not isinstance(out, Var) or np.ndim(out.value) != 0:
        raise TypeError("scalar_fn must return a scalar tape Var")
    if not np.isfinite(out.value):
        raise FloatingPointError(f"scalar pipeline produced {out.value!r}")
    tape.backward(out)
    grad = taped.grad_flat()
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        raise FloatingPointError(
            f"non-finite gradient at parameter indices {bad[:8].tolist()}"
            + ("..." if bad.size > 8 else "")
        )
    return grad


def boundary_values(params):
    """Raw network values at x = -1 and x = +1 (no strong-BC multiplier)."""
    out = network_output(params, np.array([-1.0, 1.0]), BcMode.CONSTRAINED)
    return out.value
