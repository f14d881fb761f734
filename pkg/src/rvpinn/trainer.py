"""ADAM minimization of the robust residual loss with per-epoch diagnostics.

Full-batch deterministic gradients on fixed quadrature rules: a (seed,
config) pair reproduces the history bit-for-bit. Every epoch records loss and
representative norm; when an exact solution is known, the energy error and
the lower-bound flag are recorded alongside.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .autodiff import Tape
from .mlp import DEFAULT_ARCHITECTURE, MlpParams, TapedMlpParams, mlp_init
from .problem import NoExactSolutionError, Problem, continuity_constant
from .quadrature import QuadratureRule
from .report import EnergyErrorEvaluator
from .residual import LossAssembler, ResidualAssembly, assembly_from_parts
from .testspace import TestSpace

# slack absorbing quadrature error in both sides of the lower-bound check
BOUND_TOLERANCE = 1e-2


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    max_epochs: int = 6000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    record_every: int = 10

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ValueError("ADAM moment decays must lie in [0, 1)")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


@dataclass(frozen=True)
class IterationRecord:
    epoch: int
    loss: float
    phi_norm: float
    penalty: float
    energy_error: Optional[float] = None
    lower_bound_ok: Optional[bool] = None


class TrainingAbort(RuntimeError):
    """Non-finite value hit during training; carries the last-good history."""

    def __init__(self, message: str, epoch: int, history: list, params: MlpParams):
        super().__init__(message)
        self.epoch = epoch
        self.history = history
        self.params = params


@dataclass
class TrainResult:
    history: list
    params: MlpParams        # parameters with the lowest loss seen
    final_params: MlpParams  # parameters after the last epoch
    best_epoch: int
    best_loss: float


def adam_step(
    state: AdamState, params: MlpParams, grad: np.ndarray, cfg: TrainConfig
) -> MlpParams:
    """One bias-corrected ADAM update; mutates `state`, returns new params."""
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient passed to the optimizer")
    theta = params.flatten()
    if grad.shape != theta.shape:
        raise ValueError(f"gradient length {grad.size} != parameter count {theta.size}")
    state.t += 1
    state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * grad
    state.v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * grad * grad
    m_hat = state.m / (1.0 - cfg.adam_beta1**state.t)
    v_hat = state.v / (1.0 - cfg.adam_beta2**state.t)
    theta = theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)
    return MlpParams.from_flat(params.architecture, theta, seed=params.seed)


def _loss_with_grad(assembler: LossAssembler, params: MlpParams):
    """Assembly diagnostics plus the loss gradient at `params`."""
    tape = Tape()
    taped = TapedMlpParams(params, tape)
    loss, residual, coeffs, quadform, penalty = assembler.rvpinn(taped)
    assembly = assembly_from_parts(loss, residual, coeffs, quadform, penalty)
    tape.backward(loss)
    return assembly, taped.grad_flat()


def train(
    problem: Problem,
    space: TestSpace,
    cfg: TrainConfig,
    architecture: Sequence[int] = DEFAULT_ARCHITECTURE,
    rule: Optional[QuadratureRule] = None,
    error_nodes: int = 10000,
) -> TrainResult:
    """Minimize the robust loss for up to `cfg.max_epochs` epochs.

    Records diagnostics every `cfg.record_every` epochs (the final epoch is
    always recorded) and returns the parameters with the lowest loss seen.
    """
    assembler = LossAssembler(problem, space, rule)
    params = mlp_init(architecture, cfg.seed)
    mu = continuity_constant(problem)
    try:
        error_of = EnergyErrorEvaluator(problem, n_nodes=error_nodes)
    except NoExactSolutionError:
        error_of = None

    state = AdamState.zeros(params.n_params)
    history: list[IterationRecord] = []
    best_loss = np.inf
    best_epoch = 0
    best_flat = params.flatten()

    def make_record(epoch: int, assembly: ResidualAssembly, p: MlpParams) -> IterationRecord:
        energy_error = None
        bound_ok = None
        if error_of is not None:
            energy_error = error_of(p)
            bound_ok = bool(
                assembly.phi_norm / mu <= energy_error * (1.0 + BOUND_TOLERANCE)
            )
        return IterationRecord(
            epoch=epoch,
            loss=assembly.loss,
            phi_norm=assembly.phi_norm,
            penalty=assembly.penalty,
            energy_error=energy_error,
            lower_bound_ok=bound_ok,
        )

    for epoch in range(cfg.max_epochs + 1):
        last = epoch == cfg.max_epochs
        try:
            if last:
                assembly = assembly_from_parts(*assembler.rvpinn(params))
                grad = None
            else:
                assembly, grad = _loss_with_grad(assembler, params)
        except FloatingPointError as err:
            raise TrainingAbort(
                f"numerical abort at epoch {epoch}: {err}", epoch, history, params
            ) from err
        if not np.isfinite(assembly.loss):
            raise TrainingAbort(
                f"non-finite loss at epoch {epoch}", epoch, history, params
            )
        if assembly.loss < best_loss:
            best_loss = assembly.loss
            best_epoch = epoch
            best_flat = params.flatten()
        if epoch % cfg.record_every == 0 or last:
            history.append(make_record(epoch, assembly, params))
        if not last:
            params = adam_step(state, params, grad, cfg)

    best_params = MlpParams.from_flat(params.architecture, best_flat, seed=cfg.seed)
    return TrainResult(
        history=history,
        params=best_params,
        final_params=params,
        best_epoch=best_epoch,
        best_loss=float(best_loss),
    )
