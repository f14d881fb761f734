"""Figure rendering for CLI runs (solution, convergence, error-loss).

Headless matplotlib only; each function writes one PNG next to the CSV data.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .mlp import MlpParams, network_output
from .problem import NoExactSolutionError, Problem, exact_solution


def solution_figure(params: MlpParams, problem: Problem, path, n_samples: int = 600):
    """Network approximation against the exact solution (when available)."""
    xs = np.linspace(-1.0, 1.0, n_samples)
    u_net = network_output(params, xs, problem.bc).value
    fig, ax = plt.subplots(figsize=(5, 3.6))
    try:
        exact = exact_solution(problem)
        ax.plot(xs, exact.u(xs), "k-", linewidth=1.2, label="exact")
    except NoExactSolutionError:
        pass
    ax.plot(xs, u_net, "C3--", linewidth=1.4, label="network")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def estimates_figure(history: Sequence, path):
    """sqrt(loss), representative norm, and energy error vs epoch."""
    epochs = [r.epoch for r in history]
    sqrt_loss = [math.sqrt(max(r.loss, 0.0)) for r in history]
    phi = [r.phi_norm for r in history]
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.semilogy(epochs, sqrt_loss, "C0-", label=r"$\sqrt{\mathrm{loss}}$")
    ax.semilogy(epochs, phi, "C1--", label="representative norm")
    errors = [r.energy_error for r in history]
    if any(e is not None for e in errors):
        ax.semilogy(
            epochs,
            [e if e is not None else np.nan for e in errors],
            "k:",
            label="energy error",
        )
    ax.set_xlabel("epoch")
    ax.set_ylabel("estimate")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def error_loss_figure(history: Sequence, path):
    """Energy error against sqrt(loss), with the identity line for reference."""
    pairs = [
        (math.sqrt(r.loss), r.energy_error)
        for r in history
        if r.energy_error is not None and r.loss > 0.0 and r.energy_error > 0.0
    ]
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    if pairs:
        xs, ys = zip(*pairs)
        ax.loglog(xs, ys, "C0.", markersize=4)
        lo, hi = min(min(xs), min(ys)), max(max(xs), max(ys))
        ax.loglog([lo, hi], [lo, hi], "k--", linewidth=0.8, label="identity")
        ax.legend()
    else:
        ax.text(0.5, 0.5, "no exact solution", ha="center", va="center")
    ax.set_xlabel(r"$\sqrt{\mathrm{loss}}$")
    ax.set_ylabel("energy error")
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_run_figures(history: Sequence, params: Optional[MlpParams], problem: Problem, out_dir):
    """Write the three standard run figures into `out_dir`."""
    if params is not None:
        solution_figure(params, problem, out_dir / "solution.png")
    estimates_figure(history, out_dir / "estimates.png")
    error_loss_figure(history, out_dir / "error_loss.png")
