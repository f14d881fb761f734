"""Energy-norm error evaluation, bound checks, and history/solution export.

The energy error |u - u_net| in the eps-weighted H1 seminorm is estimated
with a trapezoid rule (default 10000 nodes) against the exact analytic
derivative. `verify_bounds` summarizes a training history: the fraction of
records where the representative norm stays an error lower bound, the tail
error/estimator ratio, and the log-log correlation between error and
sqrt(loss).

CSV schema (fixed): epoch,loss,sqrt_loss,phi_norm,energy_error,penalty,
lower_bound_ok. Floats are written with 17 significant digits; empty cells
mean "no exact solution available".
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .mlp import MlpParams, network_output
from .problem import NoExactSolutionError, Problem, exact_solution
from .quadrature import trapezoid

HISTORY_COLUMNS = (
    "epoch",
    "loss",
    "sqrt_loss",
    "phi_norm",
    "energy_error",
    "penalty",
    "lower_bound_ok",
)

SOLUTION_COLUMNS = ("x", "u_theta", "u_exact")

# fraction of the most recent records used for the reliability ratio
TAIL_FRACTION = 0.2

HISTORY_JSON_SCHEMA = {
    "type": "object",
    "required": ["records"],
    "properties": {
        "records": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["epoch", "loss", "sqrt_loss", "phi_norm", "penalty"],
                "properties": {
                    "epoch": {"type": "integer", "minimum": 0},
                    "loss": {"type": "number"},
                    "sqrt_loss": {"type": "number"},
                    "phi_norm": {"type": "number"},
                    "energy_error": {"type": ["number", "null"]},
                    "penalty": {"type": "number"},
                    "lower_bound_ok": {"type": ["boolean", "null"]},
                },
                "additionalProperties": False,
            },
        }
    },
    "additionalProperties": False,
}


class EnergyErrorEvaluator:
    """Repeated-error evaluation against a fixed exact-derivative table."""

    def __init__(self, problem: Problem, n_nodes: int = 10000):
        self.problem = problem
        self.rule = trapezoid(n_nodes, -1.0, 1.0)
        exact = exact_solution(problem)  # raises NoExactSolutionError
        self.exact_deriv = np.asarray(exact.du_dx(self.rule.nodes), dtype=float)

    def __call__(self, params: MlpParams, field=None) -> float:
        if field is not None:
            _, deriv = field(self.rule.nodes)
        else:
            deriv = network_output(params, self.rule.nodes, self.problem.bc).dx
        diff = deriv - self.exact_deriv
        return float(
            np.sqrt(self.problem.epsilon * np.dot(self.rule.weights, diff * diff))
        )

    def exact_norm(self) -> float:
        """Energy norm of the exact solution (for relative errors)."""
        d = self.exact_deriv
        return float(np.sqrt(self.problem.epsilon * np.dot(self.rule.weights, d * d)))


def energy_error(params: MlpParams, problem: Problem, n_nodes: int = 10000, field=None) -> float:
    """sqrt(eps * int (u' - u_net')^2) by trapezoid with `n_nodes` nodes."""
    return EnergyErrorEvaluator(problem, n_nodes)(params, field=field)


@dataclass(frozen=True)
class BoundSummary:
    """Observable consequences of the two-sided estimator bounds."""

    n_records: int
    has_error_data: bool
    mu: float
    tol: float
    lower_bound_fraction: Optional[float]  # share of records with phi/mu <= err*(1+tol)
    reliability_ratio: Optional[float]     # max err/phi over the record tail
    correlation: Optional[float]           # Pearson r of log(sqrt(loss)) vs log(err)


def verify_bounds(history: Sequence, mu: float, tol: float = 1e-2) -> BoundSummary:
    """Check the efficiency bound across a history and report reliability.

    The upper-bound constant involves an uncomputable projection constant and
    oscillation term, so reliability is reported as an empirical tail ratio
    rather than asserted.
    """
    records = list(history)
    with_error = [r for r in records if r.energy_error is not None]
    if not with_error:
        return BoundSummary(len(records), False, mu, tol, None, None, None)

    ok = sum(
        1 for r in with_error if r.phi_norm / mu <= r.energy_error * (1.0 + tol)
    )
    fraction = ok / len(with_error)

    tail_start = int(math.floor(len(with_error) * (1.0 - TAIL_FRACTION)))
    tail = with_error[min(tail_start, len(with_error) - 1) :]
    ratios = [r.energy_error / r.phi_norm for r in tail if r.phi_norm > 0.0]
    reliability = max(ratios) if ratios else None

    pairs = [
        (math.log(math.sqrt(r.loss)), math.log(r.energy_error))
        for r in with_error
        if r.loss > 0.0 and r.energy_error > 0.0
    ]
    correlation = None
    if len(pairs) >= 2:
        xs, ys = zip(*pairs)
        if np.std(xs) > 0.0 and np.std(ys) > 0.0:
            correlation = float(np.corrcoef(xs, ys)[0, 1])

    return BoundSummary(
        n_records=len(records),
        has_error_data=True,
        mu=mu,
        tol=tol,
        lower_bound_fraction=fraction,
        reliability_ratio=reliability,
        correlation=correlation,
    )


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _fmt_bool(x: Optional[bool]) -> str:
    if x is None:
        return ""
    return "true" if x else "false"


def _record_row(record) -> list:
    return [
        str(record.epoch),
        _fmt(record.loss),
        _fmt(math.sqrt(max(record.loss, 0.0))),
        _fmt(record.phi_norm),
        _fmt(record.energy_error),
        _fmt(record.penalty),
        _fmt_bool(record.lower_bound_ok),
    ]


def _record_dict(record) -> dict:
    return {
        "epoch": int(record.epoch),
        "loss": float(record.loss),
        "sqrt_loss": math.sqrt(max(record.loss, 0.0)),
        "phi_norm": float(record.phi_norm),
        "energy_error": None if record.energy_error is None else float(record.energy_error),
        "penalty": float(record.penalty),
        "lower_bound_ok": record.lower_bound_ok,
    }


def export_history(history: Sequence, path, format: str = "csv") -> None:
    """Write the training history as CSV or JSON (fixed column schema)."""
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(HISTORY_COLUMNS)
            for record in history:
                writer.writerow(_record_row(record))
    elif format == "json":
        payload = {"records": [_record_dict(r) for r in history]}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown history format {format!r}")


@dataclass(frozen=True)
class HistoryRow:
    """One parsed row of an exported history CSV."""

    epoch: int
    loss: float
    sqrt_loss: float
    phi_norm: float
    energy_error: Optional[float]
    penalty: float
    lower_bound_ok: Optional[bool]


def load_history(path) -> list:
    """Parse a history CSV written by `export_history`."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != HISTORY_COLUMNS:
            raise ValueError(f"unexpected history header {header!r}")
        for raw in reader:
            rows.append(
                HistoryRow(
                    epoch=int(raw[0]),
                    loss=float(raw[1]),
                    sqrt_loss=float(raw[2]),
                    phi_norm=float(raw[3]),
                    energy_error=float(raw[4]) if raw[4] else None,
                    penalty=float(raw[5]),
                    lower_bound_ok={"true": True, "false": False}.get(raw[6]),
                )
            )
    return rows


def export_solution(params: MlpParams, problem: Problem, n_samples: int, path) -> None:
    """Sample the network (and exact solution, if any) on a uniform grid."""
    if n_samples < 2:
        raise ValueError("need at least the two boundary samples")
    xs = np.linspace(-1.0, 1.0, int(n_samples))
    u_net = network_output(params, xs, problem.bc).value
    try:
        exact = exact_solution(problem)
        u_exact = np.asarray(exact.u(xs), dtype=float)
    except NoExactSolutionError:
        u_exact = None
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if u_exact is None:
            writer.writerow(SOLUTION_COLUMNS[:2])
            for x, u in zip(xs, u_net):
                writer.writerow([_fmt(x), _fmt(u)])
        else:
            writer.writerow(SOLUTION_COLUMNS)
            for x, u, ue in zip(xs, u_net, u_exact):
                writer.writerow([_fmt(x), _fmt(u), _fmt(ue)])
