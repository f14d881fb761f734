"""Configuration-driven command line.

Subcommands:
  train  <config.json>                 run one benchmark, export CSV/JSON/figures
  verify <gram|grad|rescale|consistency>  run a named property suite
  sweep  <config.json> --epsilons ...  repeat training across diffusion values

Exit codes: 0 success, 1 property failure, 2 configuration error,
3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .mlp import DEFAULT_ARCHITECTURE, MlpParams, mlp_init
from .problem import (
    BcMode,
    ConstantSource,
    DiracSource,
    NoExactSolutionError,
    Problem,
    continuity_constant,
    inf_sup_constant,
    manufactured_source,
    exact_solution,
    smooth_problem,
)
from .quadrature import trapezoid
from .report import (
    EnergyErrorEvaluator,
    export_history,
    export_solution,
    verify_bounds,
)
from .residual import LossAssembler, classical_vpinn_loss, rvpinn_loss
from .testspace import (
    FeHatSpace,
    SpectralSineSpace,
    gram_assemble_numeric,
    rescale_basis,
)
from .trainer import TrainConfig, TrainingAbort, train, _loss_with_grad
from . import figures

PROBLEM_KINDS = ("smooth", "delta", "advection")
SPACE_KINDS = ("fe", "spectral")

_PROBLEM_DEFAULTS = {
    "smooth": {"epsilon": 1.0, "beta": 0.0},
    "delta": {"epsilon": 1.0, "beta": 0.0},
    "advection": {"epsilon": 0.1, "beta": 1.0},
}

_TRAIN_FIELDS = (
    "learning_rate",
    "max_epochs",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "seed",
    "record_every",
)


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


@dataclass(frozen=True)
class RunConfig:
    problem_kind: str
    epsilon: float
    beta: float
    space_kind: str
    dimension: int
    bc: BcMode
    architecture: tuple
    train: TrainConfig
    output_dir: str

    def to_dict(self) -> dict:
        """Effective configuration with every default applied (echo format)."""
        return {
            "problem": {
                "kind": self.problem_kind,
                "epsilon": self.epsilon,
                "beta": self.beta,
            },
            "space": {"kind": self.space_kind, "dimension": self.dimension},
            "bc": self.bc.value,
            "network": {"architecture": list(self.architecture)},
            "train": {name: getattr(self.train, name) for name in _TRAIN_FIELDS},
            "output_dir": self.output_dir,
        }

    def build_problem(self) -> Problem:
        if self.problem_kind == "smooth":
            source = manufactured_source(self.epsilon)
        elif self.problem_kind == "delta":
            source = DiracSource(0.5)
        else:
            source = ConstantSource(1.0)
        return Problem(self.epsilon, self.beta, source, self.bc, label=self.problem_kind)

    def build_space(self):
        if self.space_kind == "fe":
            return FeHatSpace(self.dimension)
        return SpectralSineSpace(self.dimension, self.epsilon)


def _expect_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)} in {where}")


def resolve_config(raw: dict) -> RunConfig:
    """Validate a raw config dict and fill in every default."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    _expect_keys(raw, {"problem", "space", "bc", "network", "train", "output_dir"}, "config")

    problem = raw.get("problem", {})
    if not isinstance(problem, dict):
        raise ConfigError("problem: must be an object")
    _expect_keys(problem, {"kind", "epsilon", "beta"}, "problem")
    kind = problem.get("kind", "smooth")
    if kind not in PROBLEM_KINDS:
        raise ConfigError(f"problem.kind: {kind!r} not one of {PROBLEM_KINDS}")
    defaults = _PROBLEM_DEFAULTS[kind]
    epsilon = _as_number(problem.get("epsilon", defaults["epsilon"]), "problem.epsilon")
    beta = _as_number(problem.get("beta", defaults["beta"]), "problem.beta")
    if not epsilon > 0:
        raise ConfigError("problem.epsilon: must be positive")

    space = raw.get("space", {})
    if not isinstance(space, dict):
        raise ConfigError("space: must be an object")
    _expect_keys(space, {"kind", "dimension"}, "space")
    space_kind = space.get("kind", "spectral")
    if space_kind not in SPACE_KINDS:
        raise ConfigError(f"space.kind: {space_kind!r} not one of {SPACE_KINDS}")
    dimension = space.get("dimension", 50)
    if not isinstance(dimension, int) or dimension < 1:
        raise ConfigError("space.dimension: must be a positive integer")

    bc_raw = raw.get("bc", "strong")
    try:
        bc = BcMode(bc_raw)
    except ValueError:
        raise ConfigError(f"bc: {bc_raw!r} not one of ('strong', 'constrained')") from None

    network = raw.get("network", {})
    if not isinstance(network, dict):
        raise ConfigError("network: must be an object")
    _expect_keys(network, {"architecture"}, "network")
    architecture = tuple(network.get("architecture", DEFAULT_ARCHITECTURE))
    if (
        len(architecture) < 2
        or architecture[0] != 1
        or architecture[-1] != 1
        or any(not isinstance(w, int) or w < 1 for w in architecture)
    ):
        raise ConfigError("network.architecture: need integer widths 1, ..., 1")

    train_raw = raw.get("train", {})
    if not isinstance(train_raw, dict):
        raise ConfigError("train: must be an object")
    _expect_keys(train_raw, set(_TRAIN_FIELDS), "train")
    try:
        train_cfg = TrainConfig(**train_raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"train: {err}") from None

    output_dir = raw.get("output_dir", "rvpinn-out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir: must be a non-empty string")

    return RunConfig(
        problem_kind=kind,
        epsilon=float(epsilon),
        beta=float(beta),
        space_kind=space_kind,
        dimension=int(dimension),
        bc=bc,
        architecture=architecture,
        train=train_cfg,
        output_dir=output_dir,
    )


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: must be a number")
    return float(value)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}") from None
    return resolve_config(raw)


def _summary_dict(cfg: RunConfig, result, bounds, error_of, status: str, message: str = "") -> dict:
    final = result.history[-1] if result.history else None
    best_error = None
    rel_error = None
    if error_of is not None and result.params is not None:
        best_error = error_of(result.params)
        norm = error_of.exact_norm()
        rel_error = best_error / norm if norm > 0 else None
    return {
        "status": status,
        "message": message,
        "mu": bounds.mu if bounds else None,
        "alpha": 1.0,
        "final": None
        if final is None
        else {
            "epoch": final.epoch,
            "loss": final.loss,
            "sqrt_loss": math.sqrt(max(final.loss, 0.0)),
            "phi_norm": final.phi_norm,
            "energy_error": final.energy_error,
            "penalty": final.penalty,
        },
        "best": {
            "epoch": result.best_epoch,
            "loss": result.best_loss,
            "energy_error": best_error,
            "relative_energy_error": rel_error,
        },
        "bounds": None
        if bounds is None
        else {
            "lower_bound_fraction": bounds.lower_bound_fraction,
            "reliability_ratio": bounds.reliability_ratio,
            "correlation": bounds.correlation,
            "tol": bounds.tol,
        },
    }


def run_and_export(cfg: RunConfig, out_dir: Path, render_figures: bool = True) -> int:
    """Train per `cfg` and write config echo, CSVs, summary, figures."""
    problem = cfg.build_problem()
    space = cfg.build_space()
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=1)
        fh.write("\n")

    try:
        error_of = EnergyErrorEvaluator(problem)
    except NoExactSolutionError:
        error_of = None

    mu = continuity_constant(problem)
    try:
        result = train(problem, space, cfg.train, architecture=cfg.architecture)
    except TrainingAbort as abort:
        export_history(abort.history, out_dir / "history.csv")
        bounds = verify_bounds(abort.history, mu) if abort.history else None
        summary = {
            "status": "aborted",
            "message": str(abort),
            "epoch": abort.epoch,
            "mu": mu,
            "alpha": inf_sup_constant(problem),
            "bounds": None
            if bounds is None
            else {
                "lower_bound_fraction": bounds.lower_bound_fraction,
                "reliability_ratio": bounds.reliability_ratio,
                "correlation": bounds.correlation,
                "tol": bounds.tol,
            },
        }
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=1)
            fh.write("\n")
        if render_figures and abort.history:
            figures.render_run_figures(abort.history, None, problem, out_dir)
        print(f"aborted: {abort}", file=sys.stderr)
        return 3

    export_history(result.history, out_dir / "history.csv")
    export_solution(result.params, problem, 1001, out_dir / "solution.csv")
    bounds = verify_bounds(result.history, mu)
    summary = _summary_dict(cfg, result, bounds, error_of, "ok")
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    if render_figures:
        figures.render_run_figures(result.history, result.params, problem, out_dir)

    final = result.history[-1]
    line = (
        f"{cfg.problem_kind} eps={cfg.epsilon:g} {cfg.space_kind} M={cfg.dimension} "
        f"{cfg.bc.value}: final loss {final.loss:.3e}"
    )
    if final.energy_error is not None:
        line += f", energy error {final.energy_error:.3e}"
    print(line)
    return 0


def cmd_train(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
        if args.output_dir is not None:
            cfg = replace(cfg, output_dir=str(args.output_dir))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    return run_and_export(cfg, Path(cfg.output_dir), render_figures=not args.no_figures)


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
        if args.output_dir is not None:
            cfg = replace(cfg, output_dir=str(args.output_dir))
        if not args.epsilons:
            raise ConfigError("sweep needs at least one diffusion value")
        if any(not eps > 0 for eps in args.epsilons):
            raise ConfigError("sweep diffusion values must be positive")
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    base_dir = Path(cfg.output_dir)
    rows = []
    for eps in args.epsilons:
        sub = replace(cfg, epsilon=float(eps), output_dir=str(base_dir / f"eps_{eps:g}"))
        code = run_and_export(sub, Path(sub.output_dir), render_figures=not args.no_figures)
        summary = json.loads((Path(sub.output_dir) / "summary.json").read_text())
        status = summary.get("status", "aborted" if code else "ok")
        final = summary.get("final") or {}
        best = summary.get("best") or {}
        bounds = summary.get("bounds") or {}
        rows.append(
            {
                "epsilon": eps,
                "status": status,
                "mu": summary.get("mu"),
                "final_loss": final.get("loss"),
                "final_energy_error": final.get("energy_error"),
                "best_loss": best.get("loss"),
                "best_energy_error": best.get("energy_error"),
                "relative_energy_error": best.get("relative_energy_error"),
                "lower_bound_fraction": bounds.get("lower_bound_fraction"),
                "correlation": bounds.get("correlation"),
            }
        )

    base_dir.mkdir(parents=True, exist_ok=True)
    columns = list(rows[0].keys())
    with open(base_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_sweep_cell(row[col]) for col in columns])
    print(f"sweep complete: {len(rows)} runs, results in {base_dir / 'sweep.csv'}")
    return 0


def _sweep_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool) or isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


# --- verification suites ----------------------------------------------------

def _fd_loss_gradient(assembler, params: MlpParams, step: float = 1e-6) -> np.ndarray:
    """Central finite differences of the robust loss through every parameter."""
    flat = params.flatten()
    grad = np.empty_like(flat)
    for i in range(flat.size):
        up, down = flat.copy(), flat.copy()
        up[i] += step
        down[i] -= step
        loss_up = assembler.rvpinn(MlpParams.from_flat(params.architecture, up))[0]
        loss_down = assembler.rvpinn(MlpParams.from_flat(params.architecture, down))[0]
        grad[i] = (loss_up - loss_down) / (2.0 * step)
    return grad


def _grad_deviation(analytic: np.ndarray, fd: np.ndarray) -> float:
    return float(np.max(np.abs(analytic - fd) / np.maximum(1.0, np.abs(analytic))))


def _suite_gram() -> list:
    checks = []
    rule = trapezoid(4000, -1.0, 1.0)
    for eps in (1.0, 0.1, 0.005):
        space = SpectralSineSpace(50, eps)
        gram = gram_assemble_numeric(space, eps, rule)
        dev = float(np.max(np.abs(gram - np.eye(50))))
        checks.append(
            (f"spectral orthonormality eps={eps:g} max|G-I|={dev:.2e}", dev < 1e-5)
        )
    return checks


def _suite_grad() -> list:
    checks = []
    for bc in (BcMode.STRONG, BcMode.CONSTRAINED):
        problem = smooth_problem(1.0, bc)
        for space in (FeHatSpace(5), SpectralSineSpace(5, 1.0)):
            assembler = LossAssembler(problem, space)
            params = mlp_init((1, 5, 5, 1), seed=7)
            _, analytic = _loss_with_grad(assembler, params)
            fd = _fd_loss_gradient(assembler, params)
            dev = _grad_deviation(analytic, fd)
            name = type(space).__name__
            checks.append(
                (f"loss gradient vs FD {name} {bc.value} max rel dev={dev:.2e}", dev < 1e-4)
            )
    return checks


def _suite_rescale(factor: float = 1e3) -> list:
    checks = []
    problem = smooth_problem(1.0, BcMode.STRONG)
    space = FeHatSpace(10)
    params = mlp_init((1, 8, 8, 1), seed=3)
    index = 4
    scaled = rescale_basis(space, index, factor)

    base = rvpinn_loss(params, problem, space)
    resc = rvpinn_loss(params, problem, scaled)
    drift = abs(resc.loss - base.loss) / abs(base.loss)
    checks.append((f"robust loss drift under rescale = {drift:.2e}", drift < 1e-9))

    term = base.residual[index - 1] ** 2
    term_scaled = resc.residual[index - 1] ** 2
    ratio_dev = abs(term_scaled / term - factor**2) / factor**2
    checks.append(
        (f"classical term scales by c^2 (dev {ratio_dev:.2e})", ratio_dev < 1e-6)
    )

    classical_base = classical_vpinn_loss(params, problem, space)
    classical_scaled = classical_vpinn_loss(params, problem, scaled)
    moved = abs(classical_scaled - classical_base) / classical_base
    checks.append((f"classical loss moves under rescale ({moved:.2e})", moved > 1.0))
    return checks


def _suite_consistency() -> list:
    checks = []
    problem = smooth_problem(1.0, BcMode.STRONG)
    exact = exact_solution(problem)
    field = lambda x: (exact.u(x), exact.du_dx(x))
    for space in (SpectralSineSpace(50, 1.0), FeHatSpace(100)):
        assembly = rvpinn_loss(None, problem, space, field=field)
        res_inf = float(np.max(np.abs(assembly.residual)))
        name = type(space).__name__
        checks.append((f"exact-solution residual {name} |R|inf={res_inf:.2e}", res_inf < 1e-6))
        checks.append((f"exact-solution loss {name} = {assembly.loss:.2e}", assembly.loss < 1e-10))
    return checks


_SUITES = {
    "gram": _suite_gram,
    "grad": _suite_grad,
    "rescale": _suite_rescale,
    "consistency": _suite_consistency,
}


def cmd_verify(args) -> int:
    checks = _SUITES[args.suite]()
    failures = 0
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}: {name}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rvpinn",
        description="Robust variational PINN solver for 1D diffusion-advection problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training configuration")
    p_train.add_argument("config", help="path to a JSON run configuration")
    p_train.add_argument("--output-dir", help="override the config output directory")
    p_train.add_argument("--seed", type=int, help="override the training seed")
    p_train.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p_train.set_defaults(func=cmd_train)

    p_verify = sub.add_parser("verify", help="run a named property suite")
    p_verify.add_argument("suite", choices=sorted(_SUITES))
    p_verify.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="repeat a configuration across epsilons")
    p_sweep.add_argument("config", help="path to a JSON run configuration")
    p_sweep.add_argument(
        "--epsilons", nargs="+", type=float, required=True, help="diffusion coefficients"
    )
    p_sweep.add_argument("--output-dir", help="override the config output directory")
    p_sweep.add_argument("--seed", type=int, help="override the training seed")
    p_sweep.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
