"""Command-line front door for the memory-stepping experiments.

Subcommands: ``run`` (model relaxation problem), ``converge`` (tau-ladder
convergence study), ``kernel-error`` (Prony-vs-analytic error report) and
``compare-baseline`` (compressed vs full-history steppers).  Configuration
comes from defaults, then an optional JSON config file, then flags; the
fully resolved configuration is echoed to ``manifest.json`` in the run
directory and can be fed back as a config file to reproduce the run.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import __version__
from .kernels import (
    BUILTIN_BETAS,
    KernelFormatError,
    StretchedExponential,
    kernel_sup_error,
    load_builtin_prony,
    prony_from_file,
)
from .experiments import (
    AlignmentError,
    ExperimentSpec,
    compare_baseline,
    compute_reference,
    convergence_study,
    error_series,
    run_model_problem,
    write_convergence_csv,
    write_errors_csv,
    write_trajectory_csv,
)
from .operators import ConvergenceError, NotSpdError
from .schemes import AuxiliaryResidualError, SchemeConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DESK_SCALE_GRID_LIMIT = 32  # full-history runs above this are impractically slow


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Fully resolved, flat run configuration (every field has a default)."""

    beta: Optional[str] = "1/2"
    kernel_file: Optional[str] = None
    sigma: float = 0.5
    tau: Optional[float] = None
    steps: Optional[int] = None
    T: float = 4.0
    grid: int = 32
    out: Optional[str] = None
    reference_steps: int = 1000
    deterministic: bool = True
    # Each ladder entry must be divisible by sample_count so the comparison
    # times land on every time grid.
    ladder_steps: tuple[int, ...] = (48, 96, 192, 384)
    sample_count: int = 8
    window_t_min: float = 0.1
    window_t_max: float = 10.0
    window_samples: int = 1000
    cg_tol: float = 1e-10

    def resolved_steps(self) -> int:
        """Step count from ``steps`` or ``tau`` (tau must divide T evenly)."""
        if self.steps is not None:
            if self.steps < 1:
                raise ConfigError(f"steps={self.steps} must be >= 1")
            return self.steps
        if self.tau is None:
            return 400
        n = self.T / self.tau
        if abs(n - round(n)) > 1e-9 * max(n, 1.0) or round(n) < 1:
            raise ConfigError(
                f"tau={self.tau} does not divide T={self.T} into whole steps"
            )
        return int(round(n))

    def validate(self):
        if not 0.0 < self.sigma <= 1.0:
            raise ConfigError(f"sigma={self.sigma} must lie in (0, 1]")
        if self.T <= 0:
            raise ConfigError(f"T={self.T} must be > 0")
        if self.grid < 2:
            raise ConfigError(f"grid={self.grid} must be >= 2")
        if self.tau is not None and self.tau <= 0:
            raise ConfigError(f"tau={self.tau} must be > 0")
        if self.reference_steps < 1:
            raise ConfigError(f"reference_steps={self.reference_steps} must be >= 1")
        self.resolved_steps()

    def kernel(self):
        if self.kernel_file is not None:
            try:
                return prony_from_file(self.kernel_file)
            except OSError as exc:
                raise ConfigError(f"cannot read kernel file: {exc}") from exc
        try:
            return load_builtin_prony(self._beta_value())
        except KeyError as exc:
            raise ConfigError(
                f"beta={self.beta} has no built-in kernel (supported: 3/7, 1/2, "
                "3/5); pass --kernel-file for other kernels"
            ) from exc

    def _beta_value(self) -> float:
        if self.beta is None:
            raise ConfigError("either beta or kernel_file is required")
        text = str(self.beta)
        if text in BUILTIN_BETAS:
            return BUILTIN_BETAS[text]
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"beta={self.beta!r} is not a number") from exc

    def experiment_spec(self) -> ExperimentSpec:
        return ExperimentSpec(
            kernel=self.kernel(),
            grid_n=self.grid,
            final_time=self.T,
            sigma=self.sigma,
            n_steps=self.resolved_steps(),
            n_ref=self.reference_steps,
            sample_count=self.sample_count,
            cg_tol=self.cg_tol,
        )


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def load_config(path) -> dict:
    """Read a JSON config file, unwrapping a manifest's "config" block."""
    with Path(path).open(encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    unknown = set(data) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {sorted(unknown)}")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, overridden by the config file, overridden by flags."""
    values: dict = {}
    if args.config is not None:
        values.update(load_config(args.config))
    for key in _CONFIG_FIELDS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
    if "ladder_steps" in values:
        values["ladder_steps"] = tuple(int(v) for v in values["ladder_steps"])
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def make_run_dir(cfg: RunConfig, command: str) -> Path:
    root = cfg.out or os.environ.get("MEMSTEP_OUT") or "runs"
    run_dir = Path(root) / command
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def write_manifest(cfg: RunConfig, run_dir: Path, started_at: str) -> None:
    payload = {
        "config": dataclasses.asdict(cfg),
        "package_version": __version__,
        "started_at": started_at,
        "finished_at": datetime.now(timezone.utc).isoformat(),
    }
    payload["config"]["ladder_steps"] = list(cfg.ladder_steps)
    with (run_dir / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def cmd_run(cfg: RunConfig) -> int:
    started = datetime.now(timezone.utc).isoformat()
    spec = cfg.experiment_spec()
    traj = run_model_problem(spec)
    run_dir = make_run_dir(cfg, "run")
    write_trajectory_csv(traj, run_dir / "trajectory.csv")
    write_manifest(cfg, run_dir, started)
    print(f"run complete: {spec.n_steps} steps, output in {run_dir}")
    return EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    started = datetime.now(timezone.utc).isoformat()
    if len(cfg.ladder_steps) < 3:
        raise ConfigError(
            f"ladder_steps={list(cfg.ladder_steps)}: a convergence study needs "
            "at least 3 step counts"
        )
    spec = cfg.experiment_spec()
    reference = compute_reference(spec)
    result = convergence_study(spec, cfg.ladder_steps, reference=reference)
    finest = run_model_problem(spec, n_steps=max(cfg.ladder_steps))
    errs = error_series(finest, reference)
    run_dir = make_run_dir(cfg, "converge")
    write_convergence_csv(result, run_dir / "convergence.csv")
    write_errors_csv(errs, run_dir / "errors.csv")
    write_manifest(cfg, run_dir, started)
    print(f"slope eps2 = {result.slope_eps2:.3f}")
    print(f"slope epsinf = {result.slope_epsinf:.3f}")
    print(f"output in {run_dir}")
    return EXIT_OK


def cmd_kernel_error(cfg: RunConfig) -> int:
    started = datetime.now(timezone.utc).isoformat()
    prony = cfg.kernel()
    analytic = StretchedExponential(cfg._beta_value())
    report = kernel_sup_error(
        analytic,
        prony,
        window=(cfg.window_t_min, cfg.window_t_max),
        samples=cfg.window_samples,
    )
    run_dir = make_run_dir(cfg, "kernel-error")
    with (run_dir / "kernel_error.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "error"])
        for t, e in zip(report.times, report.errors):
            writer.writerow([f"{t:.17g}", f"{e:.17g}"])
    write_manifest(cfg, run_dir, started)
    print(f"sup error = {report.sup_error:.6e}")
    print(f"output in {run_dir}")
    return EXIT_OK


def cmd_compare_baseline(cfg: RunConfig) -> int:
    started = datetime.now(timezone.utc).isoformat()
    if cfg.grid > DESK_SCALE_GRID_LIMIT:
        raise ConfigError(
            f"grid={cfg.grid}: the full-history baseline is restricted to "
            f"grids <= {DESK_SCALE_GRID_LIMIT}"
        )
    spec = cfg.experiment_spec()
    rows = compare_baseline(spec, cfg.ladder_steps)
    run_dir = make_run_dir(cfg, "compare-baseline")
    with (run_dir / "baseline.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["tau", "max_diff", "soe_seconds", "history_seconds",
             "soe_fields", "history_fields"]
        )
        for row in rows:
            writer.writerow(
                [f"{row.tau:.17g}", f"{row.max_diff:.17g}",
                 f"{row.soe_seconds:.6f}", f"{row.history_seconds:.6f}",
                 row.soe_fields, row.history_fields]
            )
    write_manifest(cfg, run_dir, started)
    for row in rows:
        print(
            f"tau={row.tau:g}: max diff {row.max_diff:.6e} "
            f"(fields: {row.soe_fields} compressed vs {row.history_fields} history)"
        )
    print(f"output in {run_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memstep",
        description="Memory-term evolution solver via sum-of-exponentials compression",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON config file")
    common.add_argument("--beta", type=str, default=None,
                        help="stretched-exponential exponent (3/7, 1/2 or 3/5)")
    common.add_argument("--kernel-file", dest="kernel_file", type=str, default=None,
                        help="CSV of 'a,b' Prony coefficients")
    common.add_argument("--sigma", type=float, default=None, help="scheme weight in (0, 1]")
    common.add_argument("--tau", type=float, default=None, help="time step (must divide T)")
    common.add_argument("--steps", type=int, default=None, help="number of time steps")
    common.add_argument("--T", type=float, default=None, help="final time")
    common.add_argument("--grid", type=int, default=None, help="cells per direction")
    common.add_argument("--out", type=str, default=None,
                        help="output root (default $MEMSTEP_OUT or ./runs)")
    common.add_argument("--reference-steps", dest="reference_steps", type=int,
                        default=None, help="time steps of the reference run")
    common.add_argument("--deterministic", type=_parse_bool, default=None,
                        metavar="BOOL", help="bitwise-reproducible output mode")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run the model relaxation problem")
    sub.add_parser("converge", parents=[common], help="tau-ladder convergence study")
    sub.add_parser("kernel-error", parents=[common],
                   help="Prony-vs-analytic kernel error report")
    sub.add_parser("compare-baseline", parents=[common],
                   help="compressed stepper vs full-history baseline")
    return parser


_COMMANDS = {
    "run": cmd_run,
    "converge": cmd_converge,
    "kernel-error": cmd_kernel_error,
    "compare-baseline": cmd_compare_baseline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _COMMANDS[args.command](cfg)
    except (ConfigError, KernelFormatError, SchemeConfigError, AlignmentError,
            ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, NotSpdError, AuxiliaryResidualError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
