"""Command-line front end: preset sweeps, custom models, and QSL reports.

Subcommands::

    noisebound preset <name>    run a built-in gamma sweep, write CSV + figure
    noisebound custom <config>  run a sweep described by a config file
    noisebound qsl <name>       speed-limit report for a preset

Exit codes: 0 all statistical checks passed; 1 a bound/overlap/QSL check
failed; 2 argument or config parse error; 3 noise-condition validation
failure; 4 I/O failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from noisebound import bounds
from noisebound.config import ConfigError, ModelSpec, parse_model_file
from noisebound.ensemble import (
    CheckReport,
    EnsembleConfig,
    EnsembleStats,
    check_bound,
    check_overlap_decay,
    run_ensemble,
)
from noisebound.presets import ExperimentPreset, PRESET_NAMES, get_preset
from noisebound.qcore import StateVector
from noisebound.sde import NoiseConditionError, Schedule, StepperKind

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE_ERROR = 2
EXIT_VALIDATION_ERROR = 3
EXIT_IO_ERROR = 4

DEFAULT_SEED = 0
SEED_ENV_VAR = "NOISEBOUND_SEED"

SWEEP_HEADER = (
    "preset",
    "gamma",
    "f_star",
    "mean_F",
    "stderr_F",
    "mean_re_overlap",
    "stderr_overlap",
    "n_traj",
    "dt",
    "seed",
    "stepper",
)
QSL_HEADER = ("gamma", "mean_bures_angle", "stderr", "t_qsl", "T", "satisfied")


def derive_row_seed(base_seed: int, row_index: int) -> int:
    """Per-row master seed, a pure function of (base seed, row index)."""
    seq = np.random.SeedSequence(base_seed, spawn_key=(row_index,))
    return int(seq.generate_state(1, np.uint64)[0])


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path, header, rows) -> None:
    """UTF-8 CSV, 17 significant digits for reals, '\\n' line endings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[col]) for col in header) + "\n")


@dataclass
class SweepRow:
    """One (gamma, channel layout) ensemble run with its checks."""

    label: str
    gamma: float
    seed: int
    stats: EnsembleStats
    bound_check: CheckReport
    overlap_check: CheckReport
    f_star_reported: float
    f_star_profile: tuple

    @property
    def passed(self) -> bool:
        return self.bound_check.passed and self.overlap_check.passed

    def csv_row(self) -> dict:
        return {
            "preset": self.label,
            "gamma": self.gamma,
            "f_star": self.f_star_reported,
            "mean_F": float(self.stats.mean_fidelity[-1]),
            "stderr_F": float(self.stats.stderr_fidelity[-1]),
            "mean_re_overlap": float(self.stats.mean_re_overlap[-1]),
            "stderr_overlap": float(self.stats.stderr_re_overlap[-1]),
            "n_traj": self.stats.n_traj,
            "dt": self.stats.dt,
            "seed": self.seed,
            "stepper": self.stats.stepper.value,
        }


def run_sweep_point(
    h: Schedule,
    s0: StateVector,
    T: float,
    channels,
    label: str,
    gamma: float,
    cfg: EnsembleConfig,
    check_sigmas: float,
) -> SweepRow:
    """One ensemble run plus its bound and overlap checks.

    The bound check uses the strict profile exp(-sum_j int gamma_j^2) at
    every snapshot.  The CSV reports the conservative squared-overlap form
    exp(-2 sum_j int gamma_j^2) as f_star; the data dominates both.
    """
    stats = run_ensemble(h, channels, s0, T, cfg)
    strengths = [ch.strength for ch in channels]
    profile = bounds.fidelity_lower_bound_profile(strengths, stats.times)
    return SweepRow(
        label=label,
        gamma=gamma,
        seed=cfg.master_seed,
        stats=stats,
        bound_check=check_bound(stats, profile, check_sigmas),
        overlap_check=check_overlap_decay(stats, channels, check_sigmas),
        f_star_reported=math.exp(-2.0 * profile[-1].integral_gamma_sq),
        f_star_profile=tuple(rep.f_star for rep in profile),
    )


def estimate_crossing(gammas, first, second):
    """Linearly interpolated gamma where ``first`` drops below ``second``.

    Scans for the last sign change of the difference, which suppresses
    spurious flips from Monte Carlo noise near gamma = 0 where the two
    series coincide.  Returns None when the curves never cross.
    """
    diff = np.asarray(first) - np.asarray(second)
    crossing = None
    for i in range(len(diff) - 1):
        if diff[i] > 0.0 >= diff[i + 1]:
            frac = diff[i] / (diff[i] - diff[i + 1])
            crossing = float(gammas[i] + frac * (gammas[i + 1] - gammas[i]))
    return crossing


@dataclass
class SweepResult:
    rows: list
    crossing: float | None
    passed: bool
    csv_path: Path
    figure_path: Path | None
    elapsed_seconds: float


def _figure_path(out_path: Path) -> Path:
    return out_path.with_suffix(".png")


def run_preset(
    preset: ExperimentPreset,
    out_path,
    check_sigmas: float = 3.0,
    make_figure: bool = True,
    echo=print,
) -> SweepResult:
    """Run a preset sweep, write its CSV (and figure), print a summary."""
    t_start = time.perf_counter()
    out_path = Path(out_path)
    h = preset.hamiltonian_schedule()
    s0 = preset.initial()
    T = preset.duration()
    echo(
        f"preset {preset.name}: u={preset.u:g}, T={T:.6g}, n_traj={preset.n_traj}, "
        f"dt={preset.step_size():.3e}, stepper={preset.stepper.value}, seed={preset.seed}"
    )
    sweep_rows = []
    mean_by_variant = {label: [] for label, _ in preset.variants}
    row_index = 0
    for gamma in preset.gamma_grid:
        for variant_label, _ in preset.variants:
            channels = preset.channels(gamma, variant_label)
            cfg = EnsembleConfig(
                n_traj=preset.n_traj,
                dt=preset.step_size(),
                master_seed=derive_row_seed(preset.seed, row_index),
                stepper=preset.stepper,
            )
            row = run_sweep_point(
                h, s0, T, channels, preset.row_label(variant_label), gamma, cfg, check_sigmas
            )
            sweep_rows.append(row)
            mean_by_variant[variant_label].append(float(row.stats.mean_fidelity[-1]))
            echo(
                f"  {row.label:<14s} gamma={gamma:<5.3g} F*={row.f_star_reported:.6f} "
                f"mean_F={row.stats.mean_fidelity[-1]:.5f}+-{row.stats.stderr_fidelity[-1]:.5f} "
                f"bound={'pass' if row.bound_check.passed else 'FAIL'} "
                f"overlap={'pass' if row.overlap_check.passed else 'FAIL'}"
            )
            row_index += 1

    crossing = None
    if len(preset.variants) == 2:
        labels = [label for label, _ in preset.variants]
        crossing = estimate_crossing(
            preset.gamma_grid, mean_by_variant[labels[0]], mean_by_variant[labels[1]]
        )
        if crossing is None:
            echo(f"  no {labels[0]}/{labels[1]} crossing found on this gamma grid")
        else:
            echo(f"  estimated {labels[0]}/{labels[1]} crossing: gamma = {crossing:.4f}")

    passed = all(r.passed for r in sweep_rows)
    csv_rows = [r.csv_row() for r in sweep_rows]
    write_csv(out_path, SWEEP_HEADER, csv_rows)
    echo(f"wrote {out_path}")
    figure_path = None
    if make_figure:
        from noisebound import plotting

        figure_path = _figure_path(out_path)
        plotting.render_sweep_figure(
            csv_rows, figure_path, title=f"{preset.name} sweep", crossing=crossing
        )
        echo(f"wrote {figure_path}")
    echo("all checks passed" if passed else "SOME CHECKS FAILED")
    return SweepResult(
        rows=sweep_rows,
        crossing=crossing,
        passed=passed,
        csv_path=out_path,
        figure_path=figure_path,
        elapsed_seconds=time.perf_counter() - t_start,
    )


def run_custom(
    model: ModelSpec,
    out_path,
    base_seed: int,
    check_sigmas: float = 3.0,
    make_figure: bool = True,
    echo=print,
) -> SweepResult:
    """Run the sweep described by a parsed config file."""
    t_start = time.perf_counter()
    out_path = Path(out_path)
    h = model.hamiltonian_schedule()
    T = model.duration
    echo(
        f"custom model {model.label!r}: dim={model.dim}, T={T:.6g}, n_traj={model.n_traj}, "
        f"dt={model.dt:.3e}, stepper={model.stepper.value}, seed={base_seed}"
    )
    sweep_rows = []
    for row_index, gamma in enumerate(model.gammas):
        channels = model.channels(gamma)
        cfg = EnsembleConfig(
            n_traj=model.n_traj,
            dt=model.dt,
            master_seed=derive_row_seed(base_seed, row_index),
            stepper=model.stepper,
        )
        row = run_sweep_point(h, model.initial, T, channels, model.label, gamma, cfg, check_sigmas)
        sweep_rows.append(row)
        echo(
            f"  gamma={gamma:<5.3g} F*={row.f_star_reported:.6f} "
            f"mean_F={row.stats.mean_fidelity[-1]:.5f}+-{row.stats.stderr_fidelity[-1]:.5f} "
            f"bound={'pass' if row.bound_check.passed else 'FAIL'} "
            f"overlap={'pass' if row.overlap_check.passed else 'FAIL'}"
        )
    passed = all(r.passed for r in sweep_rows)
    csv_rows = [r.csv_row() for r in sweep_rows]
    write_csv(out_path, SWEEP_HEADER, csv_rows)
    echo(f"wrote {out_path}")
    figure_path = None
    if make_figure:
        from noisebound import plotting

        figure_path = _figure_path(out_path)
        plotting.render_sweep_figure(csv_rows, figure_path, title=f"{model.label} sweep")
        echo(f"wrote {figure_path}")
    echo("all checks passed" if passed else "SOME CHECKS FAILED")
    return SweepResult(
        rows=sweep_rows,
        crossing=None,
        passed=passed,
        csv_path=out_path,
        figure_path=figure_path,
        elapsed_seconds=time.perf_counter() - t_start,
    )


@dataclass
class QslResult:
    rows: list
    passed: bool
    csv_path: Path
    figure_path: Path | None


def run_qsl_report(
    preset: ExperimentPreset,
    out_path,
    make_figure: bool = True,
    echo=print,
) -> QslResult:
    """Estimate E[L(T)] per gamma by ensemble and report the speed limit.

    For a two-variant preset the report holds one row per variant per gamma,
    in variant order.
    """
    out_path = Path(out_path)
    h = preset.hamiltonian_schedule()
    s0 = preset.initial()
    T = preset.duration()
    echo(
        f"qsl report for {preset.name}: u={preset.u:g}, T={T:.6g}, n_traj={preset.n_traj}, "
        f"seed={preset.seed}"
    )
    csv_rows = []
    row_index = 0
    for gamma in preset.gamma_grid:
        for variant_label, _ in preset.variants:
            channels = preset.channels(gamma, variant_label)
            cfg = EnsembleConfig(
                n_traj=preset.n_traj,
                dt=preset.step_size(),
                master_seed=derive_row_seed(preset.seed, row_index),
                stepper=preset.stepper,
            )
            stats = run_ensemble(h, channels, s0, T, cfg)
            report = bounds.qsl_time(
                h, channels, s0, float(stats.mean_bures_angle[-1]), n_grid=1001
            )
            satisfied = T + 1e-12 >= report.t_qsl
            csv_rows.append(
                {
                    "gamma": gamma,
                    "mean_bures_angle": report.mean_bures_angle,
                    "stderr": float(stats.stderr_bures_angle[-1]),
                    "t_qsl": report.t_qsl,
                    "T": T,
                    "satisfied": satisfied,
                }
            )
            echo(
                f"  gamma={gamma:<5.3g} E[L]={report.mean_bures_angle:.5f} "
                f"t_qsl={report.t_qsl:.5f} T={T:.5f} "
                f"{'satisfied' if satisfied else 'VIOLATED'}"
            )
            row_index += 1
    passed = all(r["satisfied"] for r in csv_rows)
    write_csv(out_path, QSL_HEADER, csv_rows)
    echo(f"wrote {out_path}")
    figure_path = None
    if make_figure:
        from noisebound import plotting

        figure_path = _figure_path(out_path)
        plotting.render_qsl_figure(
            csv_rows, figure_path, title=f"{preset.name} speed limit", control_time=T
        )
        echo(f"wrote {figure_path}")
    echo("speed limit satisfied on every row" if passed else "SPEED LIMIT VIOLATED")
    return QslResult(rows=csv_rows, passed=passed, csv_path=out_path, figure_path=figure_path)


def _parse_gammas(text: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad gamma list {text!r}") from None


def _resolve_seed(flag_value) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"bad {SEED_ENV_VAR} value {env!r}: {exc}") from None
    return DEFAULT_SEED


def _add_common_flags(sub):
    sub.add_argument("--gammas", type=_parse_gammas, default=None, help="sweep grid, e.g. 0.1,0.2,0.5")
    sub.add_argument("--n-traj", type=int, default=None, help="trajectories per gamma")
    sub.add_argument("--dt", type=float, default=None, help="integration step (default T/2000)")
    sub.add_argument("--seed", type=int, default=None, help=f"base seed (default ${SEED_ENV_VAR} or {DEFAULT_SEED})")
    sub.add_argument("--stepper", choices=[k.value for k in StepperKind], default=None)
    sub.add_argument("--out", type=Path, default=None, help="output CSV path")
    sub.add_argument("--u", type=float, default=None, help="control amplitude (default 1)")
    sub.add_argument("--threads", type=int, default=None, help="compute threads (default: all cores)")
    sub.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    # A sweep makes ~10^3 simultaneous snapshot comparisons; gating each at
    # 3 sigma would flag an expected ~3 pure-chance exceedances per run, so
    # the pass/fail gate defaults to 4 sigma (real defects show up at 10+).
    sub.add_argument(
        "--check-sigmas",
        type=float,
        default=4.0,
        help="pass/fail gate in standard errors (default 4)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisebound",
        description="Stochastic-noise fidelity bounds: simulate, verify, report.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    p_preset = subs.add_parser("preset", help="run a built-in experiment sweep")
    p_preset.add_argument("name", choices=PRESET_NAMES)
    _add_common_flags(p_preset)
    p_custom = subs.add_parser("custom", help="run a sweep from a config file")
    p_custom.add_argument("config", type=Path)
    _add_common_flags(p_custom)
    p_qsl = subs.add_parser("qsl", help="quantum speed limit report for a preset")
    p_qsl.add_argument("name", choices=PRESET_NAMES)
    _add_common_flags(p_qsl)
    return parser


def _apply_threads(threads) -> None:
    if threads is not None:
        import numba

        numba.set_num_threads(threads)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_threads(args.threads)
        if args.command == "preset":
            preset = get_preset(
                args.name,
                gamma_grid=args.gammas,
                u=args.u,
                n_traj=args.n_traj,
                dt=args.dt,
                seed=_resolve_seed(args.seed),
                stepper=None if args.stepper is None else StepperKind(args.stepper),
            )
            out = args.out or Path(f"{args.name}.csv")
            result = run_preset(
                preset, out, check_sigmas=args.check_sigmas, make_figure=not args.no_plot
            )
            return EXIT_OK if result.passed else EXIT_CHECK_FAILED
        if args.command == "custom":
            model = parse_model_file(args.config)
            if args.gammas is not None:
                model.gammas = args.gammas
            if args.n_traj is not None:
                model.n_traj = args.n_traj
            if args.dt is not None:
                model.dt = args.dt
            if args.stepper is not None:
                model.stepper = StepperKind(args.stepper)
            base_seed = args.seed if args.seed is not None else (
                model.seed if model.seed is not None else _resolve_seed(None)
            )
            out = args.out or args.config.with_suffix(".csv")
            result = run_custom(
                model, out, base_seed, check_sigmas=args.check_sigmas,
                make_figure=not args.no_plot,
            )
            return EXIT_OK if result.passed else EXIT_CHECK_FAILED
        preset = get_preset(
            args.name,
            gamma_grid=args.gammas,
            u=args.u,
            n_traj=args.n_traj,
            dt=args.dt,
            seed=_resolve_seed(args.seed),
            stepper=None if args.stepper is None else StepperKind(args.stepper),
        )
        out = args.out or Path(f"{args.name}-qsl.csv")
        result = run_qsl_report(preset, out, make_figure=not args.no_plot)
        return EXIT_OK if result.passed else EXIT_CHECK_FAILED
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE_ERROR
    except NoiseConditionError as exc:
        print(f"noise validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
