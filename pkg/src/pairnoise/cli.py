"""Command-line front end: sweep, Monte Carlo, and calibration drivers.

Exit codes: 0 success, 2 configuration/schema error, 3 numerical or model
error, 4 I/O error.  All commands accept --seed and --threads; results
never depend on the thread count, and stdout is deterministic for a fixed
seed (wall-clock runtime goes to stderr).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

from .calibration import fit
from .configio import (
    append_mc_csv,
    load_calibration_job,
    load_mc_config,
    load_sweep_spec,
    read_noise_curve_csv,
)
from .detection import expected_g2, run_experiment
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    EvaluationError,
    IdentifiabilityError,
    InputError,
    ModelViolationError,
    NumericalConsistencyError,
    UndefinedStatisticError,
)
from .junction import POLICY_AVERAGE, POLICY_CENTER
from .sweep import run_sweep

_NUMERICAL_ERRORS = (
    DomainError,
    EvaluationError,
    UndefinedStatisticError,
    NumericalConsistencyError,
    ModelViolationError,
    InputError,
    ConvergenceError,
    IdentifiabilityError,
)


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="config file (INI, unit-suffixed)")
    sub.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    sub.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairnoise",
        description=(
            "Microwave photon-pair emission from an ac-driven tunnel junction: "
            "bias sweeps, a Monte Carlo model of the power-detection chain, "
            "and setup calibration from photo-assisted noise."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sweep = commands.add_parser("sweep", help="sweep (v_dc, v_ac); write CSV and figures")
    _add_common_flags(sweep)
    sweep.add_argument("--out", default=None, help="output CSV path")
    sweep.add_argument("--plot", default=None, help="output figure path (svg/pdf/png)")
    sweep.add_argument(
        "--band-policy",
        choices=(POLICY_CENTER, POLICY_AVERAGE),
        default=None,
        help="evaluate spectra at band centers or as band averages",
    )

    mc = commands.add_parser("mc", help="run the detection-chain Monte Carlo")
    _add_common_flags(mc)
    mc.add_argument("--out", default=None, help="CSV file to append the result row to")
    mc.add_argument(
        "--band-policy",
        choices=(POLICY_CENTER, POLICY_AVERAGE),
        default=None,
        help="band policy for the analytic comparison quantities",
    )

    calibrate = commands.add_parser(
        "calibrate", help="fit gain / amplifier noise / T / attenuation to a noise curve"
    )
    _add_common_flags(calibrate)
    calibrate.add_argument("--data", default=None, help="noise-curve CSV (overrides config)")
    calibrate.add_argument("--out", default=None, help="JSON report path")

    return parser


def _cmd_sweep(args) -> None:
    spec = load_sweep_spec(args.config, band_policy=args.band_policy)
    if args.out:
        spec = dataclasses.replace(spec, out_path=args.out)
    if args.plot:
        spec = dataclasses.replace(spec, plot_path=args.plot)
    if not spec.out_path:
        raise ConfigError("no CSV output path: set [sweep] out = <path> or pass --out")
    rows = run_sweep(spec, threads=args.threads)
    print(f"wrote {len(rows)} rows to {spec.out_path}")
    if spec.plot_path:
        print(f"wrote figure to {spec.plot_path}")


def _cmd_mc(args) -> None:
    cfg = load_mc_config(args.config, seed=args.seed, band_policy=args.band_policy)
    started = time.perf_counter()
    result = run_experiment(cfg, threads=args.threads)
    runtime = time.perf_counter() - started
    predicted = expected_g2(cfg)
    print(f"g2_est_K2 = {result.g2_est:.12g} +- {result.g2_err:.12g}")
    print(f"expected_g2_K2 = {predicted:.12g}")
    print(f"mean_p1_K = {result.mean_p1:.12g}")
    print(f"mean_p2_K = {result.mean_p2:.12g}")
    print(f"n_samples = {result.n_samples_used}")
    # Runtime is the one non-deterministic output; keep stdout reproducible.
    print(f"runtime_s = {runtime:.3f}", file=sys.stderr)
    if args.out:
        append_mc_csv(
            args.out,
            {
                "seed": cfg.seed,
                "n_windows": cfg.n_windows,
                "g2_est_K2": result.g2_est,
                "g2_err_K2": result.g2_err,
                "expected_g2_K2": predicted,
                "mean_p1_K": result.mean_p1,
                "mean_p2_K": result.mean_p2,
                "n_samples": result.n_samples_used,
            },
        )


def _cmd_calibrate(args) -> None:
    job = load_calibration_job(args.config)
    if args.data:
        job = dataclasses.replace(job, data_path=args.data)
    if args.out:
        job = dataclasses.replace(job, report_path=args.out)
    if not job.data_path:
        raise ConfigError("no noise-curve CSV: set [calibrate] data = <path> or pass --data")
    curve = read_noise_curve_csv(job.data_path)
    report = fit(curve, job.resistance, job.f0, job.initial, threads=args.threads)
    model = report.model
    print(f"gain = {model.gain:.12g}")
    print(f"t_amp_K = {model.t_amp:.12g}")
    print(f"t_electron_K = {model.t_electron:.12g}")
    print(f"attenuation = {model.attenuation:.12g}")
    print(f"rms_K = {report.rms:.12g}")
    print(f"converged = {str(report.converged).lower()}")
    for message in report.warnings:
        print(f"warning: {message}")
    if job.report_path:
        payload = {
            "gain": model.gain,
            "t_amp_K": model.t_amp,
            "t_electron_K": model.t_electron,
            "attenuation": model.attenuation,
            "rms_K": report.rms,
            "objective_K2": report.objective,
            "n_points": report.n_points,
            "n_evaluations": report.n_evaluations,
            "best_start": report.best_start,
            "converged": report.converged,
            "start_objectives": list(report.start_objectives),
            "pinned": list(report.pinned),
            "warnings": list(report.warnings),
        }
        with open(job.report_path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2)
            handle.write("\n")
        print(f"wrote report to {job.report_path}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sweep":
            _cmd_sweep(args)
        elif args.command == "mc":
            _cmd_mc(args)
        else:
            _cmd_calibrate(args)
    except ConfigError as exc:  # includes SchemaError
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
