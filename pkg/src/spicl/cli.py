"""Command-line front end: single runs, sparsity sweeps, gain checks.

Exit codes: 0 success, 1 configuration error, 2 divergence, 3 I/O failure.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config
from .controller import check_gains
from .errors import ConfigError, DivergenceError
from .experiment import (DEFAULT_LAMBDA_GRID, classify_sparsity, lambda_sweep,
                         run_scenario)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_IO = 3


def build_parser():
    ap = argparse.ArgumentParser(
        prog="spicl",
        description="Adaptive tracking control with online sparse model recovery")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", type=Path, default=None,
                       help="scenario file (defaults to the bundled demo constants)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=V",
                       help="override one config value (repeatable)")
        if needs_out:
            p.add_argument("--out", type=Path, required=True, help="output directory")
            p.add_argument("--decimate", type=int, default=None,
                           help="write every Nth sample to the series files")
            p.add_argument("--threshold", type=float, default=None,
                           help="nonzero-classification threshold")

    p_run = sub.add_parser("run", help="simulate one scenario")
    common(p_run)

    p_sweep = sub.add_parser("sweep", help="run the scenario once per sparsity level")
    common(p_sweep)
    p_sweep.add_argument("--lambdas", type=str, default=None,
                         help="comma-separated sparsity levels "
                              "(default: the bundled 8-value grid)")
    p_sweep.add_argument("--workers", type=int, default=1,
                         help="parallel runs (results are identical for any count)")

    p_check = sub.add_parser("check", help="report the stability gain conditions")
    common(p_check, needs_out=False)
    return ap


def _build_config(args):
    cfg = load_config(args.config, args.set)
    updates = {}
    if getattr(args, "decimate", None) is not None:
        if args.decimate < 1:
            raise ConfigError("--decimate must be a positive integer")
        updates["decimate"] = args.decimate
    if getattr(args, "threshold", None) is not None:
        if args.threshold <= 0:
            raise ConfigError("--threshold must be positive")
        updates["sparsity_threshold"] = args.threshold
    if updates:
        cfg = replace(cfg, **updates)
        cfg.validate()
    return cfg


def _write_series(path, times, values):
    with open(path, "w", encoding="utf-8") as fh:
        for t, v in zip(times, values):
            fh.write(f"{t:.6f} {v:.12e}\n")


def _write_run_outputs(out_dir, cfg, res):
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_series(out_dir / "tracking_error_norm.dat", res.times, res.e_norm)
    _write_series(out_dir / "parameter_estimation_error_norm.dat",
                  res.times, res.theta_err_norm)
    with open(out_dir / "stack_events.dat", "w", encoding="utf-8") as fh:
        for t, j, l in zip(res.events_t, res.events_slot, res.events_lambda_min):
            fh.write(f"{t:.6f} {int(j)} {l:.12e}\n")
    with open(out_dir / "gain_report.txt", "w", encoding="utf-8") as fh:
        fh.write(res.gain_report.to_text())
    nnz = int(classify_sparsity(res.theta_hat_final, cfg.sparsity_threshold).sum())
    reached = res.t_reach_ybar is not None
    lines = [
        "status = ok",
        f"lambda = {cfg.lam:g}",
        f"rms_e = {res.rms_e:.8g}",
        f"theta_err_final = {res.theta_err_final:.8g}",
        f"nonzeros = {nnz}",
        f"sparsity_threshold = {cfg.sparsity_threshold:g}",
        f"lambda_min_final = {res.lambda_min_final:.8g}",
        f"reached_ybar = {str(reached).lower()}",
        f"t_reach_ybar = {res.t_reach_ybar:.6g}" if reached else "t_reach_ybar = --",
        f"max_theta_hat_norm = {res.max_theta_hat_norm:.8g}",
        f"window_identity_residual_max = {res.lemma1_residual_max:.8g}",
        f"theta_err_p2p_late = {res.theta_err_p2p_late:.8g}",
        f"wall_time_s = {res.wall_time:.3f}",
    ]
    body = "\n".join(lines) + "\n\n[gain report]\n" + res.gain_report.to_text()
    (out_dir / "run_summary.txt").write_text(body, encoding="utf-8")


def lambda_slug(lam):
    """Directory tag for one sparsity level: 0 -> '0', 1e-05 -> '1em05',
    0.005 -> '0p005'."""
    if lam == int(lam):
        text = str(int(lam))
    else:
        text = repr(float(lam))
    return text.replace("e-", "em").replace(".", "p")


def cmd_run(args):
    cfg = _build_config(args)
    res = run_scenario(cfg)
    _write_run_outputs(args.out, cfg, res)
    return EXIT_OK


def cmd_sweep(args):
    cfg = _build_config(args)
    if args.lambdas is not None:
        try:
            grid = [float(v) for v in args.lambdas.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"--lambdas: {exc}") from exc
        if not grid:
            raise ConfigError("--lambdas produced an empty grid")
    else:
        grid = list(DEFAULT_LAMBDA_GRID)
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    report = lambda_sweep(cfg, grid, workers=args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    for lam, res in zip(grid, report.results):
        if res is None:
            continue
        sub = args.out / f"lambda_{lambda_slug(lam)}"
        _write_run_outputs(sub, replace(cfg, lam=lam), res)
    (args.out / "sweep_summary.tsv").write_text(report.table_text(),
                                                encoding="utf-8")
    (args.out / "confusion.txt").write_text(report.confusion_text(),
                                            encoding="utf-8")
    if any(row.status != "ok" for row in report.rows):
        print("warning: at least one sparsity level diverged; see sweep_summary.tsv",
              file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_check(args):
    cfg = load_config(args.config, args.set)
    print(check_gains(cfg).to_text(), end="")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "check": cmd_check}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
