"""Command-line entry point.

Subcommands::

    airnav simulate      --config FILE [--seed N] [--out DIR] [--run-index K]
    airnav montecarlo    --config FILE [--runs N] [--seed N] [--out DIR]
    airnav observability --config FILE [--window SECONDS] [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness, observability
from .config import load_config, with_overrides
from .exceptions import ConfigParseError, ConfigValidationError, DivergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airnav",
        description="Air-velocity/attitude/altitude observer simulations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one observer simulation")
    sim.add_argument("--config", required=True, help="config file path")
    sim.add_argument("--seed", type=int, default=None,
                     help="override base_seed")
    sim.add_argument("--out", default=".", help="output directory")
    sim.add_argument("--run-index", type=int, default=0,
                     help="Monte Carlo run index to simulate")

    mc = sub.add_parser("montecarlo", help="run the Monte Carlo batch")
    mc.add_argument("--config", required=True)
    mc.add_argument("--runs", type=int, default=None, help="override runs")
    mc.add_argument("--seed", type=int, default=None,
                    help="override base_seed")
    mc.add_argument("--out", default=".")

    obs = sub.add_parser("observability",
                         help="verify the uniform-observability conditions")
    obs.add_argument("--config", required=True)
    obs.add_argument("--window", type=float, default=observability.DEFAULT_WINDOW,
                     help="Gramian window length in seconds")
    obs.add_argument("--out", default=".")
    return parser


def _cmd_simulate(args, config) -> int:
    if args.seed is not None:
        config = with_overrides(config, base_seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics = harness.run_single(config, run_index=args.run_index)
    trace_path = out / f"run_{args.run_index:03d}.csv"
    harness.write_trace_csv(trace_path, metrics)
    print(f"wrote {trace_path}")
    if metrics.diverged:
        print(f"run diverged at t={metrics.divergence_time:g} s",
              file=sys.stderr)
        return EXIT_DIVERGED
    print(f"final err_att={metrics.err_att[-1]:.3e} "
          f"err_v_body={metrics.err_v_body[-1]:.3e} m/s "
          f"err_h={metrics.err_h[-1]:.3e} m")
    return EXIT_OK


def _cmd_montecarlo(args, config) -> int:
    if args.seed is not None:
        config = with_overrides(config, base_seed=args.seed)
    if args.runs is not None:
        config = with_overrides(config, runs=args.runs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary, all_metrics = harness.run_montecarlo(config)
    for metrics in all_metrics:
        harness.write_trace_csv(out / f"run_{metrics.run_index:03d}.csv",
                                metrics)
    harness.write_summary_csv(out / "summary.csv", summary)
    print(f"wrote {summary.runs} run traces and summary.csv to {out}")
    print(f"divergences: {summary.divergence_count}/{summary.runs}")
    for key in ("err_att", "err_v_body"):
        values = summary.final_means[key]
        print(f"final-5s mean {key}: median={_nanmedian(values):.3e} "
              f"max={_nanmax(values):.3e}")
    if summary.divergence_count:
        return EXIT_DIVERGED
    return EXIT_OK


def _nanmedian(values) -> float:
    import numpy as np
    return float(np.nanmedian(values))


def _nanmax(values) -> float:
    import numpy as np
    return float(np.nanmax(values))


def _cmd_observability(args, config) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report, rows = observability.observability_verdict(
        config.trajectory, config.probes, config.mag_ref,
        delta=args.window, duration=config.duration,
    )
    harness.write_observability_csv(out / "observability.csv", rows)
    print(f"{'t_start':>8} {'lam_min_W':>12} {'lam_max_W':>12} "
          f"{'mu_pi':>10} {'mu_api':>10} verdict")
    for row in rows:
        print(f"{row.t_start:8.2f} {row.lam_min:12.4e} {row.lam_max:12.4e} "
              f"{row.mu_pi:10.4e} {row.mu_api:10.4e} "
              f"{'true' if row.verdict else 'false'}")
    print(f"overall verdict: {'true' if report.verdict else 'false'} "
          f"(min lam_min={report.lam_min:.4e}, window={report.delta:g} s)")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.command == "simulate":
            return _cmd_simulate(args, config)
        if args.command == "montecarlo":
            return _cmd_montecarlo(args, config)
        return _cmd_observability(args, config)
    except (ConfigParseError, ConfigValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
