"""Command-line entry points: rates, checks, complexity, plot.

Exit codes: 0 on success, 1 when a check fails, 2 on usage or config errors.
"""

from __future__ import annotations

import argparse
import os
import sys

from .experiments import (
    ConfigError,
    ExperimentConfig,
    PlotInputError,
    checks_csv,
    emit_plot,
    rates_csv,
    run_checks,
    run_complexity,
    run_rates,
    write_text,
)


def _load_config(args) -> ExperimentConfig:
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                config = ExperimentConfig.from_json(fh.read())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}")
    else:
        config = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["root_seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if overrides:
        import dataclasses

        config = dataclasses.replace(config, **overrides)
    return config


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON experiment config (defaults used if omitted)")
    sub.add_argument("--out", default=".", help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="root seed override (u64)")
    sub.add_argument("--jobs", type=int, default=None, help="parallel worker count")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kernreg",
        description="Regularized kernel least squares and its spectral check suite",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    for name, blurb in (
        ("rates", "excess-risk rate study over the n-grid"),
        ("checks", "run the full bound-verification suite"),
        ("complexity", "localized complexity Monte Carlo sweeps"),
    ):
        sub = subs.add_parser(name, help=blurb)
        _add_common(sub)

    plot = subs.add_parser("plot", help="render a rates CSV as a log-log SVG plot")
    plot.add_argument("csv", help="rates CSV produced by the rates command")
    plot.add_argument("--out", default=".", help="output directory")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    try:
        if args.command == "plot":
            out = os.path.join(args.out, "rates.svg")
            os.makedirs(args.out, exist_ok=True)
            emit_plot(args.csv, out)
            print(out)
            return 0

        config = _load_config(args)
        if args.command == "rates":
            result = run_rates(config)
            path = os.path.join(args.out, "rates.csv")
            write_text(path, rates_csv(result, config.constants))
            for fit in result.fits:
                print(
                    f"{fit.kind}: slope={fit.slope:.4f} "
                    f"(log-adjusted {fit.slope_logadj:.4f}, predicted {fit.predicted:.4f})"
                )
            print(path)
            return 0
        if args.command == "checks":
            report = run_checks(config)
            path = os.path.join(args.out, "checks.csv")
            write_text(path, checks_csv(report))
            for row in report.rows:
                print(f"{'PASS' if row.passed else 'FAIL'} {row.check}: "
                      f"{row.statistic:.6g} ({row.threshold})")
            print(path)
            return 0 if report.all_passed else 1
        if args.command == "complexity":
            path = os.path.join(args.out, "complexity.csv")
            write_text(path, run_complexity(config))
            print(path)
            return 0
    except (ConfigError, PlotInputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
