"""
Command-line entry point for the simulator.

How to use:
    python -m tvsim run --config configs/desk_qa.json
    python -m tvsim run --config configs/desk_icl.json --out runs/icl_s3 --seed 3 --threads 4
    python -m tvsim validate --config configs/full_qa.json --C 1 --delta 0.01
    python -m tvsim plot --metrics runs/qa_seed0/metrics.csv --out runs/qa_seed0/plots
    python -m tvsim ood --config configs/desk_qa.json --run-dir runs/qa_seed0

Flags:
    run
        --config PATH     experiment config (JSON)
        --out DIR         run directory (default: config out_dir, else TVSIM_OUTPUT_ROOT/<dist>_seed<seed>)
        --seed N          seed override
        --threads N       worker threads (default: config threads, else TVSIM_THREADS)
        --no-progress     hide the epoch progress bar
    validate
        --config PATH     config to check; prints schema status and the condition report
        --C X             constant used in every inequality (default: config condition_C)
        --delta X         failure probability (default: config delta)
    plot
        --metrics PATH    metrics CSV written by `run`
        --out DIR         directory for the SVG panels
    ood
        --config PATH     config whose `ood` section lists the experiments
        --run-dir DIR     finished run to load checkpoints from
        --threads N       worker threads

Exit codes:
    0 success, 1 config error, 2 runtime error (see error.json in the run directory).
"""
# tvsim/cli.py
from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from tvsim.config import SETTINGS, validate_settings
from tvsim.errors import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m tvsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Train, evaluate and write a run directory.")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--no-progress", action="store_true", help="Hide the epoch progress bar.")

    p_val = sub.add_parser("validate", help="Validate a config and report the sufficient conditions.")
    p_val.add_argument("--config", required=True)
    p_val.add_argument("--C", dest="C", type=float, default=None)
    p_val.add_argument("--delta", type=float, default=None)

    p_plot = sub.add_parser("plot", help="Render SVG panels from a metrics CSV.")
    p_plot.add_argument("--metrics", required=True)
    p_plot.add_argument("--out", required=True)

    p_ood = sub.add_parser("ood", help="Run OOD experiments against a finished run.")
    p_ood.add_argument("--config", required=True)
    p_ood.add_argument("--run-dir", required=True)
    p_ood.add_argument("--threads", type=int, default=None)
    return parser


def _print_json(payload: object) -> None:
    from tvsim.versioning import canonical_json

    print(canonical_json(payload))


def _dispatch(args: argparse.Namespace) -> int:
    # imported here so `--help` does not pay for numpy/pydantic imports
    from tvsim import experiment
    from tvsim.plots import emit_plots

    if args.command == "run":
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1", fields=["threads"])
        run_dir = experiment.run(
            args.config,
            out=args.out,
            seed=args.seed,
            threads=args.threads,
            progress=False if args.no_progress else None,
        )
        print(f"[OK] run directory: {run_dir}")
        return EXIT_OK

    if args.command == "validate":
        report = experiment.validate_config(args.config, C=args.C, delta=args.delta)
        _print_json(report)
        status = "[OK]" if report["conditions"]["passed"] else "[WARN]"
        print(f"{status} schema valid; conditions passed={report['conditions']['passed']} at C={report['conditions']['C']}")
        return EXIT_OK

    if args.command == "plot":
        for path in emit_plots(args.metrics, args.out):
            print(f"[OK] wrote {path}")
        return EXIT_OK

    if args.command == "ood":
        results = experiment.run_ood(args.config, args.run_dir, threads=args.threads)
        _print_json(results)
        print(f"[OK] wrote {args.run_dir}/reports/ood.json")
        return EXIT_OK

    raise ConfigError(f"unknown command {args.command!r}")


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        validate_settings()
    except ValueError as exc:
        print(f"[CONFIG ERROR] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=SETTINGS.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"[CONFIG ERROR] {exc}", file=sys.stderr)
        if exc.fields:
            print(f"  fields: {', '.join(exc.fields)}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"[RUNTIME ERROR] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
