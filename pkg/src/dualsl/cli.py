"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .duality import DegenerateLogProb
from .experiment import (
    ConfigError,
    build_data,
    build_models,
    build_task,
    compare_runs,
    load_config,
    run_experiment,
    table_csv,
)
from .models import check_model, init_params
from .seqcore import derive_rng
from .trainer import NumericFailure

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
NUMERIC_ERRORS = (NumericFailure, DegenerateLogProb, FloatingPointError)
GRADCHECK_TOL = 1e-4


def _run(args, sweep: bool) -> int:
    cfg = load_config(args.config)
    out = Path(args.output) if args.output else cfg.output_dir
    try:
        results = run_experiment(cfg, out, sweep=sweep)
    except NUMERIC_ERRORS as exc:
        out.mkdir(parents=True, exist_ok=True)
        (out / "FAILED").write_text(f"numeric failure: {exc}\n")
        print(f"numeric failure: {exc} (partial outputs in {out})", file=sys.stderr)
        return EXIT_NUMERIC
    for arm, m in results.items():
        extra = f"  kl={m['kl']:.6g}" if "kl" in m else ""
        print(f"{arm:>24}: risk={m['risk']:.6g}  duality={m['duality']:.6g}{extra}")
    print(f"outputs written to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    return _run(args, sweep=False)


def cmd_sweep(args) -> int:
    return _run(args, sweep=True)


def cmd_compare(args) -> int:
    try:
        rows, cols = compare_runs(args.run_dirs)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = table_csv(rows, cols)
    sys.stdout.write(text)
    Path(args.output).write_text(text)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = load_config(args.config)
    task = build_task(cfg)
    data = build_data(cfg, task)
    pairs = list(data.train) + list(data.valid)
    rng = derive_rng(cfg["experiment"]["seed"], 99)
    worst_all = 0.0
    for model, direction in zip(build_models(cfg, task), ("xy", "yx")):
        worst = 0.0
        for _ in range(args.n):
            p = pairs[int(rng.integers(len(pairs)))]
            probe = model.clone()
            probe.params = init_params(model, args.scale, rng, randomize_all=True)
            x, y = (p.x, p.y) if direction == "xy" else (p.y, p.x)
            worst = max(worst, check_model(probe, x, y))
        worst_all = max(worst_all, worst)
        print(f"{direction} {model.family:>9}: max relative error {worst:.3e} over {args.n} triples")
    ok = worst_all <= GRADCHECK_TOL and np.isfinite(worst_all)
    print("PASS" if ok else "FAIL", f"(tolerance {GRADCHECK_TOL:g})")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualsl", description="Dual supervised learning experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured arms")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="override experiment.output_dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="baseline plus one DSL arm per lambda (always includes 0)")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="override experiment.output_dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="compare final metrics; the first run is the reference")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("-o", "--output", default="comparison.csv")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="finite-difference check of both models' gradients")
    p.add_argument("config")
    p.add_argument("-n", type=int, default=50, help="random (theta, x, y) triples per model")
    p.add_argument("--scale", type=float, default=0.5)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
