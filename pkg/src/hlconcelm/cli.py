"""Command line entry point: ``hlconcelm {run,sweep,tune,verify,presets}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import bench


def _add_config_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="TOML configuration file")
    src.add_argument("--preset", help="name of a bundled preset (see 'presets')")
    p.add_argument("--seed", type=int, help="override the random seed")
    p.add_argument("--mode", choices=["hlconc", "conventional"], help="override the basis mode")
    p.add_argument("--out", default="out", help="output directory (default: out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hlconcelm", description="Random-feature PDE benchmarks with concatenated hidden layers")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="solve one configuration")
    _add_config_args(run)
    run.add_argument("--no-field", action="store_true", help="skip the solution.dat grid file")
    sweep = sub.add_parser("sweep", help="solve every point of sweep_Q1 or sweep_M")
    _add_config_args(sweep)
    sweep.add_argument("--workers", type=int, default=1, help="parallel sweep points")
    tune = sub.add_parser("tune", help="differential-evolution search for R")
    _add_config_args(tune)
    verify = sub.add_parser("verify", help="manufactured-residual and Jacobian checks")
    verify.add_argument("problems", nargs="*", help="problem ids (default: all)")
    sub.add_parser("presets", help="list bundled presets")
    return parser


def _load(args, parser):
    try:
        cfg = bench.load_config(args.config) if args.config else bench.load_preset(args.preset)
        changes = {k: getattr(args, k) for k in ("seed", "mode") if getattr(args, k) is not None}
        return cfg.replace(**changes) if changes else cfg
    except (bench.ConfigError, OSError) as exc:
        parser.error(str(exc))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        print("\n".join(bench.list_presets()))
        return 0
    if args.command == "verify":
        ids = args.problems or bench.PROBLEM_IDS
        bad = [p for p in ids if p not in bench.PROBLEM_IDS]
        if bad:
            parser.error(f"unknown problem(s): {', '.join(bad)}")
        results = bench.verify(ids)
        for r in results:
            print(f"{'PASS' if r['ok'] else 'FAIL'}  {r['problem']:<16} manufactured residual "
                  f"{r['manufactured_residual']:.2e}  jacobian rel. error {r['jacobian_rel_err']:.2e}")
        return 0 if all(r["ok"] for r in results) else 1
    cfg = _load(args, parser)
    try:
        if args.command == "run":
            report = bench.run_benchmark(cfg, args.out, field_data=not args.no_field)
            summary = report["result"]
        elif args.command == "sweep":
            summary = bench.run_sweep(cfg, args.out, args.workers)["rows"]
        else:
            report = bench.run_tune(cfg, args.out)
            summary = {"R_star": report["R_star"], "best_objective": report["best_objective"]}
    except bench.ConfigError as exc:
        parser.error(str(exc))
    except Exception as exc:
        print(f"error: {exc} (partial report in {args.out})", file=sys.stderr)
        return 1
    print(json.dumps(summary, indent=2, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
