"""``cmdp-lab`` command line: gen-env, solve, run, plot.

Exit status is 0 on success, 1 for invalid input and 2 for runtime failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import TabularCmdp
from .env import generate_random_cmdp
from .harness import ConfigError, ExperimentConfig, emit_chart, run_experiment
from .oracle import NoSlaterPointError, slater_gap, solve_cmdp_lp
from .simplex import InfeasibleError


def _gen_env(args):
    cmdp, gap = generate_random_cmdp(args.seed, args.states, args.actions, args.horizon)
    out = Path(args.out)
    cmdp.save(out)
    sidecar = out.with_name(out.stem + ".meta.json")
    sidecar.write_text(json.dumps({"slater_gap": gap, "threshold": float(cmdp.thresholds[0])}))
    print(json.dumps({"env": str(out), "meta": str(sidecar), "slater_gap": gap}))


def _solve(args):
    cmdp = TabularCmdp.load(args.env)
    v_star, _, _ = solve_cmdp_lp(cmdp)
    gap = slater_gap(cmdp) if cmdp.N == 1 else None
    print(json.dumps({"v_star": v_star, "threshold": cmdp.thresholds.tolist(), "slater_gap": gap}))


def _run(args):
    config = ExperimentConfig.load(args.config)
    if args.workers is not None:
        config.workers = args.workers
    print(run_experiment(config))


def _plot(args):
    runs = Path(args.runs)
    manifest = runs / "manifest.json"
    if manifest.exists():
        entries = json.loads(manifest.read_text())["runs"]
        paths = [runs / e["csv"] for e in entries]
    else:
        paths = sorted(runs.glob("*.csv"))
    print(emit_chart(paths, args.out))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmdp-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-env", help="generate a random CMDP")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--states", type=int, default=30)
    p.add_argument("--actions", type=int, default=3)
    p.add_argument("--horizon", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_gen_env)

    p = sub.add_parser("solve", help="constrained optimum of a CMDP file")
    p.add_argument("--env", required=True)
    p.set_defaults(func=_solve)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_run)

    p = sub.add_parser("plot", help="chart a run directory as SVG")
    p.add_argument("--runs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        if isinstance(exc, (InfeasibleError, NoSlaterPointError)):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
