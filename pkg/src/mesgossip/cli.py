"""Command line entry point: ``mesgossip {run,experiment,oracle,export-scenario}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, OracleTooLarge
from .harness import brute_force_oracle, run_experiment
from .scenarios import VARIANTS, build_scenario, load_scenario, save_scenario


def _scenario_arg(args):
    if args.scenario:
        return args.scenario
    return args.variant


def _add_common(p: argparse.ArgumentParser, runs: bool) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--variant", choices=VARIANTS, default="GBS-H", help="preset scenario")
    src.add_argument("--scenario", help="scenario config file (TOML)")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--mode", choices=("rounds", "concurrent"), default="rounds")
    p.add_argument("--out-dir", type=Path, default=None, help="write result files here")
    if runs:
        p.add_argument("--runs", type=int, default=50, help="number of negotiations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mesgossip", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("run", help="one negotiation"), runs=False)
    _add_common(sub.add_parser("experiment", help="batch of seeded negotiations"), runs=True)

    p = sub.add_parser("oracle", help="exact optimum of a tiny scenario")
    p.add_argument("--scenario", required=True, help="scenario config file with at most 3 agents")
    p.add_argument("--slots", type=int, default=6)
    p.add_argument("--step", type=float, default=0.1, help="discretisation step, kW")

    p = sub.add_parser("export-scenario", help="write a preset as a config file")
    p.add_argument("--variant", choices=VARIANTS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, default=Path("."))
    return parser


def _summary_line(r) -> str:
    return (f"run {r.run} seed {r.seed}: P {r.fulfillment_P:.2f}%  H {r.fulfillment_H:.2f}%  "
            f"combined {r.fulfillment_combined:.2f}%  cycles {r.cycles}  messages {r.messages}"
            + ("" if r.converged else "  (not converged)"))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("run", "experiment"):
            n = 1 if args.command == "run" else args.runs
            results = run_experiment(_scenario_arg(args), n, args.seed, args.out_dir, args.mode)
            for r in results:
                print(_summary_line(r))
            if n > 1:
                comb = [r.fulfillment_combined for r in results]
                print(f"mean combined {sum(comb) / n:.2f}%  min {min(comb):.2f}%  "
                      f">=95%: {sum(c >= 95 for c in comb)}/{n}")
        elif args.command == "oracle":
            spec = load_scenario(args.scenario)
            res = brute_force_oracle(spec, args.slots, args.step)
            fp, fh, fc = res.fulfillment(spec.targets)
            print(json.dumps({"utility": res.utility, "points": res.n_points, "fulfillment_P": fp,
                              "fulfillment_H": fh, "fulfillment_combined": fc}, indent=2))
        else:
            args.out_dir.mkdir(parents=True, exist_ok=True)
            path = save_scenario(build_scenario(args.variant, args.seed),
                                 args.out_dir / f"{args.variant}_seed{args.seed}.toml")
            print(path)
    except (ConfigError, OracleTooLarge, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0
