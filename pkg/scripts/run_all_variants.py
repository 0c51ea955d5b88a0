"""Run every preset variant as a seeded batch and print a comparison table.

    python3 scripts/run_all_variants.py --runs 50 --out-dir results/
"""
import argparse
import time
from pathlib import Path

import numpy as np

from mesgossip.harness import run_experiment
from mesgossip.scenarios import VARIANTS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", type=Path, default=None)
    ap.add_argument("--variants", nargs="*", default=list(VARIANTS))
    args = ap.parse_args()

    print(f"{'variant':8s} {'mean':>7s} {'min':>7s} {'max':>7s} {'>=95%':>6s} {'cycles':>7s} {'time s':>7s}")
    for v in args.variants:
        t0 = time.perf_counter()
        out = args.out_dir / v if args.out_dir else None
        res = run_experiment(v, args.runs, args.seed, out)
        comb = np.array([r.fulfillment_combined for r in res])
        cycles = np.mean([r.cycles for r in res])
        print(f"{v:8s} {comb.mean():7.2f} {comb.min():7.2f} {comb.max():7.2f} "
              f"{int((comb >= 95).sum()):6d} {cycles:7.1f} {time.perf_counter() - t0:7.1f}")


if __name__ == "__main__":
    main()
