"""Time power iteration against the early-stopping solvers on synthetic
multiplex networks of growing size, and report how many nodes are touched.

    python3 scripts/run_efficiency.py --sizes 10000 100000 --alpha 0.3 0.9
"""

import argparse
import logging

from rwm import RwmConfig
from rwm.synthbench import run_benchmark, synthetic_instance


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[10_000, 100_000])
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.3, 0.9])
    ap.add_argument("--K", type=int, default=3)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    instances = [synthetic_instance(n, K=args.K, seed=args.seed) for n in args.sizes]
    for alpha in args.alpha:
        rep = run_benchmark(instances, ["exact", "a1", "a2"], RwmConfig(alpha=alpha),
                            args.trials, args.repeats, args.seed)
        print(f"# alpha={alpha}")
        print(rep.to_tsv(), end="")
        for inst in instances:
            base = rep.cell(inst.name, "exact")["median_time"]
            for s in ("a1", "a2"):
                print(f"# {inst.name} {s}: {base / rep.cell(inst.name, s)['median_time']:.1f}x faster")


if __name__ == "__main__":
    main()
