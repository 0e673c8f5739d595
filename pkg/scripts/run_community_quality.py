"""Local community F1 of the multi-layer walk against single-layer
restart walks on planted-partition multiplex networks, across mixing levels.

    python3 scripts/run_community_quality.py --n 1000 --queries 100
"""

import argparse

import numpy as np

from rwm import QuerySpec, RwmConfig
from rwm.synthbench import f1_score, synthetic_instance
from rwm.tasks import detect_local_communities, rwr_community


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--K", type=int, default=3)
    ap.add_argument("--mixing", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.3])
    ap.add_argument("--queries", type=int, default=100)
    ap.add_argument("--mode", default="a2", choices=("exact", "a1", "a2"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = RwmConfig()
    print("mixing\tf1_multi\tf1_single\twin_or_tie")
    for mu in args.mixing:
        inst = synthetic_instance(args.n, K=args.K, mixing=mu, seed=args.seed)
        rng = np.random.default_rng(args.seed)
        ours, base = [], []
        for u in rng.choice(args.n, args.queries, replace=False):
            truth = np.flatnonzero(inst.labels == inst.labels[u])
            c = detect_local_communities(inst.mn, QuerySpec.single(0, int(u)), cfg, args.mode)[0]
            ours.append(f1_score(c.members, truth))
            base.append(f1_score(rwr_community(inst.mn.layers[0], int(u), cfg).members, truth))
        ours, base = np.array(ours), np.array(base)
        print(f"{mu}\t{ours.mean():.3f}\t{base.mean():.3f}\t{np.mean(ours >= base - 1e-12):.2f}")


if __name__ == "__main__":
    main()
