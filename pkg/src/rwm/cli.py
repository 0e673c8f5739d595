"""Command-line driver.

    rwm query    MANIFEST --layer Q --node U [walk flags]     communities per layer
    rwm rank     MANIFEST --layer Q --node U [walk flags]     score vectors per layer
    rwm linkpred MANIFEST --target I --remove 0.3 --k 100     held-out link prediction
    rwm sample   MANIFEST --target I --walk-length 40 ...     walk corpus
    rwm gen      --n 1000 --out-dir DIR ...                   synthetic dataset
    rwm bench    --sizes 10000 100000 ...                     strategy timing report

Artifacts go to stdout (or ``--output``), diagnostics to stderr.  Exit codes:
0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .accel import STRATEGIES, solve
from .engine import InitializationError, RwmConfig
from .multinet import LoadError, QuerySpec, load_manifest, replace_layer, validate, write_manifest
from .synthbench import run_benchmark, synthetic_instance
from .tasks import detect_local_communities, precision_at_k, predict_links, ranking, remove_probe_edges, sample_contexts

log = logging.getLogger("rwm")


def _ranged(lo, hi, lo_open=True, hi_open=False):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        ok_lo = v > lo if lo_open else v >= lo
        ok_hi = v < hi if hi_open else v <= hi
        if not (ok_lo and ok_hi):
            raise argparse.ArgumentTypeError(
                f"{v} outside {'(' if lo_open else '['}{lo}, {hi}{')' if hi_open else ']'}")
        return v
    return parse


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    v = _ranged(0, float("inf"))(text)
    return v


def _walk_flags(p: argparse.ArgumentParser, mode_default="a2"):
    g = p.add_argument_group("walk parameters")
    g.add_argument("--alpha", type=_ranged(0, 1), default=0.9, help="continuation probability (default 0.9)")
    g.add_argument("--lambda", dest="decay", type=_ranged(0, 1, hi_open=True), default=0.7,
                   help="relevance decay factor (default 0.7)")
    g.add_argument("--epsilon", type=_ranged(0, 1, hi_open=True), default=0.01,
                   help="operator tolerance for early stopping (default 0.01)")
    g.add_argument("--theta", type=_ranged(0, 1), default=0.9, help="partial-update mass coverage (default 0.9)")
    g.add_argument("--max-iters", type=_positive_int, default=1000)
    g.add_argument("--tol", type=_ranged(0, 1, lo_open=False), default=1e-9, help="L1 convergence tolerance")
    g.add_argument("--mode", choices=STRATEGIES, default=mode_default,
                   help=f"solver: exact power iteration, a1 early stopping, a2 early stopping "
                        f"plus partial updates (default {mode_default})")


def _common(p: argparse.ArgumentParser, formats=("json", "tsv"), default="json"):
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("--output", "-o", help="write the artifact here instead of stdout")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--verbose", "-v", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rwm", description="Reinforced random walks on multiple networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (("query", "local community of the query in every layer"),
                       ("rank", "visiting scores of every layer, sorted")):
        p = sub.add_parser(name, help=text)
        p.add_argument("manifest")
        p.add_argument("--layer", type=int, required=True)
        p.add_argument("--node", type=int, nargs="+", required=True, help="query node(s)")
        _walk_flags(p)
        _common(p)

    p = sub.add_parser("linkpred", help="hold out edges of one layer and rank unconnected pairs")
    p.add_argument("manifest")
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--remove", type=_ranged(0, 1, lo_open=False, hi_open=True), default=0.3,
                   help="fraction of target edges held out as the probe set")
    p.add_argument("--k", type=_positive_int, default=100)
    _walk_flags(p, "a1")
    _common(p, default="tsv")

    p = sub.add_parser("sample", help="walk corpus on the frozen per-node operators")
    p.add_argument("manifest")
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--walk-length", type=_positive_int, default=40)
    p.add_argument("--walks-per-node", type=_positive_int, default=10)
    p.add_argument("--p", type=_positive_float, default=None, help="return bias (node2vec)")
    p.add_argument("--q", type=_positive_float, default=None, help="in-out bias (node2vec)")
    _walk_flags(p, "a1")
    _common(p, formats=("text", "json", "tsv"), default="text")

    p = sub.add_parser("gen", help="write a synthetic planted-partition multiplex dataset")
    p.add_argument("--out-dir", required=True)
    _gen_flags(p)
    _common(p)

    p = sub.add_parser("bench", help="time the solvers on synthetic multiplex networks")
    p.add_argument("--sizes", type=_positive_int, nargs="+", default=[10_000])
    _gen_flags(p)
    p.add_argument("--strategies", choices=STRATEGIES, nargs="+", default=list(STRATEGIES))
    p.add_argument("--trials", type=_positive_int, default=10)
    p.add_argument("--repeats", type=_positive_int, default=5)
    p.add_argument("--no-timing", action="store_true", help="omit wall-time columns")
    _walk_flags(p)
    _common(p)
    return parser


def _gen_flags(p):
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--K", type=_positive_int, default=3)
    p.add_argument("--avg-degree", type=_positive_float, default=14.0, help="mean degree of the base graph")
    p.add_argument("--keep-ratio", type=_ranged(0, 1), default=0.5)
    p.add_argument("--communities", type=_positive_int, default=2)
    p.add_argument("--mixing", type=_ranged(0, 1, lo_open=False, hi_open=True), default=0.1)


def _config(args) -> RwmConfig:
    return RwmConfig(alpha=args.alpha, decay=args.decay, epsilon=args.epsilon, theta=args.theta,
                     max_iters=args.max_iters, vector_tol=args.tol, seed=args.seed)


def _load(args):
    mn = load_manifest(args.manifest)
    for msg in validate(mn).messages():
        log.warning("%s", msg)
    return mn


def _layer(mn, i, flag):
    if not 0 <= i < mn.K:
        raise LoadError(f"{flag} {i} out of range: the dataset has {mn.K} layers")
    return i


# --
# Commands


def cmd_query(args) -> str:
    mn = _load(args)
    query = QuerySpec(_layer(mn, args.layer, "--layer"), tuple(args.node))
    comms = detect_local_communities(mn, query, _config(args), args.mode)
    if args.format == "json":
        return "".join(json.dumps(c.to_dict()) + "\n" for c in comms)
    lines = ["layer\tconductance\tprefix_len\tmembers"]
    lines += [f"{c.layer}\t{c.conductance:.17g}\t{c.prefix_len}\t{','.join(map(str, c.members))}" for c in comms]
    return "\n".join(lines) + "\n"


def cmd_rank(args) -> str:
    mn = _load(args)
    query = QuerySpec(_layer(mn, args.layer, "--layer"), tuple(args.node))
    state = solve(mn, query, _config(args), args.mode)
    out = []
    for i, x in enumerate(state.vectors):
        pos = ranking(x)
        zero = np.setdiff1d(np.arange(x.size), pos, assume_unique=True)
        out.append((i, np.concatenate([pos, zero]), x))
    if args.format == "json":
        return json.dumps([{"layer": i, "nodes": order.tolist(), "scores": x[order].tolist()}
                           for i, order, x in out]) + "\n"
    lines = ["layer\tnode\tscore"]
    for i, order, x in out:
        lines += [f"{i}\t{u}\t{x[u]:.17g}" for u in order]
    return "\n".join(lines) + "\n"


def cmd_linkpred(args) -> str:
    mn = _load(args)
    t = _layer(mn, args.target, "--target")
    thin, probe = remove_probe_edges(mn.layers[t], args.remove, args.seed)
    log.info("held out %d of %d edges in layer %d", len(probe), mn.layers[t].edge_count, t)
    pred = predict_links(replace_layer(mn, t, thin), t, _config(args), args.k, args.mode, args.workers)
    k = min(args.k, len(pred))
    prec = precision_at_k(pred, probe, k) if len(probe) and k else None
    if args.format == "json":
        return json.dumps({"layer": t, "k": k, "probe_size": int(len(probe)), "precision": prec,
                           "pairs": [{"u": u, "v": v, "score": s} for u, v, s in pred.pairs]}, indent=2) + "\n"
    head = f"#precision@{k}\t{'nan' if prec is None else f'{prec:.17g}'}\n"
    return head + pred.to_tsv()


def cmd_sample(args) -> str:
    mn = _load(args)
    t = _layer(mn, args.target, "--target")
    corpus = sample_contexts(mn, t, _config(args), args.walk_length, args.walks_per_node, args.p, args.q,
                             args.seed, args.mode, workers=args.workers)
    return {"text": corpus.to_text, "json": corpus.to_json, "tsv": corpus.to_tsv}[args.format]()


def cmd_gen(args) -> str:
    inst = synthetic_instance(args.n, args.K, args.avg_degree, args.keep_ratio, args.communities,
                              args.mixing, args.seed)
    path = write_manifest(inst.mn, args.out_dir)
    with open(f"{args.out_dir}/labels.tsv", "w") as fh:
        fh.writelines(f"{u}\t{c}\n" for u, c in enumerate(inst.labels))
    summary = {"manifest": path, "n": args.n, "K": args.K,
               "edges": [net.edge_count for net in inst.mn.layers]}
    if args.format == "json":
        return json.dumps(summary) + "\n"
    return f"{path}\t{args.n}\t{args.K}\t{','.join(map(str, summary['edges']))}\n"


def cmd_bench(args) -> str:
    instances = [synthetic_instance(n, args.K, args.avg_degree, args.keep_ratio, args.communities,
                                    args.mixing, args.seed) for n in args.sizes]
    report = run_benchmark(instances, args.strategies, _config(args), args.trials, args.repeats,
                           args.seed, args.workers)
    timing = not args.no_timing
    return report.to_json(timing) + "\n" if args.format == "json" else report.to_tsv(timing)


COMMANDS = {"query": cmd_query, "rank": cmd_rank, "linkpred": cmd_linkpred,
            "sample": cmd_sample, "gen": cmd_gen, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = COMMANDS[args.command](args)
    except (LoadError, InitializationError, OSError, ValueError) as exc:
        print(f"rwm {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
