"""Synthetic planted-partition multiplex networks and a strategy benchmark.

The base graph is a planted partition with near-equal blocks.  Layers are
independent edge subsamples of the base, so every layer is a noisy view of
the same community structure.
"""

from __future__ import annotations

import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import debug
from .accel import STRATEGIES, phase_plan, solve, visited_count
from .engine import RwmConfig, WalkerState
from .multinet import MultiNetwork, Network, QuerySpec, as_multiplex, network_from_arrays

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlantedPartitionSpec:
    n: int = 1000
    avg_degree: float = 14.0
    num_communities: int = 2
    mixing: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.n >= self.num_communities >= 1:
            raise ValueError("need n >= num_communities >= 1")
        if not 0 <= self.mixing < 1:
            raise ValueError("mixing must be in [0, 1)")
        if not 0 < self.avg_degree < self.n:
            raise ValueError(f"avg_degree must be in (0, n), got {self.avg_degree}")


@dataclass(frozen=True)
class LayerDerivation:
    K: int = 3
    keep_ratio: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not 0 < self.keep_ratio <= 1:
            raise ValueError("keep_ratio must be in (0, 1]")


def _sample_pairs(rng, count, draw, n):
    """Draw ``count`` distinct unordered pairs with ``draw(rng, size)``."""
    keys = np.zeros(0, dtype=np.int64)
    while keys.size < count:
        u, v = draw(rng, 2 * (count - keys.size) + 16)
        ok = u != v
        lo, hi = np.minimum(u[ok], v[ok]), np.maximum(u[ok], v[ok])
        keys = np.unique(np.concatenate([keys, lo * n + hi]))
    keys = rng.permutation(keys)[:count]
    return keys // n, keys % n


def generate_base(spec: PlantedPartitionSpec) -> tuple[Network, np.ndarray]:
    """Planted-partition graph and its block labels.

    Within- and between-block edge probabilities are set so that the
    expected number of edges is ``n * avg_degree / 2`` with a ``mixing``
    fraction of them between blocks.  Edge counts are drawn binomially and
    the pairs uniformly without replacement inside each pair class.
    """
    rng = np.random.default_rng(spec.seed)
    n, b = spec.n, spec.num_communities
    labels = np.arange(n) * b // n
    sizes = np.bincount(labels, minlength=b)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    m = n * spec.avg_degree / 2
    in_pairs = sizes * (sizes - 1) // 2
    out_pairs = n * (n - 1) // 2 - in_pairs.sum()
    mixing = spec.mixing if b > 1 else 0.0
    p_in = (1 - mixing) * m / in_pairs.sum()
    p_out = mixing * m / out_pairs if out_pairs else 0.0
    if p_in > 1 or p_out > 1:
        raise ValueError(f"infeasible spec: edge probabilities {p_in:.3g}, {p_out:.3g}")

    us, vs = [], []
    for k in range(b):
        cnt = rng.binomial(in_pairs[k], p_in) if in_pairs[k] else 0
        lo, sz = starts[k], sizes[k]

        def draw(r, size, lo=lo, sz=sz):
            return lo + r.integers(0, sz, size), lo + r.integers(0, sz, size)
        u, v = _sample_pairs(rng, cnt, draw, n)
        us.append(u)
        vs.append(v)
    if out_pairs:
        cnt = rng.binomial(out_pairs, p_out)

        def draw(r, size):
            u, v = r.integers(0, n, size), r.integers(0, n, size)
            keep = labels[u] != labels[v]
            return u[keep], v[keep]
        u, v = _sample_pairs(rng, cnt, draw, n)
        us.append(u)
        vs.append(v)
    u, v = np.concatenate(us), np.concatenate(vs)
    return network_from_arrays(u, v, np.ones(u.size), n), labels


def derive_layers(base: Network, d: LayerDerivation) -> MultiNetwork:
    """``K`` independent ``keep_ratio`` edge subsamples of ``base``."""
    rng = np.random.default_rng(d.seed)
    edges = base.edges()
    w = np.asarray(base.adjacency[edges[:, 0], edges[:, 1]]).ravel()
    layers = []
    for k in range(d.K):
        keep = rng.random(edges.shape[0]) < d.keep_ratio
        e = edges[keep]
        layers.append(network_from_arrays(e[:, 0], e[:, 1], w[keep], base.node_count, k))
    return as_multiplex(layers)


def f1_score(detected, truth) -> float:
    detected, truth = set(detected), set(truth)
    hit = len(detected & truth)
    if hit == 0:
        return 0.0
    return 2 * hit / (len(detected) + len(truth))


# --
# Benchmark


@dataclass
class BenchReport:
    rows: list[dict] = field(default_factory=list)

    TIMING = ("mean_time", "median_time")

    def cell(self, instance: str, strategy: str) -> dict:
        for r in self.rows:
            if r["instance"] == instance and r["strategy"] == strategy:
                return r
        raise KeyError((instance, strategy))

    def to_json(self, timing: bool = True) -> str:
        rows = self.rows if timing else [{k: v for k, v in r.items() if k not in self.TIMING}
                                         for r in self.rows]
        return json.dumps(rows, indent=2, sort_keys=True)

    def to_tsv(self, timing: bool = True) -> str:
        if not self.rows:
            return ""
        keys = [k for k in self.rows[0] if timing or k not in self.TIMING]
        lines = ["\t".join(keys)]
        for r in self.rows:
            lines.append("\t".join(_fmt(r[k]) for k in keys))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


@dataclass
class Instance:
    name: str
    mn: MultiNetwork
    labels: np.ndarray | None = None


def _one_trial(inst: Instance, strategy: str, query: QuerySpec, cfg: RwmConfig, repeats: int):
    from .tasks import sweep_cut  # tasks imports synthbench helpers

    te = phase_plan(inst.mn, cfg).split_time
    at_split = {}

    def snap(s: WalkerState):
        if s.t == te:
            at_split["v"] = visited_count(s)

    times = []
    state = None
    for r in range(repeats):
        t0 = time.perf_counter()
        state = solve(inst.mn, query, cfg, strategy, callback=snap if r == 0 else None)
        times.append(time.perf_counter() - t0)
    q = query.query_layer
    out = {
        "time": statistics.median(times),
        "iterations": state.t,
        "visited_split": at_split.get("v", visited_count(state))[q],
        "visited_end": visited_count(state)[q],
    }
    if inst.labels is not None:
        comm = sweep_cut(state.vectors[q], inst.mn.layers[q])
        u = query.query_nodes[0]
        out["f1"] = f1_score(comm.members, np.flatnonzero(inst.labels == inst.labels[u]))
    return out


def run_benchmark(instances: list[Instance], strategies=STRATEGIES, cfg: RwmConfig | None = None,
                  trials: int = 10, repeats: int = 5, seed: int = 0, workers: int = 1) -> BenchReport:
    """Time every strategy on every instance over ``trials`` random queries.

    Per trial the wall time is the median of ``repeats`` runs.  The same
    queries are used for every strategy.  ``workers > 1`` runs trials in
    parallel processes; use it only when timings are not of interest.
    """
    cfg = cfg or RwmConfig()
    bad = set(strategies) - set(STRATEGIES)
    if bad:
        raise ValueError(f"unknown strategies {sorted(bad)}")
    report = BenchReport()
    with debug.disabled():
        for idx, inst in enumerate(instances):
            rng = np.random.default_rng([seed, idx])
            n = inst.mn.layers[0].node_count
            nodes = rng.choice(n, size=trials, replace=trials > n)
            queries = [QuerySpec.single(0, int(u)) for u in nodes]
            for strat in strategies:
                args = [(inst, strat, q, cfg, repeats) for q in queries]
                if workers > 1:
                    with ProcessPoolExecutor(workers) as ex:
                        res = list(ex.map(_one_trial, *zip(*args)))
                else:
                    res = [_one_trial(*a) for a in args]
                row = {
                    "instance": inst.name,
                    "strategy": strat,
                    "n": n,
                    "K": inst.mn.K,
                    "trials": trials,
                    "mean_time": statistics.fmean(r["time"] for r in res),
                    "median_time": statistics.median(r["time"] for r in res),
                    "iterations": statistics.fmean(r["iterations"] for r in res),
                    "visited_split": statistics.fmean(r["visited_split"] for r in res),
                    "visited_end": statistics.fmean(r["visited_end"] for r in res),
                    "visited_split_max": max(r["visited_split"] for r in res),
                    "visited_end_max": max(r["visited_end"] for r in res),
                }
                if inst.labels is not None:
                    row["f1"] = statistics.fmean(r["f1"] for r in res)
                report.rows.append(row)
                log.info("%s %s: %.4fs median", inst.name, strat, row["median_time"])
    return report


def synthetic_instance(n: int, K: int = 3, avg_degree: float = 14.0, keep_ratio: float = 0.5,
                       num_communities: int = 2, mixing: float = 0.1, seed: int = 0) -> Instance:
    """Base graph of mean degree ``avg_degree`` split into ``K`` subsampled
    layers; the defaults give layers of mean degree about 7."""
    spec = PlantedPartitionSpec(n, avg_degree, num_communities, mixing, seed)
    base, labels = generate_base(spec)
    mn = derive_layers(base, LayerDerivation(K, keep_ratio, seed + 1))
    return Instance(f"n{n}_K{K}", mn, labels)
