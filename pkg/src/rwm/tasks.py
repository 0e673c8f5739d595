"""Applications of converged walker vectors.

* local community detection: conductance sweep over each walker's ranking
* link prediction: symmetrized per-source proximities on one layer
* context sampling: truncated (optionally node2vec-biased) walks on the
  frozen per-start-node operator, as input for skip-gram style embedders
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat

import numpy as np

from .accel import solve
from .engine import RwmConfig, operator_matrix, run
from .multinet import MultiNetwork, Network, QuerySpec, as_multiplex, network_from_arrays

log = logging.getLogger(__name__)


# --
# Conductance and sweep


@dataclass
class Community:
    layer: int
    members: list[int]  # in ranking order
    conductance: float
    prefix_len: int

    def to_dict(self) -> dict:
        return {"layer": self.layer, "members": self.members,
                "conductance": self.conductance, "prefix_len": self.prefix_len}


def conductance(members, net: Network) -> float:
    """Weighted cut over the smaller side's weighted volume.

    A set whose smaller side has zero volume (only isolated nodes) gets 1.0.
    """
    mask = np.zeros(net.node_count, dtype=bool)
    mask[np.asarray(list(members), dtype=np.int64)] = True
    k = int(mask.sum())
    if k == 0 or k == net.node_count:
        raise ValueError("conductance is undefined for the empty or the full node set")
    adj = net.adjacency
    deg = net.degree
    vol = float(deg[mask].sum())
    rest = float(deg.sum()) - vol
    cut = vol - float(adj[mask][:, mask].sum())
    den = min(vol, rest)
    return cut / den if den > 0 else 1.0


def ranking(scores: np.ndarray) -> np.ndarray:
    """Nodes with positive score, by descending score then ascending index."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.flatnonzero(scores > 0)
    return pos[np.lexsort((pos, -scores[pos]))]


SWEEP_TIE_TOL = 1e-12


def sweep_profile(order: np.ndarray, net: Network) -> np.ndarray:
    """Conductance of every prefix of ``order`` (length ``len(order)``)."""
    n = net.node_count
    rank = np.full(n, n, dtype=np.int64)
    rank[order] = np.arange(order.size)
    adj = net.adjacency.tocoo()
    ru, rv = rank[adj.row], rank[adj.col]
    # each undirected edge appears twice; credit it once, to the later endpoint
    inner = (ru < rv) & (rv < n)
    back = np.zeros(order.size)
    np.add.at(back, rv[inner], adj.data[inner])
    deg = net.degree[order]
    vol = np.cumsum(deg)
    cut = np.cumsum(deg - 2.0 * back)
    den = np.minimum(vol, net.degree.sum() - vol)
    out = np.ones(order.size)
    ok = den > 0
    out[ok] = cut[ok] / den[ok]
    return np.clip(out, 0.0, 1.0)


def sweep_cut(scores: np.ndarray, net: Network) -> Community:
    """Minimum-conductance prefix of the score ranking.

    Only positive-score nodes are ranked.  The full node set is never a
    candidate; ties on conductance go to the shorter prefix.
    """
    order = ranking(scores)
    if order.size == 0:
        raise ValueError("sweep needs at least one positive score")
    if order.size == net.node_count:
        if order.size == 1:
            raise ValueError("single-node layer has no proper prefix")
        order_eval = order[:-1]
    else:
        order_eval = order
    prof = sweep_profile(order, net)[:order_eval.size]
    # shortest prefix within roundoff of the minimum
    best = int(np.flatnonzero(prof <= prof.min() + SWEEP_TIE_TOL)[0])
    return Community(net.layer_id, [int(u) for u in order[:best + 1]], float(prof[best]), best + 1)


def detect_local_communities(mn: MultiNetwork, query: QuerySpec, cfg: RwmConfig | None = None,
                             strategy: str = "a2") -> list[Community]:
    cfg = cfg or RwmConfig()
    state = solve(mn, query, cfg, strategy)
    return [sweep_cut(x, net) for x, net in zip(state.vectors, mn.layers)]


def rwr_community(net: Network, node: int, cfg: RwmConfig | None = None) -> Community:
    """Single-layer random walk with restart followed by a sweep: the
    one-network baseline."""
    cfg = cfg or RwmConfig()
    state = run(as_multiplex([net]), QuerySpec.single(0, node), cfg)
    c = sweep_cut(state.vectors[0], net)
    c.layer = net.layer_id
    return c


# --
# Per-start-node fan-out

_shared: MultiNetwork | None = None


def _set_shared(mn):
    global _shared
    _shared = mn


def _call_shared(fn, node, args):
    return fn(_shared, node, *args)


def map_nodes(fn, mn: MultiNetwork, nodes, args: tuple = (), workers: int = 1) -> list:
    """``[fn(mn, u, *args) for u in nodes]``, optionally in worker processes.

    The network is shipped once per worker; results keep the input order,
    so the output does not depend on ``workers``.
    """
    nodes = [int(u) for u in nodes]
    if workers <= 1 or len(nodes) < 2:
        return [fn(mn, u, *args) for u in nodes]
    chunk = max(1, len(nodes) // (4 * workers))
    with ProcessPoolExecutor(workers, initializer=_set_shared, initargs=(mn,)) as ex:
        return list(ex.map(_call_shared, repeat(fn), nodes, repeat(args), chunksize=chunk))


# --
# Link prediction


@dataclass
class RankedPairs:
    layer: int
    pairs: list[tuple[int, int, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.pairs)

    def to_tsv(self) -> str:
        return "".join(f"{u}\t{v}\t{s:.17g}\n" for u, v, s in self.pairs)

    def to_json(self) -> str:
        return json.dumps({"layer": self.layer,
                           "pairs": [{"u": u, "v": v, "score": s} for u, v, s in self.pairs]}, indent=2)


def _source_scores(mn, u, target, cfg, strategy):
    return solve(mn, QuerySpec.single(target, u), cfg, strategy).vectors[target]


def proximity_matrix(mn: MultiNetwork, target: int, cfg: RwmConfig, strategy: str = "a1",
                     workers: int = 1) -> np.ndarray:
    """Row ``u`` is the converged target-layer vector of a run started at ``u``.

    Dense ``n x n``; meant for layers of up to a few thousand nodes.
    """
    n = mn.layers[target].node_count
    rows = map_nodes(_source_scores, mn, range(n), (target, cfg, strategy), workers)
    return np.vstack(rows)


def predict_links(mn: MultiNetwork, target: int, cfg: RwmConfig | None = None, k: int = 100,
                  strategy: str = "a1", workers: int = 1) -> RankedPairs:
    """Top ``k`` unconnected pairs of layer ``target`` by
    ``max(x_u[v], x_v[u])``; ties go to the smaller ``(u, v)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    cfg = cfg or RwmConfig()
    net = mn.layers[target]
    x = proximity_matrix(mn, target, cfg, strategy, workers)
    score = np.maximum(x, x.T)
    u, v = np.triu_indices(net.node_count, k=1)
    keep = np.asarray(net.adjacency[u, v]).ravel() == 0
    u, v = u[keep], v[keep]
    s = score[u, v]
    order = np.lexsort((v, u, -s))[:k]
    return RankedPairs(target, [(int(u[t]), int(v[t]), float(s[t])) for t in order])


def _pair_key(u, v):
    return (int(u), int(v)) if u < v else (int(v), int(u))


def precision_at_k(predicted: RankedPairs, probe, k: int) -> float:
    if not 1 <= k <= len(predicted):
        raise ValueError(f"k must be in [1, {len(predicted)}], got {k}")
    truth = {_pair_key(a, b) for a, b in np.asarray(probe, dtype=np.int64).reshape(-1, 2)}
    hits = sum(_pair_key(u, v) in truth for u, v, _ in predicted.pairs[:k])
    return hits / k


def remove_probe_edges(net: Network, fraction: float, seed: int = 0) -> tuple[Network, np.ndarray]:
    """Hold out ``round(fraction * m)`` random edges.

    Returns the thinned layer and the held-out edges as an ``(r, 2)`` array
    with ``u < v``.
    """
    if not 0 <= fraction < 1:
        raise ValueError("fraction must be in [0, 1)")
    edges = net.edges()
    w = np.asarray(net.adjacency[edges[:, 0], edges[:, 1]]).ravel()
    rng = np.random.default_rng(seed)
    r = int(round(fraction * edges.shape[0]))
    held = np.zeros(edges.shape[0], dtype=bool)
    held[rng.permutation(edges.shape[0])[:r]] = True
    kept = edges[~held]
    thin = network_from_arrays(kept[:, 0], kept[:, 1], w[~held], net.node_count, net.layer_id)
    probe = edges[held]
    return thin, probe[np.lexsort((probe[:, 1], probe[:, 0]))]


# --
# Context sampling


@dataclass
class WalkCorpus:
    layer: int
    walks: list[list[int]]
    walk_length: int
    walks_per_node: int
    p: float | None = None
    q: float | None = None

    def to_text(self) -> str:
        return "".join(" ".join(map(str, w)) + "\n" for w in self.walks)

    def to_tsv(self) -> str:
        return "".join("\t".join(map(str, w)) + "\n" for w in self.walks)

    def to_json(self) -> str:
        return json.dumps({"layer": self.layer, "walk_length": self.walk_length,
                           "walks_per_node": self.walks_per_node, "p": self.p, "q": self.q,
                           "walks": self.walks})


class ColumnSampler:
    """Draws the next node from the columns of a column-stochastic CSC
    operator.  Empty columns are absorbing: the draw returns -1."""

    def __init__(self, op):
        self.indptr = op.indptr
        self.indices = op.indices
        self.data = op.data
        self.cum = np.cumsum(op.data)
        padded = np.concatenate([[0.0], self.cum])
        self.before = padded[op.indptr[:-1]]
        self.total = padded[op.indptr[1:]] - self.before

    def draw(self, cols: np.ndarray, r: np.ndarray) -> np.ndarray:
        cols = np.asarray(cols, dtype=np.int64)
        out = np.full(cols.shape, -1, dtype=np.int64)
        ok = self.total[cols] > 0
        c = cols[ok]
        k = np.searchsorted(self.cum, self.before[c] + r[ok] * self.total[c], side="right")
        k = np.clip(k, self.indptr[c], self.indptr[c + 1] - 1)
        out[ok] = self.indices[k]
        return out

    def column(self, c: int) -> tuple[np.ndarray, np.ndarray]:
        s = slice(self.indptr[c], self.indptr[c + 1])
        return self.indices[s], self.data[s]


def frozen_operator(mn: MultiNetwork, target: int, node: int, cfg: RwmConfig, strategy: str = "a1"):
    """Walker ``target``'s operator with the relevance weights reached by a
    run started at ``node``."""
    state = solve(mn, QuerySpec.single(target, node), cfg, strategy)
    return operator_matrix(mn, target, state.relevance_hat[target])


def _first_order(sampler: ColumnSampler, start: int, count: int, length: int, rng) -> list[list[int]]:
    cur = np.full(count, start, dtype=np.int64)
    walks = [[start] for _ in range(count)]
    alive = np.ones(count, dtype=bool)
    for _ in range(length):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        nxt = sampler.draw(cur[idx], rng.random(idx.size))
        for a, b in zip(idx, nxt):
            if b < 0:
                alive[a] = False
            else:
                walks[a].append(int(b))
                cur[a] = b
    return walks


def _second_order(sampler: ColumnSampler, start: int, count: int, length: int, p: float, q: float,
                  rng) -> list[list[int]]:
    walks = []
    for _ in range(count):
        walk = [start]
        for _ in range(length):
            cur = walk[-1]
            cand, prob = sampler.column(cur)
            if cand.size == 0:
                break
            if len(walk) > 1:
                prev = walk[-2]
                near, _ = sampler.column(prev)
                bias = np.where(np.isin(cand, near, assume_unique=True), 1.0, 1.0 / q)
                bias[cand == prev] = 1.0 / p
                prob = prob * bias
            cdf = np.cumsum(prob)
            k = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), cand.size - 1)
            walk.append(int(cand[k]))
        walks.append(walk)
    return walks


def _node_walks(mn, node, target, cfg, strategy, walk_length, walks_per_node, p, q, seed):
    sampler = ColumnSampler(frozen_operator(mn, target, node, cfg, strategy))
    rng = np.random.default_rng((seed, node))
    if p is None and q is None:
        return _first_order(sampler, node, walks_per_node, walk_length, rng)
    return _second_order(sampler, node, walks_per_node, walk_length,
                         1.0 if p is None else p, 1.0 if q is None else q, rng)


def sample_contexts(mn: MultiNetwork, target: int, cfg: RwmConfig | None = None, walk_length: int = 40,
                    walks_per_node: int = 10, p: float | None = None, q: float | None = None,
                    seed: int = 0, strategy: str = "a1", nodes=None, workers: int = 1) -> WalkCorpus:
    """Walk corpus for layer ``target``.

    For every start node the walker's operator is frozen at the relevance
    weights of a run from that node, then ``walks_per_node`` walks of up to
    ``walk_length`` steps are drawn on it (a walk lists up to
    ``walk_length + 1`` nodes and stops early at an empty column).  Giving
    ``p`` or ``q`` switches to node2vec-style return/in-out biasing on the
    operator's support.  Each start node has its own random stream, so the
    corpus does not depend on ``workers``.
    """
    cfg = cfg or RwmConfig()
    if walk_length < 1 or walks_per_node < 1:
        raise ValueError("walk_length and walks_per_node must be >= 1")
    if (p is not None and p <= 0) or (q is not None and q <= 0):
        raise ValueError("p and q must be positive")
    if nodes is None:
        nodes = range(mn.layers[target].node_count)
    per_node = map_nodes(_node_walks, mn, nodes,
                         (target, cfg, strategy, walk_length, walks_per_node, p, q, seed), workers)
    walks = [w for ws in per_node for w in ws]
    return WalkCorpus(target, walks, walk_length, walks_per_node, p, q)
