"""Core iteration of the reinforced multi-walker random walk.

One walker per layer.  Walker ``i`` moves with the modified operator

    P_i(t) = sum_j What(i, j) * S_{j->i} P_j S_{i->j}

(column-normalized), restarts to its initial vector with probability
``1 - alpha``, and the relevance matrix ``W`` grows by ``decay**t`` times the
cosine similarity of the walkers' restart-free visiting vectors.  The
operator is never materialized: each term is three chained sparse
mat-vecs, evaluated right to left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from . import debug
from .multinet import MultiNetwork, QuerySpec


class InitializationError(ValueError):
    """A layer cannot receive any initial mass from the query."""


@dataclass(frozen=True)
class RwmConfig:
    """Walk parameters.

    alpha      continuation probability; ``1 - alpha`` is the restart mass
    decay      geometric damping of relevance increments, in (0, 1)
    epsilon    operator tolerance used to pick the early-stopping split
    theta      mass the partial update must cover, in (0, 1]
    max_iters  iteration cap
    vector_tol L1 change of every walker below which iteration stops
    """

    alpha: float = 0.9
    decay: float = 0.7
    epsilon: float = 0.01
    theta: float = 0.9
    max_iters: int = 1000
    vector_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 < self.decay < 1:
            raise ValueError(f"decay must be in (0, 1), got {self.decay}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if not 0 < self.theta <= 1:
            raise ValueError(f"theta must be in (0, 1], got {self.theta}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.vector_tol < 0:
            raise ValueError("vector_tol must be non-negative")


@dataclass
class WalkerState:
    vectors: list[np.ndarray]
    x0: list[np.ndarray]
    relevance: np.ndarray
    t: int = 0

    @property
    def relevance_hat(self) -> np.ndarray:
        return self.relevance / self.relevance.sum(axis=1, keepdims=True)

    @property
    def K(self) -> int:
        return len(self.vectors)


def query_vector(mn: MultiNetwork, query: QuerySpec) -> np.ndarray:
    x = np.zeros(mn.layers[query.query_layer].node_count)
    x[list(query.query_nodes)] = 1.0 / len(query.query_nodes)
    return x


def init_state(mn: MultiNetwork, query: QuerySpec, cfg: RwmConfig | None = None) -> WalkerState:
    query.check(mn)
    q = query.query_layer
    xq = query_vector(mn, query)
    x0 = []
    for i in range(mn.K):
        if i == q or mn.multiplex:
            x0.append(xq.copy())
        else:
            x0.append(_init_other(mn, query, xq, i))
    return WalkerState([x.copy() for x in x0], x0, np.eye(mn.K), 0)


def _init_other(mn: MultiNetwork, query: QuerySpec, xq: np.ndarray, i: int) -> np.ndarray:
    q = query.query_layer
    ct = mn.cross.get((q, i))
    if ct is None or ct.matrix.nnz == 0:
        raise InitializationError(f"layer {i} unreachable from query layer {q}: no cross edges")
    x = ct.matrix @ xq
    if x.sum() == 0:
        # walk out from the query until the first hop that touches a node with cross edges into layer i
        net = mn.layers[q]
        effective = np.diff(ct.matrix.indptr) > 0
        dist = dijkstra(net.adjacency, directed=False, unweighted=True,
                        indices=list(query.query_nodes), min_only=True)
        reach = dist[effective]
        reach = reach[np.isfinite(reach)]
        if reach.size == 0:
            raise InitializationError(
                f"layer {i} unreachable from query layer {q}: no path to a node with cross edges")
        hops = int(reach.min())
        y = xq
        for _ in range(hops):
            y = net.transition @ y
        x = ct.matrix @ y
    return x / x.sum()


def _term(mn: MultiNetwork, i: int, j: int, v: np.ndarray) -> np.ndarray:
    p_j = mn.layers[j].transition
    if i == j or mn.multiplex:
        return p_j @ v
    if (i, j) not in mn.cross:
        return np.zeros_like(v)
    return mn.cross[(j, i)].matrix @ (p_j @ (mn.cross[(i, j)].matrix @ v))


def operator_colsum(mn: MultiNetwork, i: int, what_row: np.ndarray) -> np.ndarray:
    return what_row @ mn.term_colsums[i]


def apply_modified_transition(mn: MultiNetwork, i: int, x: np.ndarray, what_row: np.ndarray) -> np.ndarray:
    """Column-normalized modified operator of layer ``i`` applied to ``x``.

    Mass sitting on all-zero operator columns is dropped; see ``propagate``.
    """
    return _apply(mn, i, x, what_row, operator_colsum(mn, i, what_row))


def operator_matrix(mn: MultiNetwork, i: int, what_row: np.ndarray) -> sp.csc_matrix:
    """Sparse column-normalized modified operator of layer ``i``.

    Only for consumers that need whole columns (walk sampling); iteration
    itself goes through ``_apply``.
    """
    n = mn.layers[i].node_count
    acc = sp.csc_matrix((n, n))
    for j, w in enumerate(what_row):
        m = mn.term_matrix(i, j) if w > 0 else None
        if m is not None:
            acc = acc + w * m
    c = operator_colsum(mn, i, what_row)
    scale = np.zeros(n)
    scale[c > 0] = 1.0 / c[c > 0]
    out = sp.csc_matrix(acc @ sp.diags(scale))
    out.eliminate_zeros()
    out.sort_indices()
    return out


def _apply(mn, i, x, what_row, c):
    v = np.zeros_like(x)
    nz = c > 0
    v[nz] = x[nz] / c[nz]
    z = np.zeros_like(x)
    for j, w in enumerate(what_row):
        if w > 0:
            z += w * _term(mn, i, j, v)
    return z


def propagate(mn: MultiNetwork, i: int, x: np.ndarray, what_row: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """``apply_modified_transition`` with dangling mass sent back to ``x0``.

    Keeps ``sum(result) == sum(x)``; when every column is dangling this is
    the plain substitution of ``x0`` for the propagated term.
    """
    c = operator_colsum(mn, i, what_row)
    z = _apply(mn, i, x, what_row, c)
    lost = x[c <= 0].sum()
    if lost > 0:
        z = z + lost * x0
    return z


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b) / (na * nb)


def update_relevance(state: WalkerState, mn: MultiNetwork, cfg: RwmConfig) -> np.ndarray:
    """Relevance matrix at ``state.t`` from the previous one stored in ``state``."""
    if state.t < 1:
        raise ValueError("relevance updates start at t = 1")
    restart = 1.0 - cfg.alpha
    ys = [np.maximum(x - restart * x0, 0.0) for x, x0 in zip(state.vectors, state.x0)]
    w = state.relevance.copy()
    inc = cfg.decay ** state.t
    for i in range(mn.K):
        for j in range(mn.K):
            if not mn.has_cross(j, i):
                continue
            w[i, j] += inc * _cos(ys[i], mn.map_vector(j, i, ys[j]))
    return w


def step(state: WalkerState, mn: MultiNetwork, cfg: RwmConfig, freeze: bool = False) -> WalkerState:
    """One synchronous iteration; ``freeze`` keeps the relevance matrix fixed."""
    what = state.relevance_hat
    a = cfg.alpha
    new = [a * propagate(mn, i, x, what[i], x0) + (1.0 - a) * x0
           for i, (x, x0) in enumerate(zip(state.vectors, state.x0))]
    nxt = replace(state, vectors=new, t=state.t + 1)
    if not freeze:
        nxt.relevance = update_relevance(nxt, mn, cfg)
    debug.check_mass(new, f"step t={nxt.t}")
    return nxt


def l1_change(a: WalkerState, b: WalkerState) -> float:
    return max(float(np.abs(x - y).sum()) for x, y in zip(a.vectors, b.vectors))


def iterate(state: WalkerState, mn: MultiNetwork, cfg: RwmConfig, step_fn, budget: int,
            callback: Callable[[WalkerState], None] | None = None) -> tuple[WalkerState, bool]:
    """Apply ``step_fn`` up to ``budget`` times; stops early on ``vector_tol``."""
    for _ in range(budget):
        nxt = step_fn(state)
        delta = l1_change(state, nxt)
        state = nxt
        if callback is not None:
            callback(state)
        if delta < cfg.vector_tol:
            return state, True
    return state, False


def run(mn: MultiNetwork, query: QuerySpec, cfg: RwmConfig,
        callback: Callable[[WalkerState], None] | None = None) -> WalkerState:
    """Plain power iteration; ``state.t`` is the number of iterations done."""
    state = init_state(mn, query, cfg)
    state, _ = iterate(state, mn, cfg, lambda s: step(s, mn, cfg), cfg.max_iters, callback)
    return state


# --
# Dense materialization (test scale only)


class DenseCapExceeded(ValueError):
    pass


def modified_operator(mn: MultiNetwork, i: int, what_row: np.ndarray, dense_cap: int = 2000) -> np.ndarray:
    n = mn.layers[i].node_count
    if n > dense_cap:
        raise DenseCapExceeded(f"layer {i} has {n} nodes, above the dense cap {dense_cap}")
    op = np.zeros((n, n))
    for j, w in enumerate(what_row):
        if w <= 0:
            continue
        p_j = mn.layers[j].transition.toarray()
        if i == j or mn.multiplex:
            op += w * p_j
        elif (i, j) in mn.cross:
            op += w * (mn.cross[(j, i)].matrix.toarray() @ p_j @ mn.cross[(i, j)].matrix.toarray())
    sums = op.sum(axis=0)
    nz = sums > 0
    op[:, nz] /= sums[nz]
    return op


def max_entry_norm(a: np.ndarray) -> float:
    """Largest absolute entry; the norm the operator convergence bounds use."""
    return float(np.abs(a).max())


def transition_residual(mn: MultiNetwork, before: WalkerState, after: WalkerState,
                        dense_cap: int = 2000) -> np.ndarray:
    """Per-layer largest entry change of the column-normalized modified
    operator between two states."""
    wa, wb = before.relevance_hat, after.relevance_hat
    return np.array([max_entry_norm(modified_operator(mn, i, wb[i], dense_cap)
                              - modified_operator(mn, i, wa[i], dense_cap))
                     for i in range(mn.K)])
