"""Approximate solvers: early stopping of relevance updates and partial
(BFS-restricted) vector updates.

Strategies understood by ``solve``:

``exact``  plain power iteration (``engine.run``)
``a1``     exact steps, relevance frozen after the split time
``a2``     as ``a1`` but every step only propagates the breadth-first
           neighbourhood of the seeds that covers ``theta`` of the mass
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import debug
from ._kernels import bfs_cover, push_columns
from .engine import (RwmConfig, WalkerState, _apply, init_state, iterate, operator_colsum,
                     propagate, run, step, update_relevance)
from .multinet import MULTIPLEX, MultiNetwork, QuerySpec

STRATEGIES = ("exact", "a1", "a2")


@dataclass(frozen=True)
class PhasePlan:
    split_time: int
    phase2_max: int


@dataclass
class PartialSplit:
    nodes: np.ndarray      # popped in BFS order; support of the covered part
    values: np.ndarray     # x[nodes]
    covered_mass: float
    enqueued: int          # nodes ever pushed on the BFS queue

    def covered_vector(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.nodes] = self.values
        return out


def split_time(cfg: RwmConfig, K: int, v_i: int | None = None, mode: str = MULTIPLEX) -> int:
    """Iterations after which the modified operator is within ``epsilon`` of
    its limit: ``ceil(log_decay(eps (1 - decay) / K))`` for multiplex
    networks, with ``K`` replaced by ``K**2 (|V_i| + 2)`` otherwise."""
    lam, eps = cfg.decay, cfg.epsilon
    scale = K if mode == MULTIPLEX else K * K * (v_i + 2)
    t = math.ceil(math.log(eps * (1.0 - lam) / scale) / math.log(lam))
    return max(1, t)


def phase_plan(mn: MultiNetwork, cfg: RwmConfig) -> PhasePlan:
    if mn.multiplex:
        te = split_time(cfg, mn.K)
    else:
        te = max(split_time(cfg, mn.K, net.node_count, mn.mode) for net in mn.layers)
    return PhasePlan(te, max(0, cfg.max_iters - te))


def cover(mn: MultiNetwork, i: int, x: np.ndarray, seeds: np.ndarray, theta: float,
          what_row: np.ndarray | None = None, min_pops: int = 0) -> PartialSplit:
    """Breadth-first coverage of ``x`` from ``seeds`` over the support of
    walker ``i``'s operator (layers with positive weight in ``what_row``)."""
    if what_row is None:
        terms = tuple(range(mn.K))
    else:
        terms = tuple(int(j) for j in np.flatnonzero(what_row > 0))
    g = mn.walk_graph(i, terms)
    nodes, _, enq = bfs_cover(g.indptr, g.indices, x, seeds, theta, min_pops)
    vals = x[nodes]
    return PartialSplit(nodes, vals, float(vals.sum()), int(enq))


def partial_step(mn: MultiNetwork, i: int, x: np.ndarray, x0: np.ndarray, what_row: np.ndarray,
                 cfg: RwmConfig, seeds: np.ndarray | None = None,
                 min_pops: int = 0) -> tuple[np.ndarray, PartialSplit]:
    """Approximate next vector of walker ``i`` from the covered part of ``x``.

    The uncovered mass is not propagated; it is returned to ``x0`` along
    with the restart mass, so the result still sums to one.  ``min_pops``
    forces a longer prefix of the (fixed) BFS order to be covered.
    """
    if seeds is None:
        seeds = np.flatnonzero(x0)
    split = cover(mn, i, x, seeds, cfg.theta, what_row, min_pops)
    a = cfg.alpha
    nodes, vals = split.nodes, split.values
    if mn.multiplex:
        c = np.zeros(nodes.shape[0])
        for j, w in enumerate(what_row):
            if w > 0:
                c += w * (mn.layers[j].degree[nodes] > 0)
        scaled = np.zeros_like(vals)
        ok = c > 0
        scaled[ok] = vals[ok] / c[ok]
        lost = float(vals[~ok].sum())
        z = np.zeros_like(x)
        for j, w in enumerate(what_row):
            if w > 0:
                p = mn.layers[j].transition
                push_columns(p.indptr, p.indices, p.data, nodes, w * scaled, z)
    else:
        xi0 = split.covered_vector(x.shape[0])
        c = operator_colsum(mn, i, what_row)
        z = _apply(mn, i, xi0, what_row, c)
        lost = float(xi0[c <= 0].sum())
    z *= a
    # roundoff can push the covered mass a hair above one
    z[seeds] += max(0.0, a * lost + 1.0 - a * split.covered_mass) * x0[seeds]
    if debug.checks.partial_bound:
        exact = a * propagate(mn, i, x, what_row, x0) + (1.0 - a) * x0
        bound = 2 * a * max(0.0, float(x.sum()) - split.covered_mass)
        debug.check_partial(z, exact, bound, f"partial step layer {i}")
    return z, split


def partial_iteration(state: WalkerState, mn: MultiNetwork, cfg: RwmConfig,
                      seeds: list[np.ndarray] | None = None, freeze: bool = False,
                      pops: list[int] | None = None) -> WalkerState:
    """Partial step for every walker.

    ``pops`` carries each walker's covered-prefix length between calls and
    is updated in place; the prefix never shrinks, which stops the covered
    set from flipping back and forth at the ``theta`` boundary.
    """
    what = state.relevance_hat
    if seeds is None:
        seeds = [np.flatnonzero(x0) for x0 in state.x0]
    if pops is None:
        pops = [0] * state.K
    new = []
    for i, (x, x0) in enumerate(zip(state.vectors, state.x0)):
        xi, split = partial_step(mn, i, x, x0, what[i], cfg, seeds[i], pops[i])
        pops[i] = max(pops[i], split.nodes.shape[0])
        new.append(xi)
    nxt = WalkerState(new, state.x0, state.relevance, state.t + 1)
    if not freeze:
        nxt.relevance = update_relevance(nxt, mn, cfg)
    debug.check_mass(new, f"partial step t={nxt.t}")
    return nxt


def run_two_phase(mn: MultiNetwork, query: QuerySpec, cfg: RwmConfig, partial: bool = False,
                  callback: Callable[[WalkerState], None] | None = None) -> tuple[WalkerState, PhasePlan]:
    """Update relevance and vectors for ``split_time`` iterations, then only
    vectors with the relevance matrix frozen."""
    plan = phase_plan(mn, cfg)
    state = init_state(mn, query, cfg)
    if partial:
        seeds = [np.flatnonzero(x0) for x0 in state.x0]
        pops = [0] * mn.K

        def step_fn(freeze):
            return lambda s: partial_iteration(s, mn, cfg, seeds, freeze, pops)
    else:
        def step_fn(freeze):
            return lambda s: step(s, mn, cfg, freeze)

    state, done = iterate(state, mn, cfg, step_fn(False), min(plan.split_time, cfg.max_iters), callback)
    if not done:
        state, _ = iterate(state, mn, cfg, step_fn(True), plan.phase2_max, callback)
    return state, plan


def solve(mn: MultiNetwork, query: QuerySpec, cfg: RwmConfig, strategy: str = "a2",
          callback: Callable[[WalkerState], None] | None = None) -> WalkerState:
    if strategy == "exact":
        return run(mn, query, cfg, callback)
    if strategy in ("a1", "a2"):
        return run_two_phase(mn, query, cfg, partial=strategy == "a2", callback=callback)[0]
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def visited_count(state: WalkerState) -> list[int]:
    return [int(np.count_nonzero(x)) for x in state.vectors]
