"""Multi-network data model: layers, cross-layer operators, file formats.

Every layer is an undirected weighted graph stored twice: as a symmetric
CSR adjacency (used for BFS and conductance) and as a column-stochastic
CSC transition matrix ``P`` where column ``u`` is the step distribution out
of node ``u``.  Cross operators ``S[i, j]`` map mass from layer ``i`` into
layer ``j`` and are column-stochastic on columns that have cross edges.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

MULTIPLEX = "multiplex"
GENERAL = "general"


class LoadError(ValueError):
    """Malformed graph data (bad index, non-positive weight, bad manifest)."""


def column_normalize(mat) -> sp.csc_matrix:
    """Scale every non-zero column to sum 1; all-zero columns stay zero."""
    mat = sp.csc_matrix(mat, dtype=np.float64)
    sums = np.asarray(mat.sum(axis=0)).ravel()
    scale = np.zeros_like(sums)
    nz = sums > 0
    scale[nz] = 1.0 / sums[nz]
    out = (mat @ sp.diags(scale)).tocsc()
    out.sort_indices()
    return out


@dataclass(frozen=True, eq=False)
class Network:
    layer_id: int
    node_count: int
    adjacency: sp.csr_matrix
    transition: sp.csc_matrix

    @cached_property
    def degree(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    @property
    def edge_count(self) -> int:
        return int(sp.triu(self.adjacency, k=1).nnz)

    def edges(self) -> np.ndarray:
        """Undirected edges as an ``(m, 2)`` array with ``u < v``, sorted."""
        up = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((up.col, up.row))
        return np.column_stack([up.row[order], up.col[order]]).astype(np.int64)

    def has_edge(self, u: int, v: int) -> bool:
        row = self.adjacency.indices[self.adjacency.indptr[u]:self.adjacency.indptr[u + 1]]
        return bool(np.any(row == v))


@dataclass(frozen=True, eq=False)
class CrossTransition:
    from_layer: int
    to_layer: int
    matrix: sp.csc_matrix  # shape (|V_to|, |V_from|)
    weights: sp.csc_matrix | None = None  # raw bipartite weights, same shape


@dataclass(frozen=True, eq=False)
class QuerySpec:
    query_layer: int
    query_nodes: tuple[int, ...]

    def __post_init__(self):
        nodes = tuple(sorted({int(u) for u in self.query_nodes}))
        if not nodes:
            raise ValueError("query needs at least one node")
        object.__setattr__(self, "query_nodes", nodes)

    @classmethod
    def single(cls, layer: int, node: int) -> "QuerySpec":
        return cls(layer, (node,))

    def check(self, mn: "MultiNetwork") -> None:
        if not 0 <= self.query_layer < mn.K:
            raise ValueError(f"query layer {self.query_layer} out of range (K={mn.K})")
        n = mn.layers[self.query_layer].node_count
        bad = [u for u in self.query_nodes if not 0 <= u < n]
        if bad:
            raise ValueError(f"query nodes {bad} out of range for layer {self.query_layer} (n={n})")


@dataclass(frozen=True, eq=False)
class MultiNetwork:
    layers: tuple[Network, ...]
    cross: Mapping[tuple[int, int], CrossTransition] = field(default_factory=dict)
    mode: str = MULTIPLEX
    _graphs: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.mode not in (MULTIPLEX, GENERAL):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.layers:
            raise ValueError("need at least one layer")
        if self.mode == MULTIPLEX:
            sizes = {net.node_count for net in self.layers}
            if len(sizes) != 1:
                raise ValueError(f"multiplex layers must share one node count, got {sorted(sizes)}")
            if self.cross:
                raise ValueError("multiplex networks use implicit identity cross operators")
        else:
            for (i, j), ct in self.cross.items():
                if (j, i) not in self.cross:
                    raise ValueError(f"cross operator {i}->{j} declared without {j}->{i}")
                exp = (self.layers[j].node_count, self.layers[i].node_count)
                if ct.matrix.shape != exp:
                    raise ValueError(f"cross operator {i}->{j} has shape {ct.matrix.shape}, expected {exp}")

    @property
    def K(self) -> int:
        return len(self.layers)

    @property
    def multiplex(self) -> bool:
        return self.mode == MULTIPLEX

    def cross_matrix(self, i: int, j: int):
        """``S_{i->j}``; ``None`` means identity (multiplex or i == j) and a
        missing general-mode pair raises ``KeyError``."""
        if i == j or self.multiplex:
            return None
        return self.cross[(i, j)].matrix

    def has_cross(self, i: int, j: int) -> bool:
        return i == j or self.multiplex or (i, j) in self.cross

    def map_vector(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        """Push a vector over ``V_i`` into ``V_j``; zero if no cross operator."""
        if i == j or self.multiplex:
            return x
        if (i, j) not in self.cross:
            return np.zeros(self.layers[j].node_count)
        return self.cross[(i, j)].matrix @ x

    @cached_property
    def term_colsums(self) -> tuple[np.ndarray, ...]:
        """Per layer ``i`` a ``(K, |V_i|)`` array of column sums of
        ``S_{j->i} P_j S_{i->j}``; used to column-normalize the modified
        operator without materializing it."""
        out = []
        for i, net_i in enumerate(self.layers):
            sums = np.zeros((self.K, net_i.node_count))
            for j, net_j in enumerate(self.layers):
                if i == j or self.multiplex:
                    sums[j] = net_j.degree > 0
                elif (i, j) in self.cross:
                    s_ij = self.cross[(i, j)].matrix
                    s_ji = self.cross[(j, i)].matrix
                    ones = np.ones(net_i.node_count)
                    sums[j] = s_ij.T @ (net_j.transition.T @ (s_ji.T @ ones))
            out.append(sums)
        return tuple(out)

    def term_matrix(self, i: int, j: int) -> sp.csc_matrix | None:
        """``S_{j->i} P_j S_{i->j}`` (just ``P_j`` for multiplex or ``i == j``);
        ``None`` when the layers are not linked.  Cached."""
        key = ("term", i, j)
        if key not in self._graphs:
            if i == j or self.multiplex:
                m = self.layers[j].transition
            elif (i, j) in self.cross:
                m = sp.csc_matrix(self.cross[(j, i)].matrix @ self.layers[j].transition
                                  @ self.cross[(i, j)].matrix)
                m.sort_indices()
            else:
                m = None
            self._graphs[key] = m
        return self._graphs[key]

    def walk_graph(self, i: int, terms: tuple[int, ...]) -> sp.csc_matrix:
        """Sparsity pattern of walker ``i``'s modified operator using only the
        ``terms`` layers; column ``u`` lists the nodes reachable in one step."""
        key = (i, tuple(terms))
        if key not in self._graphs:
            n = self.layers[i].node_count
            acc = sp.csc_matrix((n, n), dtype=np.int8)
            for j in terms:
                m = self.term_matrix(i, j)
                if m is not None:
                    acc = acc + (abs(m) > 0).astype(np.int8)
            acc = sp.csc_matrix(acc)
            acc.sum_duplicates()
            acc.sort_indices()
            self._graphs[key] = acc
        return self._graphs[key]


# --
# Construction


def network_from_arrays(u, v, w, node_count: int, layer_id: int = 0) -> Network:
    """Build a layer from undirected edge arrays (each edge inserted both ways)."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    loops = u == v
    if loops.any():
        log.warning("layer %d: dropping %d self-loop(s)", layer_id, int(loops.sum()))
        u, v, w = u[~loops], v[~loops], w[~loops]
    # sum duplicates once on the upper triangle so both mirrors get the same value
    upper = sp.csr_matrix((w, (np.minimum(u, v), np.maximum(u, v))), shape=(node_count, node_count))
    upper.sum_duplicates()
    adj = sp.csr_matrix(upper + upper.T)
    adj.sort_indices()
    return Network(layer_id, node_count, adj, column_normalize(adj))


def _parse_records(lines: Iterable[str], what: str):
    """Return ``(records, header_n)`` with records as ``(lineno, u, v, w)``."""
    header = None
    recs = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("%nodes"):
            try:
                header = int(line.split()[1])
            except (IndexError, ValueError):
                raise LoadError(f"{what} line {lineno}: bad header {line!r}") from None
            continue
        if line.startswith("#") or line.startswith("%"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise LoadError(f"{what} line {lineno}: expected 'u v [w]', got {line!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
            wt = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise LoadError(f"{what} line {lineno}: unparsable record {line!r}") from None
        if not wt > 0:
            raise LoadError(f"{what} line {lineno}: weight must be positive, got {wt}")
        if a < 0 or b < 0:
            raise LoadError(f"{what} line {lineno}: negative node index")
        recs.append((lineno, a, b, wt))
    return recs, header


def load_edge_list(lines: Iterable[str], node_count: int | None = None, layer_id: int = 0) -> Network:
    """Parse a layer TSV (``u<TAB>v<TAB>w`` records, ``#`` comments, optional
    ``%nodes N`` header).  Duplicate edges have their weights summed."""
    recs, header = _parse_records(lines, f"layer {layer_id}")
    if node_count is None:
        node_count = header
    if node_count is None:
        node_count = 1 + max((max(a, b) for _, a, b, _ in recs), default=-1)
    for lineno, a, b, _ in recs:
        if a >= node_count or b >= node_count:
            raise LoadError(f"layer {layer_id} line {lineno}: node index out of range (n={node_count})")
    if recs:
        _, u, v, w = map(np.asarray, zip(*recs))
    else:
        u = v = w = np.zeros(0)
    return network_from_arrays(u, v, w, node_count, layer_id)


def load_cross_edges(lines: Iterable[str], net_i: Network, net_j: Network) -> tuple[CrossTransition, CrossTransition]:
    """Parse cross edges ``u in V_i, v in V_j`` into ``S_{i->j}`` and ``S_{j->i}``."""
    i, j = net_i.layer_id, net_j.layer_id
    recs, _ = _parse_records(lines, f"cross {i}-{j}")
    for lineno, a, b, _ in recs:
        if a >= net_i.node_count or b >= net_j.node_count:
            raise LoadError(f"cross {i}-{j} line {lineno}: node index out of range")
    if recs:
        _, u, v, w = (np.asarray(c) for c in zip(*recs))
    else:
        u = v = np.zeros(0, dtype=np.int64)
        w = np.zeros(0)
    raw_ij = sp.csc_matrix((w, (v, u)), shape=(net_j.node_count, net_i.node_count))
    raw_ji = sp.csc_matrix((w, (u, v)), shape=(net_i.node_count, net_j.node_count))
    return (CrossTransition(i, j, column_normalize(raw_ij), raw_ij),
            CrossTransition(j, i, column_normalize(raw_ji), raw_ji))


def as_multiplex(layers: Iterable[Network]) -> MultiNetwork:
    layers = tuple(layers)
    sizes = [net.node_count for net in layers]
    if len(set(sizes)) > 1:
        raise ValueError(f"multiplex layers must share one node count, got {sizes}")
    return MultiNetwork(_relabel(layers), {}, MULTIPLEX)


def as_general(layers: Iterable[Network], cross: Iterable[CrossTransition]) -> MultiNetwork:
    layers = _relabel(tuple(layers))
    return MultiNetwork(layers, {(c.from_layer, c.to_layer): c for c in cross}, GENERAL)


def _relabel(layers: tuple[Network, ...]) -> tuple[Network, ...]:
    return tuple(net if net.layer_id == k else Network(k, net.node_count, net.adjacency, net.transition)
                 for k, net in enumerate(layers))



def replace_layer(mn: MultiNetwork, i: int, net: Network) -> MultiNetwork:
    """Copy of ``mn`` with layer ``i`` swapped for ``net`` (same node count)."""
    if net.node_count != mn.layers[i].node_count:
        raise ValueError("replacement layer must keep the node count")
    layers = list(mn.layers)
    layers[i] = net
    return MultiNetwork(_relabel(tuple(layers)), dict(mn.cross), mn.mode)

# --
# Validation


@dataclass
class ValidationReport:
    isolated: dict[int, list[int]] = field(default_factory=dict)
    zero_cross_columns: dict[tuple[int, int], int] = field(default_factory=dict)
    unreachable: list[tuple[int, int]] = field(default_factory=list)  # (from, to)

    @property
    def ok(self) -> bool:
        return not (self.isolated or self.zero_cross_columns or self.unreachable)

    def messages(self) -> list[str]:
        out = [f"layer {i}: {len(nodes)} isolated node(s)" for i, nodes in self.isolated.items()]
        out += [f"cross {i}->{j}: {n} all-zero column(s)" for (i, j), n in self.zero_cross_columns.items()]
        out += [f"layer {j} unreachable from {i}" for i, j in self.unreachable]
        return out


def validate(mn: MultiNetwork) -> ValidationReport:
    rep = ValidationReport()
    for net in mn.layers:
        iso = np.flatnonzero(net.degree == 0)
        if iso.size:
            rep.isolated[net.layer_id] = iso.tolist()
    if mn.multiplex:
        return rep
    for i in range(mn.K):
        for j in range(mn.K):
            if i == j:
                continue
            ct = mn.cross.get((i, j))
            if ct is None or ct.matrix.nnz == 0:
                rep.unreachable.append((i, j))
                continue
            zero_cols = int(np.sum(np.diff(ct.matrix.indptr) == 0))
            if zero_cols:
                rep.zero_cross_columns[(i, j)] = zero_cols
    return rep


# --
# Files


def write_edge_list(net: Network, fh) -> None:
    fh.write(f"%nodes {net.node_count}\n")
    up = sp.triu(net.adjacency, k=1).tocoo()
    order = np.lexsort((up.col, up.row))
    for a, b, w in zip(up.row[order], up.col[order], up.data[order]):
        fh.write(f"{a}\t{b}\t{w:.17g}\n")


def read_layer_file(path, layer_id: int = 0) -> Network:
    with open(path) as fh:
        return load_edge_list(fh, layer_id=layer_id)


def load_manifest(path) -> MultiNetwork:
    """Load a JSON manifest::

        {"mode": "multiplex" | "general",
         "layers": ["l0.tsv", ...],
         "cross": [{"from": 0, "to": 1, "file": "c01.tsv"}, ...]}

    Paths are relative to the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: invalid JSON ({exc})") from None
    mode = spec.get("mode", MULTIPLEX)
    files = spec.get("layers")
    if not files:
        raise LoadError(f"{path}: manifest lists no layers")
    layers = [read_layer_file(os.path.join(base, f), layer_id=k) for k, f in enumerate(files)]
    if mode == MULTIPLEX:
        n = max(net.node_count for net in layers)
        # layers without a header infer n from max index; pad to the common size
        layers = [net if net.node_count == n else _pad(net, n) for net in layers]
        try:
            return as_multiplex(layers)
        except ValueError as exc:
            raise LoadError(str(exc)) from None
    if mode != GENERAL:
        raise LoadError(f"{path}: unknown mode {mode!r}")
    cross = []
    for entry in spec.get("cross", []):
        i, j = int(entry["from"]), int(entry["to"])
        if not (0 <= i < len(layers) and 0 <= j < len(layers)) or i == j:
            raise LoadError(f"{path}: bad cross pair ({i}, {j})")
        with open(os.path.join(base, entry["file"])) as fh:
            cross.extend(load_cross_edges(fh, layers[i], layers[j]))
    try:
        return as_general(layers, cross)
    except ValueError as exc:
        raise LoadError(str(exc)) from None


def write_manifest(mn: MultiNetwork, directory, prefix: str = "layer") -> str:
    """Write layer/cross TSVs plus ``manifest.json``; returns the manifest path."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for net in mn.layers:
        name = f"{prefix}{net.layer_id}.tsv"
        with open(os.path.join(directory, name), "w") as fh:
            write_edge_list(net, fh)
        names.append(name)
    cross = []
    for (i, j), ct in sorted(mn.cross.items()):
        if i > j:
            continue
        name = f"cross{i}_{j}.tsv"
        # without raw weights only the support survives, written with unit weight
        coo = (ct.weights if ct.weights is not None else (ct.matrix > 0).astype(float)).tocoo()
        order = np.lexsort((coo.row, coo.col))
        with open(os.path.join(directory, name), "w") as fh:
            for u, v, w in zip(coo.col[order], coo.row[order], coo.data[order]):
                fh.write(f"{u}\t{v}\t{w:.17g}\n")
        cross.append({"from": i, "to": j, "file": name})
    path = os.path.join(directory, "manifest.json")
    with open(path, "w") as fh:
        json.dump({"mode": mn.mode, "layers": names, "cross": cross}, fh, indent=2)
        fh.write("\n")
    return path


def _pad(net: Network, n: int) -> Network:
    coo = net.adjacency.tocoo()
    adj = sp.csr_matrix((coo.data, (coo.row, coo.col)), shape=(n, n))
    adj.sort_indices()
    return Network(net.layer_id, n, adj, column_normalize(adj))
