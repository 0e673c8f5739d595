import numpy as np
from numba import njit


@njit(cache=True)
def bfs_cover(indptr, indices, x, seeds, theta, min_pops):
    """Pop nodes breadth-first from ``seeds`` until popped mass >= theta and
    at least ``min_pops`` nodes have been popped.

    ``indptr``/``indices`` give each node's out-neighbors (a CSC pattern
    read column-wise).  Neighbors are enqueued in ascending index order and
    marked on push, so each node is popped at most once.  Returns the popped nodes in
    pop order, the covered mass, and the number of nodes ever enqueued.
    """
    n = indptr.shape[0] - 1
    marked = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    for s in seeds:
        if not marked[s]:
            marked[s] = True
            queue[tail] = s
            tail += 1
    cover = 0.0
    while head < tail and (cover < theta or head < min_pops):
        u = queue[head]
        head += 1
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if not marked[v]:
                marked[v] = True
                queue[tail] = v
                tail += 1
        cover += x[u]
    return queue[:head].copy(), cover, tail


@njit(cache=True)
def push_columns(indptr, indices, data, cols, vals, out):
    """``out += M[:, cols] @ vals`` for a CSC matrix ``M``."""
    for k in range(cols.shape[0]):
        c = cols[k]
        a = vals[k]
        if a == 0.0:
            continue
        for p in range(indptr[c], indptr[c + 1]):
            out[indices[p]] += data[p] * a

