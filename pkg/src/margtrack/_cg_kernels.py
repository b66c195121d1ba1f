"""Single-swap neighborhood of a matching, used by the structure frontier.

``neighbor_moves(dist, row_to_col) -> (deltas, kind, a, b)`` lists every
matching one move away that keeps the number of pairs, with its cost change:

* kind 0, swap: assigned rows ``a < b`` exchange columns
* kind 1, move: assigned row ``a`` moves to free column ``b``
* kind 2, handover: idle row ``a`` takes assigned row ``b``'s column

Moves touching an ``inf`` distance are dropped. Both backends emit moves in
the same order (swaps, then moves, then handovers, each row-major) so ties
sort identically.
"""
import numpy as np

from ._accel import HAS_NUMBA, njit

SWAP, MOVE, HANDOVER = 0, 1, 2


def _neighbor_moves_py(dist, row_to_col):
    m, n_cols = dist.shape
    n_assigned = 0
    for r in range(m):
        if row_to_col[r] >= 0:
            n_assigned += 1
    assigned = np.empty(n_assigned, dtype=np.int64)
    idle = np.empty(m - n_assigned, dtype=np.int64)
    ia = 0
    ii = 0
    taken = np.zeros(n_cols, dtype=np.bool_)
    for r in range(m):
        if row_to_col[r] >= 0:
            assigned[ia] = r
            taken[row_to_col[r]] = True
            ia += 1
        else:
            idle[ii] = r
            ii += 1
    n_free = n_cols - n_assigned
    free = np.empty(n_free, dtype=np.int64)
    k = 0
    for c in range(n_cols):
        if not taken[c]:
            free[k] = c
            k += 1

    cap = n_assigned * (n_assigned - 1) // 2 + n_assigned * n_free + len(idle) * n_assigned
    deltas = np.empty(cap)
    kind = np.empty(cap, dtype=np.int64)
    a = np.empty(cap, dtype=np.int64)
    b = np.empty(cap, dtype=np.int64)
    k = 0
    for i in range(n_assigned):
        p = assigned[i]
        cp = row_to_col[p]
        base_p = dist[p, cp]
        for j in range(i + 1, n_assigned):
            q = assigned[j]
            cq = row_to_col[q]
            d = dist[p, cq] + dist[q, cp] - base_p - dist[q, cq]
            if np.isfinite(d):
                deltas[k] = d
                kind[k] = SWAP
                a[k] = p
                b[k] = q
                k += 1
    for i in range(n_assigned):
        p = assigned[i]
        base_p = dist[p, row_to_col[p]]
        for j in range(n_free):
            d = dist[p, free[j]] - base_p
            if np.isfinite(d):
                deltas[k] = d
                kind[k] = MOVE
                a[k] = p
                b[k] = free[j]
                k += 1
    for i in range(len(idle)):
        p = idle[i]
        for j in range(n_assigned):
            q = assigned[j]
            d = dist[p, row_to_col[q]] - dist[q, row_to_col[q]]
            if np.isfinite(d):
                deltas[k] = d
                kind[k] = HANDOVER
                a[k] = p
                b[k] = q
                k += 1
    return deltas[:k], kind[:k], a[:k], b[:k]


def neighbor_moves_numpy(dist, row_to_col):
    with np.errstate(invalid="ignore"):
        return _neighbor_moves_np(dist, row_to_col)


def _neighbor_moves_np(dist, row_to_col):
    n_cols = dist.shape[1]
    assigned = np.flatnonzero(row_to_col >= 0)
    cols = row_to_col[assigned]
    base = dist[assigned, cols]
    parts = []
    if len(assigned) > 1:
        x = dist[np.ix_(assigned, cols)]
        delta = (x + x.T - base[:, None]) - base[None, :]
        p, q = np.triu_indices(len(assigned), k=1)
        parts.append((delta[p, q], SWAP, assigned[p], assigned[q]))
    is_free = np.ones(n_cols, dtype=bool)
    is_free[cols] = False
    free_cols = np.flatnonzero(is_free)
    if len(free_cols) and len(assigned):
        delta = dist[np.ix_(assigned, free_cols)] - base[:, None]
        p, q = np.indices(delta.shape)
        parts.append((delta.ravel(), MOVE, assigned[p.ravel()], free_cols[q.ravel()]))
    idle = np.flatnonzero(row_to_col < 0)
    if len(idle) and len(assigned):
        delta = dist[np.ix_(idle, cols)] - base[None, :]
        p, q = np.indices(delta.shape)
        parts.append((delta.ravel(), HANDOVER, idle[p.ravel()], assigned[q.ravel()]))
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return np.zeros(0), empty, empty, empty
    deltas = np.concatenate([p[0] for p in parts])
    kind = np.concatenate([np.full(len(p[0]), p[1], dtype=np.int64) for p in parts])
    a = np.concatenate([p[2] for p in parts])
    b = np.concatenate([p[3] for p in parts])
    keep = np.isfinite(deltas)
    return deltas[keep], kind[keep], a[keep], b[keep]


if HAS_NUMBA:
    neighbor_moves_numba = njit(cache=True)(_neighbor_moves_py)
    neighbor_moves = neighbor_moves_numba
else:
    neighbor_moves_numba = None
    neighbor_moves = neighbor_moves_numpy


def get_moves(name=None):
    if name is None:
        return neighbor_moves
    if name == "numpy":
        return neighbor_moves_numpy
    if name == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend unavailable (not installed or MARGTRACK_DISABLE_NUMBA set)")
        return neighbor_moves_numba
    raise ValueError(f"unknown backend {name!r}")
