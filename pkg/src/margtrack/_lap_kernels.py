"""Hot loops of the assignment solver.

Two interchangeable backends share one contract:

``hungarian(cost) -> (row_to_col, u, v)``
    Square, finite cost matrix. Shortest-augmenting-path Hungarian method
    with row/column potentials; ``cost[i, j] - u[i] - v[j] >= 0`` everywhere
    and ``== 0`` on the returned assignment.

``lex_refine(cost, u, v, row_to_col, n_fix, key, big, tol) -> row_to_col``
    Among all optimal assignments (perfect matchings of the tight graph
    ``cost - u - v <= tol``) pick the one whose ``key[i, row_to_col[i]]``
    vector over rows ``0..n_fix-1`` is lexicographically smallest. Entries
    equal to ``big`` form one equivalence class (an "unassigned" row), so a
    row settled in that class may still slide between ``big`` columns.

The numba and numpy variants perform the same arithmetic in the same order and
return identical results.
"""
import numpy as np

from ._accel import HAS_NUMBA, njit

_FREE, _FIXED, _FIXED_UNASSIGNED = 0, 1, 2


def _hungarian_py(cost):
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.empty(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        row_to_col[p[j] - 1] = j - 1
    return row_to_col, u[1:].copy(), v[1:].copy()


def _lex_refine_py(cost, u, v, row_to_col, n_fix, key, big, tol):
    n = cost.shape[0]
    row_to_col = row_to_col.copy()
    holder = np.empty(n, dtype=np.int64)
    for r in range(n):
        holder[row_to_col[r]] = r
    state = np.zeros(n, dtype=np.int8)
    in_t = np.empty(n, dtype=np.bool_)
    parent = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for i in range(n_fix):
        cur = row_to_col[i]
        kcur = key[i, cur]
        improvable = False
        for j in range(n):
            if key[i, j] < kcur and cost[i, j] - u[i] - v[j] <= tol:
                improvable = True
                break
        if improvable:
            in_t[:] = False
            in_t[cur] = True
            queue[0] = cur
            head = 0
            tail = 1
            while head < tail:
                t = queue[head]
                head += 1
                for r in range(n):
                    if r == i or state[r] == _FIXED:
                        continue
                    c = row_to_col[r]
                    if in_t[c]:
                        continue
                    if state[r] == _FIXED_UNASSIGNED and key[r, t] != big:
                        continue
                    if cost[r, t] - u[r] - v[t] <= tol:
                        in_t[c] = True
                        parent[c] = t
                        queue[tail] = c
                        tail += 1
            best = -1
            best_key = kcur
            for j in range(n):
                if in_t[j] and j != cur and key[i, j] < best_key and cost[i, j] - u[i] - v[j] <= tol:
                    best = j
                    best_key = key[i, j]
            if best >= 0:
                c = best
                r = holder[c]
                row_to_col[i] = best
                holder[best] = i
                while c != cur:
                    nxt = parent[c]
                    r_next = holder[nxt]
                    row_to_col[r] = nxt
                    holder[nxt] = r
                    r = r_next
                    c = nxt
        state[i] = _FIXED if key[i, row_to_col[i]] != big else _FIXED_UNASSIGNED
    return row_to_col


def hungarian_numpy(cost):
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = np.empty(n, dtype=np.int64)
    row_to_col[p[1:] - 1] = np.arange(n)
    return row_to_col, u[1:].copy(), v[1:].copy()


def lex_refine_numpy(cost, u, v, row_to_col, n_fix, key, big, tol):
    n = cost.shape[0]
    row_to_col = row_to_col.copy()
    tight = (cost - u[:, None] - v[None, :]) <= tol
    holder = np.empty(n, dtype=np.int64)
    holder[row_to_col] = np.arange(n)
    state = np.zeros(n, dtype=np.int8)
    parent = np.empty(n, dtype=np.int64)
    rows = np.arange(n)
    for i in range(n_fix):
        cur = row_to_col[i]
        kcur = key[i, cur]
        cand = tight[i] & (key[i] < kcur)
        if cand.any():
            in_t = np.zeros(n, dtype=bool)
            in_t[cur] = True
            queue = [cur]
            head = 0
            while head < len(queue):
                t = queue[head]
                head += 1
                ok = tight[:, t] & (state != _FIXED) & (rows != i) & ~in_t[row_to_col]
                ok &= (state != _FIXED_UNASSIGNED) | (key[:, t] == big)
                for r in np.flatnonzero(ok):
                    c = row_to_col[r]
                    in_t[c] = True
                    parent[c] = t
                    queue.append(c)
            cand &= in_t
            cand[cur] = False
            if cand.any():
                js = np.flatnonzero(cand)
                best = js[np.argmin(key[i, js])]
                c = best
                r = holder[c]
                row_to_col[i] = best
                holder[best] = i
                while c != cur:
                    nxt = parent[c]
                    r_next = holder[nxt]
                    row_to_col[r] = nxt
                    holder[nxt] = r
                    r = r_next
                    c = nxt
        state[i] = _FIXED if key[i, row_to_col[i]] != big else _FIXED_UNASSIGNED
    return row_to_col


if HAS_NUMBA:
    hungarian_numba = njit(cache=True)(_hungarian_py)
    lex_refine_numba = njit(cache=True)(_lex_refine_py)
    hungarian = hungarian_numba
    lex_refine = lex_refine_numba
    BACKEND = "numba"
else:
    hungarian_numba = lex_refine_numba = None
    hungarian = hungarian_numpy
    lex_refine = lex_refine_numpy
    BACKEND = "numpy"


def get_backend(name=None):
    """Return ``(hungarian, lex_refine)`` for ``"numba"``, ``"numpy"`` or the active default."""
    if name is None:
        return hungarian, lex_refine
    if name == "numpy":
        return hungarian_numpy, lex_refine_numpy
    if name == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend unavailable (not installed or MARGTRACK_DISABLE_NUMBA set)")
        return hungarian_numba, lex_refine_numba
    raise ValueError(f"unknown backend {name!r}")
