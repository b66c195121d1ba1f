"""Exact minimum-cost rectangular linear assignment.

Cost matrices hold nonnegative reals; ``np.inf`` marks a forbidden pair. The
solvers return a maximum-cardinality matching over allowed pairs with minimum
total cost. Among equal-cost optima the lexicographically smallest
row-to-column vector wins (an unassigned row sorts after every column), which
keeps repeated solves reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from . import _lap_kernels

BRUTE_FORCE_MAX_SIDE = 8
BRUTE_FORCE_MAX_ENUMERATION = 2_000_000

# relative slack for "tight" reduced costs when breaking ties
_TIGHT_RTOL = 1e-11


@dataclass(frozen=True)
class Assignment:
    """A one-to-one set of ``(row, col)`` pairs, sorted by row."""

    pairs: tuple[tuple[int, int], ...]
    total_cost: float
    shape: tuple[int, int]

    @property
    def rows(self) -> np.ndarray:
        return np.array([p[0] for p in self.pairs], dtype=np.int64)

    @property
    def cols(self) -> np.ndarray:
        return np.array([p[1] for p in self.pairs], dtype=np.int64)

    def row_to_col(self) -> np.ndarray:
        """Length-M vector with the matched column per row, -1 when unassigned."""
        out = np.full(self.shape[0], -1, dtype=np.int64)
        for r, c in self.pairs:
            out[r] = c
        return out

    def __len__(self) -> int:
        return len(self.pairs)


def as_cost_matrix(costs) -> np.ndarray:
    """Validate and copy ``costs`` into a float64 2-D array."""
    c = np.array(costs, dtype=np.float64, copy=True)
    if c.ndim == 1 and c.size == 0:
        c = c.reshape(0, 0)
    if c.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {c.shape}")
    if np.isnan(c).any():
        raise ValueError("cost matrix contains NaN")
    if (c < 0).any():
        raise ValueError("cost matrix entries must be >= 0 (use +inf for forbidden pairs)")
    return c


def _total(c: np.ndarray, pairs) -> float:
    return math.fsum(c[r, k] for r, k in pairs)


def _make(c: np.ndarray, pairs) -> Assignment:
    pairs = tuple(sorted((int(r), int(k)) for r, k in pairs))
    return Assignment(pairs=pairs, total_cost=_total(c, pairs), shape=c.shape)


def solve_min_assignment(costs, backend: str | None = None) -> Assignment:
    """Minimum-cost maximal matching of a rectangular cost matrix.

    Rows or columns whose every entry is ``inf`` stay unassigned. Among equal
    optima the lexicographically smallest row-to-column vector wins.
    ``backend`` selects ``"numba"`` or ``"numpy"`` kernels explicitly; by
    default the active backend is used.

    Optima are exact up to floating-point rounding in the dual updates: two
    matchings whose costs differ by less than about ``1e-15`` times the
    largest cost may not be told apart.
    """
    c = as_cost_matrix(costs)
    r2c = _solve_row_to_col(c, backend)
    pairs = [(r, int(k)) for r, k in enumerate(r2c) if k >= 0]
    return _make(c, pairs)


def _solve_row_to_col(c: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Core solve on a validated matrix; returns row-to-col with -1 for unassigned rows."""
    m, n_cols = c.shape
    out = np.full(m, -1, dtype=np.int64)
    if m == 0 or n_cols == 0:
        return out
    feasible = np.isfinite(c)
    all_feasible = feasible.all()
    if not all_feasible and not feasible.any():
        return out

    hungarian, lex_refine = _lap_kernels.get_backend(backend)
    n = max(m, n_cols)
    padded = np.zeros((n, n))
    if all_feasible:
        padded[:m, :n_cols] = c
    else:
        # dominates any finite matching, so it only appears where a row has
        # no feasible partner left; those cells are dropped afterwards
        sentinel = (float(c[feasible].max()) + 1.0) * min(m, n_cols) + 1.0
        padded[:m, :n_cols] = np.where(feasible, c, sentinel)

    row_to_col, u, v = hungarian(padded)

    unassigned_key = n
    key = np.full((n, n), unassigned_key, dtype=np.int64)
    key[:m, :n_cols] = np.where(feasible, np.arange(n_cols)[None, :], unassigned_key)
    tol = _TIGHT_RTOL * max(1.0, float(padded.max()))
    idx = np.arange(n)
    raw_total = math.fsum(padded[idx, row_to_col].tolist())
    for t in (tol, 0.0):
        # the tolerance that absorbs rounding in the duals can also admit a
        # genuinely dearer rotation; only keep refinements that cost nothing
        refined = lex_refine(padded, u, v, row_to_col.copy(), m, key, unassigned_key, t)
        if math.fsum(padded[idx, refined].tolist()) <= raw_total:
            row_to_col = refined
            break

    cols = row_to_col[:m]
    ok = cols < n_cols
    ok[ok] = feasible[np.flatnonzero(ok), cols[ok]]
    out[ok] = cols[ok]
    return out


@lru_cache(maxsize=64)
def _injections(n_small: int, n_large: int) -> np.ndarray:
    return np.array(list(permutations(range(n_large), n_small)), dtype=np.int64).reshape(-1, n_small)


def brute_force_assignment(costs) -> Assignment:
    """Reference solver enumerating every injection of the smaller side.

    Same contract as :func:`solve_min_assignment`; intended as a test oracle.
    Raises ``ValueError`` when the smaller side exceeds
    ``BRUTE_FORCE_MAX_SIDE`` or the enumeration would be too large.
    """
    c = as_cost_matrix(costs)
    m, n_cols = c.shape
    k = min(m, n_cols)
    if k > BRUTE_FORCE_MAX_SIDE:
        raise ValueError(f"brute force limited to min(M, N) <= {BRUTE_FORCE_MAX_SIDE}, got {k}")
    if k == 0:
        return Assignment(pairs=(), total_cost=0.0, shape=c.shape)
    count = math.perm(max(m, n_cols), k)
    if count > BRUTE_FORCE_MAX_ENUMERATION:
        raise ValueError(f"brute force enumeration of {count} matchings exceeds the limit")

    if m <= n_cols:
        cols = _injections(m, n_cols)
        rows = np.broadcast_to(np.arange(m), cols.shape)
    else:
        rows = _injections(n_cols, m)
        cols = np.broadcast_to(np.arange(n_cols), rows.shape)
    vals = c[rows, cols]
    fin = np.isfinite(vals)
    n_pairs = fin.sum(axis=1)
    approx = np.where(fin, vals, 0.0).sum(axis=1)

    cand = n_pairs == n_pairs.max()
    lowest = approx[cand].min()
    cand &= approx <= lowest + 1e-9 * (1.0 + abs(lowest))

    best = None
    for idx in np.flatnonzero(cand):
        pairs = [(int(r), int(q)) for r, q, ok in zip(rows[idx], cols[idx], fin[idx]) if ok]
        total = _total(c, pairs)
        key = [n_cols] * m
        for r, q in pairs:
            key[r] = q
        rank = (total, key)
        if best is None or rank < best[0]:
            best = (rank, pairs)
    return _make(c, best[1])
