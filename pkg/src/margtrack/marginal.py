"""Marginal matching probabilities over a small set of assignment structures.

A *structure* is one maximal one-to-one matching between detections (rows)
and tracks (columns). :func:`collect_structures` gathers high-scoring,
heavily overlapping structures with a conditional-gradient loop whose linear
subproblem is an exact assignment solve; :func:`marginal_probabilities`
turns the set into per-pair probabilities with a softmax over structure costs.

Structures are stored as row-to-column vectors (``-1`` = unassigned row).
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from . import _cg_kernels
from .lap import _solve_row_to_col

DEFAULT_STEPS = 100
EXACT_MAX_SIDE = 7


@dataclass(frozen=True)
class Structure:
    row_to_col: tuple[int, ...]

    @property
    def pairs(self) -> frozenset[tuple[int, int]]:
        return frozenset((r, c) for r, c in enumerate(self.row_to_col) if c >= 0)

    def indicator(self, n_cols: int) -> np.ndarray:
        z = np.zeros((len(self.row_to_col), n_cols))
        for r, c in self.pairs:
            z[r, c] = 1.0
        return z


@dataclass
class StructureSet:
    """Distinct structures in discovery order with their softmax weights."""

    shape: tuple[int, int]
    assignments: np.ndarray  # (K, M) int64, -1 = unassigned
    costs: np.ndarray  # (K,) summed pair distances
    weights: np.ndarray  # (K,) softmax of -costs
    steps: int = 0
    explored: int = field(default=0)

    def __len__(self) -> int:
        return len(self.assignments)

    @property
    def structures(self) -> list[Structure]:
        return [Structure(tuple(int(c) for c in row)) for row in self.assignments]


def _as_scores(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError(f"score matrix must be 2-D, got shape {s.shape}")
    if np.isnan(s).any():
        raise ValueError("score matrix contains NaN")
    return np.clip(s, 0.0, 1.0)


def _as_forbidden(forbidden, shape) -> np.ndarray:
    if forbidden is None:
        return np.zeros(shape, dtype=bool)
    f = np.asarray(forbidden, dtype=bool)
    if f.shape != shape:
        raise ValueError(f"forbidden mask shape {f.shape} does not match scores {shape}")
    return f


def cost_vector(scores, distance_scale: float = 1.0) -> np.ndarray:
    """Flattened matching costs ``clip(scale * (1 - S), 0, 1)``."""
    s = _as_scores(scores)
    return np.clip(distance_scale * (1.0 - s), 0.0, 1.0).ravel()


def structure_weights(costs) -> np.ndarray:
    c = np.asarray(costs, dtype=np.float64)
    w = np.exp(-(c - c.min()))
    return w / w.sum()


def _structure_cost(dist: np.ndarray, row_to_col: np.ndarray) -> float:
    rows = np.flatnonzero(row_to_col >= 0)
    return math.fsum(dist[rows, row_to_col[rows]])


class _NeighborFrontier:
    """Best-first frontier over single-swap neighbors of the visited set.

    Neighbors keep the matching size: two assigned rows exchange columns, an
    assigned row moves to a free column, or an unassigned row takes over an
    assigned row's column.
    """

    _SWAP, _MOVE, _HANDOVER = _cg_kernels.SWAP, _cg_kernels.MOVE, _cg_kernels.HANDOVER
    _HEAD = 16

    def __init__(self, dist: np.ndarray, visited: dict, backend: str | None = None):
        self.dist = dist
        self._moves = _cg_kernels.get_moves(backend)
        self.visited = visited
        self.heap: list = []
        self.lists: list = []

    def add(self, idx: int, row_to_col: np.ndarray, cost: float) -> None:
        deltas, kind, a, b = self._moves(self.dist, row_to_col)
        # candidates are consumed cheapest-first; sort a short head eagerly
        # and the remainder only if the head runs out
        head = min(self._HEAD, len(deltas))
        if head < len(deltas):
            part = np.argpartition(deltas, head - 1)[:head] if head else np.zeros(0, dtype=np.int64)
            order = part[np.lexsort((part, deltas[part]))]
        else:
            order = np.argsort(deltas, kind="stable")
        self.lists.append([row_to_col, cost, deltas, kind, a, b, 0, order, head < len(deltas)])
        self._push(idx)

    def _candidate(self, entry, ptr):
        order = entry[7]
        if ptr >= len(order) and entry[8]:
            full = np.argsort(entry[2], kind="stable")
            seen = np.zeros(len(full), dtype=bool)
            seen[order] = True
            entry[7] = np.concatenate([order, full[~seen[full]]])
            entry[8] = False
            order = entry[7]
        if ptr >= len(order):
            return None
        return int(order[ptr])

    def _neighbor(self, r2c: np.ndarray, kind: int, a: int, b: int) -> np.ndarray:
        out = r2c.copy()
        if kind == self._SWAP:
            out[a], out[b] = r2c[b], r2c[a]
        elif kind == self._MOVE:
            out[a] = b
        else:
            out[a] = r2c[b]
            out[b] = -1
        return out

    def _push(self, idx: int) -> None:
        entry = self.lists[idx]
        r2c, cost, deltas, kind, a, b = entry[:6]
        ptr = entry[6]
        while True:
            cand = self._candidate(entry, ptr)
            if cand is None:
                entry[6] = ptr
                return
            nb = self._neighbor(r2c, kind[cand], a[cand], b[cand])
            if nb.tobytes() not in self.visited:
                entry[6] = ptr
                heapq.heappush(self.heap, (cost + deltas[cand], idx, ptr))
                return
            ptr += 1

    def pop(self) -> np.ndarray | None:
        """Cheapest unvisited neighbor of any visited structure, or None."""
        while self.heap:
            _, idx, ptr = heapq.heappop(self.heap)
            entry = self.lists[idx]
            r2c, _, _, kind, a, b = entry[:6]
            cand = int(entry[7][ptr])
            nb = self._neighbor(r2c, kind[cand], a[cand], b[cand])
            entry[6] = ptr + 1
            self._push(idx)
            if nb.tobytes() in self.visited:
                continue
            return nb
        return None


def collect_structures(scores, steps: int = DEFAULT_STEPS, distance_scale: float = 1.0,
                       forbidden=None, explore: bool = True, backend: str | None = None) -> StructureSet:
    """Collect up to ``steps`` distinct structures by conditional gradient.

    Step ``k`` solves the assignment problem linearized at the previous
    structure ``z``: it maximizes ``(S - z) . v`` over matchings ``v``, which
    is a min-cost assignment on ``(1 - S) + z``. The first step (``z = 0``)
    returns the MAP matching. When the linearized solve lands on a structure
    that was already collected, the loop has cycled; with ``explore`` the step
    instead takes the cheapest not-yet-visited single-swap neighbor of the
    collected set, so every step adds a new structure until the space runs
    out. Without ``explore`` the loop stops at the first repeat of the
    previous structure.

    ``forbidden`` marks gated pairs that no structure may contain.
    """
    s = _as_scores(scores)
    m, n = s.shape
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if m * n < 1:
        raise ValueError("collect_structures needs a non-empty score matrix")
    if not distance_scale > 0:
        raise ValueError("distance_scale must be positive")
    gated = _as_forbidden(forbidden, s.shape)

    dist = distance_scale * (1.0 - s)
    match_cost = np.clip(dist, 0.0, 1.0)
    match_cost[gated] = np.inf
    dist = np.where(gated, np.inf, dist)

    visited: dict[bytes, int] = {}
    rows: list[np.ndarray] = []
    costs: list[float] = []
    frontier = _NeighborFrontier(dist, visited, backend) if explore else None
    linear_point = np.zeros((m, n))
    done = 0
    n_explored = 0
    previous = None

    def _add(r2c):
        visited[r2c.tobytes()] = len(rows)
        rows.append(r2c)
        costs.append(_structure_cost(dist, r2c))
        if frontier is not None:
            frontier.add(len(rows) - 1, r2c, costs[-1])

    for _ in range(steps):
        done += 1
        r2c = _solve_row_to_col(match_cost + linear_point, backend)
        key = r2c.tobytes()
        if key in visited:
            if frontier is None:
                if previous is not None and key == previous:
                    break
            else:
                r2c = frontier.pop()
                if r2c is None:
                    break
                n_explored += 1
                key = r2c.tobytes()
        if key not in visited:
            _add(r2c)
        previous = key
        linear_point = np.zeros((m, n))
        assigned = np.flatnonzero(r2c >= 0)
        linear_point[assigned, r2c[assigned]] = 1.0

    assignments = np.array(rows, dtype=np.int64).reshape(len(rows), m)
    cost_arr = np.array(costs)
    return StructureSet(shape=(m, n), assignments=assignments, costs=cost_arr,
                        weights=structure_weights(cost_arr), steps=done, explored=n_explored)


def marginal_probabilities(structures: StructureSet, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Per-pair probability: total weight of the structures containing the pair."""
    if len(structures) == 0:
        raise ValueError("structure set is empty")
    m, n = structures.shape if shape is None else shape
    if (m, n) != tuple(structures.shape):
        raise ValueError(f"shape {(m, n)} does not match structure set {structures.shape}")
    a = structures.assignments
    k_idx, r_idx = np.nonzero(a >= 0)
    p = np.zeros((m, n))
    np.add.at(p, (r_idx, a[k_idx, r_idx]), structures.weights[k_idx])
    return np.clip(p, 0.0, 1.0)


def marginal_association(scores, steps: int = DEFAULT_STEPS, distance_scale: float = 1.0,
                         forbidden=None, backend: str | None = None) -> np.ndarray:
    """Similarity matrix to marginal matrix in one call; empty inputs give empty output."""
    s = _as_scores(scores)
    if s.size == 0:
        return np.zeros(s.shape)
    sset = collect_structures(s, steps=steps, distance_scale=distance_scale, forbidden=forbidden, backend=backend)
    return marginal_probabilities(sset)


def enumerate_structures(shape: tuple[int, int], forbidden=None) -> np.ndarray:
    """All maximum-cardinality matchings avoiding ``forbidden`` pairs, as row-to-col vectors."""
    m, n = (int(v) for v in shape)
    k = min(m, n)
    if k > EXACT_MAX_SIDE:
        raise ValueError(f"exact enumeration limited to min(M, N) <= {EXACT_MAX_SIDE}, got {k}")
    gated = _as_forbidden(forbidden, (m, n))
    if k == 0:
        return np.zeros((1, m), dtype=np.int64) - 1
    found = {}
    best = -1
    for inj in permutations(range(max(m, n)), k):
        r2c = [-1] * m
        size = 0
        if m <= n:
            for r, c in enumerate(inj):
                if not gated[r, c]:
                    r2c[r] = c
                    size += 1
        else:
            for c, r in enumerate(inj):
                if not gated[r, c]:
                    r2c[r] = c
                    size += 1
        if size > best:
            best = size
            found = {}
        if size == best:
            found.setdefault(tuple(r2c), None)
    return np.array(sorted(found), dtype=np.int64).reshape(-1, m)


def exact_marginals(scores, distance_scale: float = 1.0, forbidden=None) -> np.ndarray:
    """Ground-truth marginals by enumerating the whole structure space."""
    s = _as_scores(scores)
    m, n = s.shape
    if m * n == 0:
        return np.zeros((m, n))
    gated = _as_forbidden(forbidden, s.shape)
    dist = np.where(gated, np.inf, distance_scale * (1.0 - s))
    assignments = enumerate_structures((m, n), gated)
    costs = np.array([_structure_cost(dist, a) for a in assignments])
    sset = StructureSet(shape=(m, n), assignments=assignments, costs=costs, weights=structure_weights(costs))
    return marginal_probabilities(sset)


def _softmax(x: np.ndarray, axis: int) -> np.ndarray:
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def row_softmax_probabilities(similarity, temperature: float = 1.0) -> np.ndarray:
    """Softmax of each row's similarities (one row against every column)."""
    s = np.asarray(similarity, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("similarity must be 2-D")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    if s.size == 0:
        return np.zeros(s.shape)
    return _softmax(s / temperature, axis=1)


def bidirectional_softmax_probabilities(similarity, temperature: float = 1.0) -> np.ndarray:
    """Mean of the row-wise and column-wise softmax."""
    s = np.asarray(similarity, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("similarity must be 2-D")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    if s.size == 0:
        return np.zeros(s.shape)
    return 0.5 * (_softmax(s / temperature, axis=1) + _softmax(s / temperature, axis=0))
