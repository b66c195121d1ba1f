"""Latency of one marginal association call (similarity, structures, marginals)."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._accel import HAS_NUMBA
from .affinity import cosine_similarity_matrix, normalize
from .marginal import marginal_association


@dataclass(frozen=True)
class BenchResult:
    backend: str
    m: int
    n: int
    steps: int
    times_ms: np.ndarray

    @property
    def mean_ms(self) -> float:
        return float(self.times_ms.mean())

    @property
    def median_ms(self) -> float:
        return float(np.median(self.times_ms))


def synthetic_embeddings(m: int, n: int, dim: int = 128, noise: float = 0.2, seed: int = 0):
    """Detections and tracks sharing ``min(m, n)`` identities, plus noise."""
    rng = np.random.default_rng(seed)
    ids = normalize(rng.standard_normal((max(m, n), dim)))
    dets = normalize(ids[:m] + noise * rng.standard_normal((m, dim)) / np.sqrt(dim))
    perm = rng.permutation(max(m, n))[:n]
    tracks = normalize(ids[perm] + noise * rng.standard_normal((n, dim)) / np.sqrt(dim))
    return dets, tracks


def available_backends() -> list[str]:
    return ["numba", "numpy"] if HAS_NUMBA else ["numpy"]


def time_association(m: int, n: int, steps: int = 100, repeat: int = 50, backend: str | None = None,
                     seed: int = 0, warmup: int = 2) -> BenchResult:
    dets, tracks = synthetic_embeddings(m, n, seed=seed)

    def once():
        sim = cosine_similarity_matrix(dets, tracks)
        return marginal_association(sim, steps=steps, backend=backend)

    for _ in range(warmup):
        once()
    times = np.empty(repeat)
    for k in range(repeat):
        t0 = time.perf_counter()
        once()
        times[k] = (time.perf_counter() - t0) * 1e3
    return BenchResult(backend or "default", m, n, steps, times)


def format_bench(results) -> str:
    header = f"{'backend':<8} {'M':>4} {'N':>4} {'steps':>5} {'repeat':>6} {'mean_ms':>9} {'median_ms':>9}"
    lines = [header]
    for r in results:
        lines.append(f"{r.backend:<8} {r.m:>4} {r.n:>4} {r.steps:>5} {len(r.times_ms):>6} "
                     f"{r.mean_ms:>9.3f} {r.median_ms:>9.3f}")
    return "\n".join(lines)
