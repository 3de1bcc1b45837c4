"""Chunked Monte Carlo with sufficient-statistic merging.

Samples are numbered globally; chunk ``c`` covers samples
``c*CHUNK_SIZE .. (c+1)*CHUNK_SIZE - 1``.  Each chunk reduces to a
:class:`Moments` (count, sums, cross products) and chunks are merged in index
order, so a run is a pure function of ``(inputs, seed)`` whatever the number
of workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .lattice import Graph
from .rng import sample_keys

CHUNK_SIZE = 4096


@dataclass
class Moments:
    n: int
    s: np.ndarray
    ss: np.ndarray

    @classmethod
    def from_values(cls, values: np.ndarray) -> "Moments":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        return cls(values.shape[0], values.sum(axis=0), values.T @ values)

    def merge(self, other: "Moments") -> "Moments":
        return Moments(self.n + other.n, self.s + other.s, self.ss + other.ss)

    @property
    def mean(self) -> np.ndarray:
        return self.s / self.n

    @property
    def cov(self) -> np.ndarray:
        """Population covariance of a single sample."""
        m = self.mean
        c = self.ss / self.n - np.outer(m, m)
        c = (c + c.T) / 2
        np.fill_diagonal(c, np.maximum(np.diag(c), 0.0))
        return c

    @property
    def var(self) -> np.ndarray:
        return np.diag(self.cov)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(self.var / self.n)


def default_workers() -> int:
    env = os.environ.get("PERCOLAB_WORKERS")
    return max(1, int(env)) if env else 1


def chunks(n: int, chunk_size: int = CHUNK_SIZE):
    return [(start, min(chunk_size, n - start)) for start in range(0, n, chunk_size)]


def run(task, n: int, workers: int = 1) -> Moments:
    """Evaluate ``task(start, count) -> Moments`` over ``n`` samples and merge in order."""
    if n < 1:
        raise ValueError("need at least one sample")
    parts = chunks(n)
    if workers > 1 and len(parts) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, *zip(*parts)))
    else:
        results = [task(s, c) for s, c in parts]
    total = results[0]
    for r in results[1:]:
        total = total.merge(r)
    return total


def collect(task_values, n: int) -> np.ndarray:
    """Per-sample values, concatenated in sample order (for coupling checks)."""
    return np.concatenate([task_values(s, c) for s, c in chunks(n)])


class ClusterTask:
    """Per-sample sums of vertex weights over the open cluster of ``source``.

    ``post`` (a module-level function, for pickling) maps the raw ``(B, k)``
    sums to the per-sample values whose moments are accumulated.
    """

    def __init__(self, graph: Graph, source: int, weights: np.ndarray, p: float,
                 stream_key: int, post=None, forbidden: np.ndarray | None = None):
        indptr, nbr, eid = graph.csr
        self.indptr, self.nbr, self.eid = indptr, nbr, eid
        self.edge_keys = graph.edge_keys
        self.source = int(source)
        w = np.asarray(weights, dtype=np.float64)
        self.weights = np.ascontiguousarray(w[:, None] if w.ndim == 1 else w)
        self.p = float(p)
        self.stream_key = int(stream_key)
        self.post = post
        if forbidden is None:
            forbidden = np.zeros(graph.n_vertices, dtype=bool)
        self.forbidden = forbidden

    def values(self, start: int, count: int) -> np.ndarray:
        keys = sample_keys(self.stream_key, start, count)
        sums = kernels.cluster_sums(self.indptr, self.nbr, self.eid, self.edge_keys, keys,
                                    self.p, self.source, self.weights, self.forbidden)
        return self.post(sums) if self.post is not None else sums

    def __call__(self, start: int, count: int) -> Moments:
        return Moments.from_values(self.values(start, count))


def ratio_stats(m: Moments, i: int, j: int) -> tuple[float, float]:
    """Delta-method ratio ``mean_i / mean_j`` and its standard error."""
    a, b = m.mean[i], m.mean[j]
    if b == 0:
        return math.nan, math.nan
    r = a / b
    c = m.cov
    var = (c[i, i] - 2 * r * c[i, j] + r * r * c[j, j]) / (b * b)
    return float(r), float(math.sqrt(max(var, 0.0) / m.n))
