"""Exact probabilities on small graphs.

An event probability on a graph with E edges is
``sum_k N_k p^k (1-p)^(E-k)`` where ``N_k`` counts the configurations in the
event with ``k`` open edges.  :class:`EdgePoly` stores the counts, so one
enumeration serves every ``p`` and the derivative in ``p`` is exact.

Two independent routes produce these counts:

* :func:`connection_polys` enumerates all 2^E configurations (capped);
* :func:`frontier_two_point` runs a transfer-matrix sweep over the edges,
  tracking the connectivity partition of the active frontier.  It handles
  grid-like graphs well beyond the enumeration cap and serves as an oracle
  for the enumerator.
"""
from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from . import kernels
from .config import ENUMERATION_CAP, check_cap
from .lattice import Graph

CHUNK = 1 << 16


class EdgePoly:
    """``sum_k counts[k] p^k (1-p)^(E-k)`` with ``E = len(counts) - 1``."""

    __slots__ = ("counts",)

    def __init__(self, counts):
        self.counts = np.asarray(counts, dtype=np.float64)

    @property
    def n_edges(self) -> int:
        return len(self.counts) - 1

    def __call__(self, p: float) -> float:
        E = self.n_edges
        k = np.arange(E + 1)
        return float(np.sum(self.counts * p**k * (1.0 - p) ** (E - k)))

    def derivative(self, p: float) -> float:
        E = self.n_edges
        k = np.arange(E + 1)
        up = np.where(k > 0, k * p ** np.maximum(k - 1, 0), 0.0) * (1.0 - p) ** (E - k)
        down = np.where(k < E, (E - k) * (1.0 - p) ** np.maximum(E - k - 1, 0), 0.0) * p**k
        return float(np.sum(self.counts * (up - down)))

    def __add__(self, other: "EdgePoly") -> "EdgePoly":
        if other.n_edges != self.n_edges:
            raise ValueError("edge counts differ")
        return EdgePoly(self.counts + other.counts)

    def __repr__(self):
        return f"EdgePoly(E={self.n_edges}, total={self.counts.sum():g})"

    @classmethod
    def constant(cls, n_edges: int, value: float = 1.0) -> "EdgePoly":
        from math import comb

        return cls([value * comb(n_edges, k) for k in range(n_edges + 1)])


def iter_enumeration(graph: Graph, cap: int = ENUMERATION_CAP, chunk: int = CHUNK,
                     with_flags: bool = True, edge_mask: np.ndarray | None = None) -> Iterator:
    """Yield ``(open, n_open, labels)`` blocks covering all 2^E configurations.

    With ``with_flags=False`` the first item is ``None``.  ``edge_mask``
    restricts the enumeration to a subset of the edges (the others closed);
    flags and counts then refer to the selected edges only.
    """
    edges = graph.edges if edge_mask is None else graph.edges[edge_mask]
    check_cap(len(edges), cap)
    E, V = len(edges), graph.n_vertices
    eu = np.ascontiguousarray(edges[:, 0])
    ev = np.ascontiguousarray(edges[:, 1])
    total = 1 << E
    for start in range(0, total, chunk):
        count = min(chunk, total - start)
        if with_flags:
            flags = kernels.enumerate_open(E, start, count)
            labels = kernels.labels_from_open(eu, ev, V, flags)
            yield flags, flags.sum(axis=1), labels
        else:
            labels, k = kernels.labels_enumerated(eu, ev, V, start, count)
            yield None, k, labels


def sub_labels(graph: Graph, flags: np.ndarray, sub: Graph, parent_edges: np.ndarray) -> np.ndarray:
    """Labels of the induced subgraph ``sub`` under the parent's flags."""
    sub_flags = np.ascontiguousarray(flags[:, parent_edges])
    return kernels.labels_from_open(
        np.ascontiguousarray(sub.edges[:, 0]), np.ascontiguousarray(sub.edges[:, 1]),
        sub.n_vertices, sub_flags,
    )


def expectation_poly(graph: Graph, fn: Callable, cap: int = ENUMERATION_CAP,
                     edge_mask: np.ndarray | None = None) -> EdgePoly:
    """Counts-by-popcount of ``fn(open, labels)`` summed over all configurations."""
    E = graph.n_edges if edge_mask is None else int(np.count_nonzero(edge_mask))
    acc = np.zeros(E + 1)
    for flags, k, labels in iter_enumeration(graph, cap, edge_mask=edge_mask):
        vals = np.asarray(fn(flags, labels), dtype=np.float64)
        acc += np.bincount(k, weights=vals, minlength=E + 1)
    return EdgePoly(acc)


_CACHE: dict = {}


def connection_polys(graph: Graph, pairs, cap: int = ENUMERATION_CAP) -> list:
    """Exact connection polynomials ``P[a <-> b in graph]`` for index pairs."""
    key0 = (graph.spec, graph.vertices)
    out: dict = {}
    todo = []
    for a, b in pairs:
        a, b = int(a), int(b)
        if a == b:
            out[(a, b)] = EdgePoly.constant(graph.n_edges)
            continue
        key = key0 + (min(a, b), max(a, b))
        if key in _CACHE:
            out[(a, b)] = _CACHE[key]
        else:
            todo.append((a, b))
    if todo:
        todo = sorted(set(todo))
        E = graph.n_edges
        acc = np.zeros((len(todo), E + 1))
        ia = np.array([a for a, _ in todo])
        ib = np.array([b for _, b in todo])
        for _, k, labels in iter_enumeration(graph, cap, with_flags=False):
            hit = labels[:, ia] == labels[:, ib]
            for j in range(len(todo)):
                acc[j] += np.bincount(k[hit[:, j]], minlength=E + 1)
        for j, (a, b) in enumerate(todo):
            poly = EdgePoly(acc[j])
            _CACHE[key0 + (min(a, b), max(a, b))] = poly
            out[(a, b)] = poly
    return [out[(int(a), int(b))] for a, b in pairs]


def clear_cache():
    _CACHE.clear()


def two_point_poly(edges: np.ndarray, n_vertices: int, a: int, b: int,
                   cap: int = 20) -> EdgePoly:
    """``P[a <-> b]`` on a bare edge list: enumeration up to ``cap`` edges, frontier above."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    E = len(edges)
    if a == b:
        return EdgePoly.constant(E)
    if E > cap:
        return frontier_two_point(_EdgeList(edges), a, b)
    eu = np.ascontiguousarray(edges[:, 0])
    ev = np.ascontiguousarray(edges[:, 1])
    acc = np.zeros(E + 1)
    total = 1 << E
    for start in range(0, total, CHUNK):
        labels, k = kernels.labels_enumerated(eu, ev, n_vertices, start, min(CHUNK, total - start))
        acc += np.bincount(k[labels[:, a] == labels[:, b]], minlength=E + 1)
    return EdgePoly(acc)


class _EdgeList:
    def __init__(self, edges):
        self.edges = edges
        self.n_edges = len(edges)


# --------------------------------------------------------------------------
# frontier transfer matrix


def _canon(labels: tuple) -> tuple:
    remap: dict = {}
    return tuple(remap.setdefault(x, len(remap)) for x in labels)


def frontier_two_point(graph, s: int, t: int) -> EdgePoly:
    """``P[s <-> t]`` by a frontier sweep over the canonical edge order.

    State: the partition of the frontier vertices into open clusters (the two
    terminals stay in the frontier until the end).  Once the terminals are
    joined, the remaining edges are free and the mass moves to a single
    absorbing state.
    """
    E = graph.n_edges
    if s == t:
        return EdgePoly.constant(E)
    last = {}
    for e, (a, b) in enumerate(graph.edges):
        last[int(a)] = e
        last[int(b)] = e
    if s not in last or t not in last:
        return EdgePoly(np.zeros(E + 1))
    pinned = {s, t}
    frontier: list = []
    states: dict = {(): np.zeros(E + 1, dtype=np.int64)}
    states[()][0] = 1
    done = np.zeros(E + 1, dtype=np.int64)

    def shift(arr):
        out = np.zeros_like(arr)
        out[1:] = arr[:-1]
        return out

    for e, (a, b) in enumerate(graph.edges):
        a, b = int(a), int(b)
        for v in (a, b):
            if v not in frontier:
                frontier.append(v)
                states = {part + (max(part, default=-1) + 1,): c for part, c in states.items()}
        ia, ib = frontier.index(a), frontier.index(b)
        new: dict = {}
        for part, c in states.items():
            # edge closed
            if part in new:
                new[part] = new[part] + c
            else:
                new[part] = c.copy()
            # edge open
            la, lb = part[ia], part[ib]
            merged = part if la == lb else _canon(tuple(la if x == lb else x for x in part))
            sc = shift(c)
            if merged in new:
                new[merged] = new[merged] + sc
            else:
                new[merged] = sc
        done = done + shift(done)
        # peel off states where the terminals met
        fs = [v for v in (s, t) if v in frontier]
        if len(fs) == 2:
            i_s, i_t = frontier.index(s), frontier.index(t)
            for part in [q for q in new if q[i_s] == q[i_t]]:
                done = done + new.pop(part)
        # retire vertices whose last edge was e
        for v in (a, b):
            if last[v] == e and v not in pinned:
                i = frontier.index(v)
                frontier.pop(i)
                shrunk: dict = {}
                for part, c in new.items():
                    q = _canon(part[:i] + part[i + 1:])
                    if q in shrunk:
                        shrunk[q] = shrunk[q] + c
                    else:
                        shrunk[q] = c
                new = shrunk
        states = new
    return EdgePoly(done)
