"""Unit-capacity maximum flow for counting disjoint open paths.

Arcs are stored in pairs (``2i`` and its residual partner ``2i+1``).  An
undirected edge gets capacity on both arcs of its pair, a directed arc only
on the first.  Augmentation is breadth-first (Edmonds-Karp), which is plenty
for flow values of a few dozen.
"""
from __future__ import annotations

import numpy as np
from numba import njit

INF_CAP = 1 << 30


@njit(cache=True)
def _max_flow(n, tail, head, cap, s, t, limit):
    m = tail.shape[0]
    order = np.argsort(tail, kind="mergesort")
    start = np.zeros(n + 1, dtype=np.int64)
    for a in range(m):
        start[tail[a] + 1] += 1
    for v in range(n):
        start[v + 1] += start[v]
    res = cap.copy()
    prev = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    flow = 0
    while limit < 0 or flow < limit:
        for v in range(n):
            prev[v] = -1
        prev[s] = m
        qh = 0
        qt = 0
        queue[qt] = s
        qt += 1
        while qh < qt and prev[t] == -1:
            x = queue[qh]
            qh += 1
            for j in range(start[x], start[x + 1]):
                a = order[j]
                y = head[a]
                if res[a] > 0 and prev[y] == -1:
                    prev[y] = a
                    queue[qt] = y
                    qt += 1
        if prev[t] == -1:
            break
        # bottleneck is 1 on every unit arc; super arcs are effectively infinite
        push = INF_CAP
        y = t
        while y != s:
            a = prev[y]
            if res[a] < push:
                push = res[a]
            y = tail[a]
        if limit >= 0 and push > limit - flow:
            push = limit - flow
        y = t
        while y != s:
            a = prev[y]
            res[a] -= push
            res[a ^ 1] += push
            y = tail[a]
        flow += push
    return flow


class FlowNetwork:
    """Incrementally built arc list; call :meth:`max_flow` once built."""

    def __init__(self, n: int):
        self.n = n
        self._tail: list = []
        self._head: list = []
        self._cap: list = []

    def add_node(self) -> int:
        self.n += 1
        return self.n - 1

    def add_arc(self, a: int, b: int, cap: int = 1, undirected: bool = False):
        self._tail += [a, b]
        self._head += [b, a]
        self._cap += [cap, cap if undirected else 0]

    def add_arcs(self, a, b, cap: int = 1, undirected: bool = False):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        pair_t = np.empty(2 * len(a), dtype=np.int64)
        pair_h = np.empty_like(pair_t)
        pair_t[0::2], pair_t[1::2] = a, b
        pair_h[0::2], pair_h[1::2] = b, a
        caps = np.zeros_like(pair_t)
        caps[0::2] = cap
        if undirected:
            caps[1::2] = cap
        self._tail += pair_t.tolist()
        self._head += pair_h.tolist()
        self._cap += caps.tolist()

    def max_flow(self, s: int, t: int, limit: int | None = None) -> int:
        if s == t:
            raise ValueError("source and sink coincide")
        return int(_max_flow(self.n, np.asarray(self._tail, dtype=np.int64),
                             np.asarray(self._head, dtype=np.int64),
                             np.asarray(self._cap, dtype=np.int64),
                             s, t, -1 if limit is None else int(limit)))


def disjoint_paths(n: int, edges, sources, sinks, vertex_disjoint: bool = False,
                   limit: int | None = None) -> int:
    """Maximum number of disjoint paths from ``sources`` to ``sinks`` over undirected ``edges``.

    Edge-disjoint by default; ``vertex_disjoint`` forbids shared vertices
    (endpoints included).  ``limit`` stops the count once reached.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    sources = np.unique(np.asarray(sources, dtype=np.int64))
    sinks = np.unique(np.asarray(sinks, dtype=np.int64))
    if len(sources) == 0 or len(sinks) == 0:
        return 0
    if vertex_disjoint:
        net = FlowNetwork(2 * n)
        v = np.arange(n)
        net.add_arcs(2 * v, 2 * v + 1, 1)
        if len(edges):
            net.add_arcs(2 * edges[:, 0] + 1, 2 * edges[:, 1], 1)
            net.add_arcs(2 * edges[:, 1] + 1, 2 * edges[:, 0], 1)
        src_in, snk_out = 2 * sources, 2 * sinks + 1
    else:
        net = FlowNetwork(n)
        if len(edges):
            net.add_arcs(edges[:, 0], edges[:, 1], 1, undirected=True)
        src_in, snk_out = sources, sinks
    S, T = net.add_node(), net.add_node()
    net.add_arcs(np.full(len(src_in), S), src_in, INF_CAP)
    net.add_arcs(snk_out, np.full(len(snk_out), T), INF_CAP)
    return net.max_flow(S, T, limit)
