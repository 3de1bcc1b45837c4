"""Compiled hot loops: union-find labelling and cluster exploration."""
from __future__ import annotations

import numpy as np
from numba import njit

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_UNIT = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _uniform(sample_key, edge_key):
    h = _mix64(_mix64(sample_key ^ edge_key) + _GOLDEN)
    return np.float64(h >> np.uint64(11)) * _UNIT


@njit(cache=True, inline="always")
def _find(parent, x):
    # path halving
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _union_rows(parent, size, eu, ev, is_open, labels_row):
    V = parent.shape[0]
    for v in range(V):
        parent[v] = v
        size[v] = 1
    for e in range(eu.shape[0]):
        if not is_open[e]:
            continue
        a = _find(parent, eu[e])
        b = _find(parent, ev[e])
        if a == b:
            continue
        if size[a] < size[b]:
            a, b = b, a
        parent[b] = a
        size[a] += size[b]
    for v in range(V):
        labels_row[v] = _find(parent, v)


@njit(cache=True)
def labels_from_open(eu, ev, n_vertices, open_rows):
    """Component representative per vertex for each row of ``open_rows``."""
    B = open_rows.shape[0]
    labels = np.empty((B, n_vertices), dtype=np.int32)
    parent = np.empty(n_vertices, dtype=np.int64)
    size = np.empty(n_vertices, dtype=np.int64)
    for b in range(B):
        _union_rows(parent, size, eu, ev, open_rows[b], labels[b])
    return labels


@njit(cache=True)
def enumerate_open(n_edges, start, count):
    """Open flags of configurations ``start .. start+count-1``; bit e of the index is edge e."""
    out = np.empty((count, n_edges), dtype=np.bool_)
    for b in range(count):
        c = start + b
        for e in range(n_edges):
            out[b, e] = (c >> e) & 1
    return out


@njit(cache=True)
def open_from_keys(edge_keys, sample_keys, p):
    B = sample_keys.shape[0]
    E = edge_keys.shape[0]
    out = np.empty((B, E), dtype=np.bool_)
    for b in range(B):
        sk = sample_keys[b]
        for e in range(E):
            out[b, e] = _uniform(sk, edge_keys[e]) < p
    return out


@njit(cache=True)
def cluster_sums(indptr, nbr, eid, edge_keys, sample_keys, p, source, weights, forbidden):
    """Explore the open cluster of ``source`` for each sample.

    Edge uniforms are generated on demand, so only edges touching the cluster
    are ever drawn.  Returns ``(B, k)`` sums of ``weights`` over the cluster.
    Vertices with ``forbidden`` set are never entered.
    """
    B = sample_keys.shape[0]
    V = indptr.shape[0] - 1
    k = weights.shape[1]
    out = np.zeros((B, k), dtype=np.float64)
    stamp = np.full(V, -1, dtype=np.int64)
    stack = np.empty(V, dtype=np.int64)
    for b in range(B):
        sk = sample_keys[b]
        if forbidden[source]:
            continue
        top = 0
        stack[top] = source
        top += 1
        stamp[source] = b
        while top > 0:
            top -= 1
            x = stack[top]
            for j in range(k):
                out[b, j] += weights[x, j]
            for q in range(indptr[x], indptr[x + 1]):
                y = nbr[q]
                if stamp[y] == b or forbidden[y]:
                    continue
                if _uniform(sk, edge_keys[eid[q]]) < p:
                    stamp[y] = b
                    stack[top] = y
                    top += 1
    return out


@njit(cache=True)
def cluster_masks(indptr, nbr, eid, edge_keys, sample_keys, p, source, forbidden):
    """Boolean membership ``(B, V)`` of the open cluster of ``source``."""
    B = sample_keys.shape[0]
    V = indptr.shape[0] - 1
    out = np.zeros((B, V), dtype=np.bool_)
    stack = np.empty(V, dtype=np.int64)
    for b in range(B):
        if forbidden[source]:
            continue
        sk = sample_keys[b]
        top = 0
        stack[top] = source
        top += 1
        out[b, source] = True
        while top > 0:
            top -= 1
            x = stack[top]
            for q in range(indptr[x], indptr[x + 1]):
                y = nbr[q]
                if out[b, y] or forbidden[y]:
                    continue
                if _uniform(sk, edge_keys[eid[q]]) < p:
                    out[b, y] = True
                    stack[top] = y
                    top += 1
    return out


@njit(cache=True)
def labels_enumerated(eu, ev, n_vertices, start, count):
    """Labels and open-edge counts of configurations ``start .. start+count-1``."""
    E = eu.shape[0]
    labels = np.empty((count, n_vertices), dtype=np.int32)
    n_open = np.zeros(count, dtype=np.int64)
    parent = np.empty(n_vertices, dtype=np.int64)
    size = np.empty(n_vertices, dtype=np.int64)
    flags = np.empty(E, dtype=np.bool_)
    for b in range(count):
        c = start + b
        k = 0
        for e in range(E):
            bit = (c >> e) & 1
            flags[e] = bit
            k += bit
        n_open[b] = k
        _union_rows(parent, size, eu, ev, flags, labels[b])
    return labels, n_open


@njit(cache=True)
def labels_multi_enumerated(eu, ev, n_vertices, in_subs, start, count):
    """Labels of configurations ``start .. start+count-1``, plus one labelling per
    row of ``in_subs`` using only the edges flagged there."""
    E = eu.shape[0]
    m = in_subs.shape[0]
    labels = np.empty((count, n_vertices), dtype=np.int32)
    subs = np.empty((m, count, n_vertices), dtype=np.int32)
    n_open = np.zeros(count, dtype=np.int64)
    parent = np.empty(n_vertices, dtype=np.int64)
    size = np.empty(n_vertices, dtype=np.int64)
    flags = np.empty(E, dtype=np.bool_)
    sflags = np.empty(E, dtype=np.bool_)
    for b in range(count):
        c = start + b
        k = 0
        for e in range(E):
            bit = (c >> e) & 1
            flags[e] = bit
            k += bit
        n_open[b] = k
        _union_rows(parent, size, eu, ev, flags, labels[b])
        for j in range(m):
            for e in range(E):
                sflags[e] = flags[e] and in_subs[j, e]
            _union_rows(parent, size, eu, ev, sflags, subs[j, b])
    return labels, subs, n_open
