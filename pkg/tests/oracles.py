"""Slow, direct reference computations used as test oracles.

These walk every configuration with plain Python breadth-first search and
share no code with the numba kernels or the polynomial bookkeeping.
"""
from collections import deque
from itertools import product


def lattice_edges(S, L=1):
    S = sorted(set(map(tuple, S)))
    out = []
    for i, a in enumerate(S):
        for b in S[i + 1:]:
            if 0 < sum(abs(x - y) for x, y in zip(a, b)) <= L:
                out.append((a, b))
    return out


def reach(open_edges, x, region):
    adj = {}
    for a, b in open_edges:
        if a in region and b in region:
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
    seen = {x}
    q = deque([x])
    while q:
        v = q.popleft()
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                q.append(w)
    return seen


def expectation(S, p, fn, L=1):
    """sum over configurations of the edges of S of weight * fn(open_edges)."""
    edges = lattice_edges(S, L)
    total = 0.0
    for bits in product((0, 1), repeat=len(edges)):
        k = sum(bits)
        w = p**k * (1 - p) ** (len(edges) - k)
        total += w * fn([e for e, b in zip(edges, bits) if b])
    return total


def tau(S, p, x, y, region=None, L=1):
    region = set(map(tuple, region if region is not None else S))
    return expectation(S, p, lambda op: float(tuple(y) in reach(op, tuple(x), region)), L)
