"""Percolation configurations: sampling, exhaustive enumeration, clusters."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import kernels
from .lattice import GeometryError, Graph, LatticeSpec, Region, _vset, graph_of
from .rng import CounterRNG
from .unionfind import UnionFind

ENUMERATION_CAP = 25


class CapExceeded(ValueError):
    """Raised when an exhaustive computation would exceed its edge cap."""


def check_cap(n_edges: int, cap: int = ENUMERATION_CAP):
    if n_edges > min(cap, ENUMERATION_CAP):
        raise CapExceeded(f"{n_edges} edges exceed the enumeration cap of {min(cap, ENUMERATION_CAP)}")


@dataclass(frozen=True, eq=False)
class Configuration:
    """Open/closed flags on the edge list of ``graph``, drawn at parameter ``p``."""

    graph: Graph
    open: np.ndarray
    p: float

    def __post_init__(self):
        flags = np.asarray(self.open, dtype=bool)
        if flags.shape != (self.graph.n_edges,):
            raise ValueError(f"expected {self.graph.n_edges} flags, got shape {flags.shape}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        flags = flags.copy()
        flags.setflags(write=False)
        object.__setattr__(self, "open", flags)

    @classmethod
    def from_open_edges(cls, graph: Graph, open_edges, p: float = 0.5) -> "Configuration":
        flags = np.zeros(graph.n_edges, dtype=bool)
        for x, y in open_edges:
            flags[graph.edge_id(x, y)] = True
        return cls(graph, flags, p)

    @property
    def n_open(self) -> int:
        return int(self.open.sum())

    def is_open(self, x, y) -> bool:
        return bool(self.open[self.graph.edge_id(x, y)])

    def with_closed(self, x, y) -> "Configuration":
        """The configuration with edge {x, y} forced closed."""
        flags = self.open.copy()
        flags[self.graph.edge_id(x, y)] = False
        return Configuration(self.graph, flags, self.p)

    def open_edges(self) -> list:
        g = self.graph
        return [(g.vertices[a], g.vertices[b]) for a, b in g.edges[self.open]]

    def weight(self) -> float:
        k = self.n_open
        return self.p**k * (1.0 - self.p) ** (self.graph.n_edges - k)


def _graph(edges, spec=None) -> Graph:
    if isinstance(edges, Graph):
        return edges
    if spec is None:
        raise TypeError("pass a Graph, or a region together with a LatticeSpec")
    return graph_of(spec, edges)


def _as_rng(rng) -> CounterRNG:
    if isinstance(rng, CounterRNG):
        return rng
    return CounterRNG(int(rng))


def sample(edges, p: float, rng, spec: LatticeSpec | None = None) -> Configuration:
    """Each edge open independently with probability p.

    ``rng`` is a :class:`CounterRNG` (advanced by one sample) or an int seed.
    Edge ``e`` is open iff its uniform is below ``p``, so samples drawn from
    the same stream position are monotone in ``p``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    g = _graph(edges, spec)
    key = _as_rng(rng).next_keys(1)
    flags = kernels.open_from_keys(g.edge_keys, key, float(p))[0]
    return Configuration(g, flags, float(p))


def enumerate_configurations(edges, p: float, cap: int = ENUMERATION_CAP,
                             spec: LatticeSpec | None = None) -> Iterator[tuple[Configuration, float]]:
    """All 2^|E| configurations with weight p^open (1-p)^closed.

    Bit ``e`` of the configuration number is the state of edge ``e``.
    """
    g = _graph(edges, spec)
    check_cap(g.n_edges, cap)
    E = g.n_edges
    bits = np.arange(E)
    for c in range(1 << E):
        flags = ((c >> bits) & 1).astype(bool)
        k = int(flags.sum())
        yield Configuration(g, flags, p), p**k * (1.0 - p) ** (E - k)


# --------------------------------------------------------------------------
# clusters


def _region_mask(g: Graph, region) -> np.ndarray:
    if region is None:
        return np.ones(g.n_vertices, dtype=bool)
    members = _vset(region)
    mask = np.zeros(g.n_vertices, dtype=bool)
    for v in members:
        if not g.has(v):
            raise GeometryError(f"region vertex {v} is outside the configuration's graph")
        mask[g.idx(v)] = True
    return mask


def _explore(config: Configuration, u, region, skip_edge: int = -1) -> list:
    g = config.graph
    if not g.has(u):
        raise GeometryError(f"{tuple(u)} is outside the configuration's graph")
    mask = _region_mask(g, region)
    s = g.idx(u)
    if not mask[s]:
        raise GeometryError(f"{tuple(u)} is not in the region")
    indptr, nbr, eid = g.csr
    flags = config.open
    seen = {s}
    queue = deque([s])
    while queue:
        x = queue.popleft()
        for q in range(indptr[x], indptr[x + 1]):
            e = eid[q]
            y = int(nbr[q])
            if e == skip_edge or not flags[e] or not mask[y] or y in seen:
                continue
            seen.add(y)
            queue.append(y)
    return sorted(seen)


def cluster_of(config: Configuration, u, region=None) -> frozenset:
    """C(u; region): vertices joined to u by open edges with both ends in region."""
    g = config.graph
    return frozenset(g.vertices[i] for i in _explore(config, u, region))


def cluster_without_edge(config: Configuration, u, region, edge) -> frozenset:
    """Cluster of u in the configuration with ``edge`` forced closed."""
    g = config.graph
    e = g.edge_id(*edge)
    return frozenset(g.vertices[i] for i in _explore(config, u, region, skip_edge=e))


def connected(config: Configuration, x, y, region=None) -> bool:
    g = config.graph
    mask = _region_mask(g, region)
    for v in (x, y):
        if not g.has(v) or not mask[g.idx(v)]:
            raise GeometryError(f"{tuple(v)} is not in the region")
    if tuple(x) == tuple(y):
        return True
    return g.idx(y) in set(_explore(config, x, region))


class ClusterIndex:
    """Partition of a region into open clusters (union-find)."""

    def __init__(self, config: Configuration, region=None):
        g = config.graph
        self.graph = g
        self.mask = _region_mask(g, region)
        members = np.nonzero(self.mask)[0]
        self.members = members
        local = {int(v): i for i, v in enumerate(members)}
        uf = UnionFind(len(members))
        for e in np.nonzero(config.open)[0]:
            a, b = g.edges[e]
            if self.mask[a] and self.mask[b]:
                uf.union(local[int(a)], local[int(b)])
        self._local = local
        self._uf = uf
        self.labels = {g.vertices[v]: int(members[uf.find(i)]) for i, v in enumerate(members)}

    def label(self, v) -> int:
        try:
            return self.labels[tuple(v)]
        except KeyError:
            raise GeometryError(f"{tuple(v)} is not in the region") from None

    def size(self, v) -> int:
        return self._uf.component_size(self._local[self.graph.idx(v)])

    def same(self, x, y) -> bool:
        return self.label(x) == self.label(y)

    def clusters(self) -> list:
        groups: dict = {}
        for v, lab in self.labels.items():
            groups.setdefault(lab, []).append(v)
        return [frozenset(vs) for _, vs in sorted(groups.items())]

    @property
    def sizes(self) -> dict:
        return {lab: self._uf.component_size(self._local[lab]) for lab in set(self.labels.values())}
