"""Event predicates: pivotal-marking events, disjoint occurrence, monotonicity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import (CapExceeded, Configuration, _region_mask, cluster_without_edge, connected)
from .flow import disjoint_paths
from .lattice import GeometryError, Graph, _vset

INCREASING_CAP = 20
PATH_SEARCH_CAP = 30


def _full(config: Configuration):
    return frozenset(config.graph.vertices)


def _check_pair(config, o, x, S, Lam, u, v):
    spec = config.graph.spec
    S_set, L_set = _vset(S), _vset(Lam)
    if not S_set <= L_set:
        raise GeometryError("S must be a subset of Lambda")
    u, v = tuple(u), tuple(v)
    if u not in S_set or v not in L_set or v in S_set or not spec.adjacent(u, v):
        raise GeometryError(f"({u}, {v}) is not a boundary pair of (S, Lambda)")
    if tuple(o) not in S_set:
        raise GeometryError("o must lie in S")
    if tuple(x) not in L_set:
        raise GeometryError("x must lie in Lambda")
    return S_set, L_set


def event_Euv(config: Configuration, o, x, S, Lam, u, v) -> bool:
    """E_uv: o <-> u in S, uv open, v <-> x in Lambda, and o, x disconnected in Lambda once uv closes."""
    if Lam is None:
        Lam = _full(config)
    S_set, L_set = _check_pair(config, o, x, S, Lam, u, v)
    return (connected(config, o, u, S_set)
            and config.is_open(u, v)
            and connected(config, v, x, L_set)
            and not connected(config.with_closed(u, v), o, x, L_set))


def event_Euv_identity(config: Configuration, o, x, S, Lam, u, v) -> bool:
    """The cluster form: o <-> u in S, uv open, v <-> x off the cluster of u with uv closed."""
    if Lam is None:
        Lam = _full(config)
    S_set, L_set = _check_pair(config, o, x, S, Lam, u, v)
    if not (connected(config, o, u, S_set) and config.is_open(u, v)):
        return False
    C = cluster_without_edge(config, u, L_set, (u, v))
    rest = L_set - C
    if tuple(v) not in rest or tuple(x) not in rest:
        return False
    return connected(config, v, x, rest)


def boundary_pairs(config: Configuration, S, Lam=None) -> list:
    spec = config.graph.spec
    S_set = _vset(S)
    L_set = _vset(Lam) if Lam is not None else _full(config)
    out = []
    for u in sorted(S_set):
        for w in spec.neighbours(u):
            if w in L_set and w not in S_set:
                out.append((u, w))
    return out


def holding_pairs(config: Configuration, o, x, S, Lam=None) -> list:
    """All boundary pairs (u, v) of (S, Lambda) for which E_uv holds."""
    return [(u, v) for u, v in boundary_pairs(config, S, Lam)
            if event_Euv(config, o, x, S, Lam, u, v)]


# --------------------------------------------------------------------------
# connection events


@dataclass(frozen=True)
class ConnectionEvent:
    """{x <-> y in region}; ``region=None`` means the whole graph."""

    x: tuple
    y: tuple
    region: frozenset | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(self.x))
        object.__setattr__(self, "y", tuple(self.y))
        if self.region is not None:
            reg = _vset(self.region)
            object.__setattr__(self, "region", reg)
            if self.x not in reg or self.y not in reg:
                raise GeometryError("event endpoints must lie in the region")

    @property
    def trivial(self) -> bool:
        return self.x == self.y

    def occurs(self, config: Configuration) -> bool:
        return connected(config, self.x, self.y, self.region)

    __call__ = occurs

    def evaluate(self, graph: Graph, flags: np.ndarray) -> np.ndarray:
        """Vectorised indicator over rows of open flags."""
        mask = _region_mask(graph, self.region)
        f = np.asarray(flags, dtype=bool) & (mask[graph.edges[:, 0]] & mask[graph.edges[:, 1]])
        labels = kernels.labels_from_open(np.ascontiguousarray(graph.edges[:, 0]),
                                          np.ascontiguousarray(graph.edges[:, 1]),
                                          graph.n_vertices, np.ascontiguousarray(f))
        return labels[:, graph.idx(self.x)] == labels[:, graph.idx(self.y)]

    def region_key(self, graph: Graph) -> frozenset:
        return self.region if self.region is not None else frozenset(graph.vertices)


@dataclass(frozen=True)
class EdgeOpenEvent:
    """{edge xy open} (or closed, with ``closed=True``)."""

    x: tuple
    y: tuple
    closed: bool = False

    def occurs(self, config: Configuration) -> bool:
        return config.is_open(self.x, self.y) != self.closed

    __call__ = occurs

    def evaluate(self, graph: Graph, flags: np.ndarray) -> np.ndarray:
        col = np.asarray(flags, dtype=bool)[:, graph.edge_id(self.x, self.y)]
        return ~col if self.closed else col


@dataclass
class DisjointResult:
    value: bool
    mode: str

    def __bool__(self):
        return self.value


def _open_region_edges(config, region_set):
    g = config.graph
    mask = _region_mask(g, region_set)
    keep = config.open & mask[g.edges[:, 0]] & mask[g.edges[:, 1]]
    return g.edges[keep]


def _simple_paths(adj, s, t, limit):
    """Edge-id sets of all simple paths s -> t (DFS); ``None`` past ``limit`` paths."""
    out = []
    on_path = {s}
    stack = [(s, iter(adj[s]))]
    used: list = []
    while stack:
        x, it = stack[-1]
        step = next(it, None)
        if step is None:
            stack.pop()
            on_path.discard(x)
            if used:
                used.pop()
            continue
        y, e = step
        if y in on_path:
            continue
        if y == t:
            out.append(frozenset(used + [e]))
            if len(out) > limit:
                return None
            continue
        on_path.add(y)
        used.append(e)
        stack.append((y, iter(adj[y])))
    return out


def _reach(n, edges, skip, s, t):
    adj = [[] for _ in range(n)]
    for e, (a, b) in enumerate(edges):
        if e not in skip:
            adj[a].append(b)
            adj[b].append(a)
    seen = {s}
    todo = [s]
    while todo:
        x = todo.pop()
        if x == t:
            return True
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                todo.append(y)
    return t in seen


def disjoint_occurrence(config: Configuration, evA: ConnectionEvent, evB: ConnectionEvent,
                        return_mode: bool = False, path_limit: int = 100_000):
    """A o B for connection events: edge-disjoint open witnesses.

    Modes: ``"trivial"`` (an event with x == y, empty witness), ``"flow"``
    (same endpoints, flow value >= 2), ``"exhaustive"`` (every simple open
    path for A, then B on the remaining edges) and ``"lower-bound witness"``
    (greedy shortest-path test, only sufficient) when the path search is too
    large.
    """
    g = config.graph
    ra, rb = evA.region_key(g), evB.region_key(g)
    if ra != rb:
        raise GeometryError("disjoint occurrence needs events on the same region")

    def done(value, mode):
        return DisjointResult(bool(value), mode) if return_mode else bool(value)

    if evA.trivial:
        return done(evB.occurs(config), "trivial")
    if evB.trivial:
        return done(evA.occurs(config), "trivial")
    edges = _open_region_edges(config, ra)
    n = g.n_vertices
    ax, ay, bx, by = (g.idx(v) for v in (evA.x, evA.y, evB.x, evB.y))
    if {ax, ay} == {bx, by}:
        return done(disjoint_paths(n, edges, [ax], [ay], limit=2) >= 2, "flow")
    if not (evA.occurs(config) and evB.occurs(config)):
        return done(False, "exhaustive")
    adj = [[] for _ in range(n)]
    for e, (a, b) in enumerate(edges):
        adj[a].append((int(b), e))
        adj[b].append((int(a), e))
    paths = _simple_paths(adj, ax, ay, path_limit) if len(edges) <= PATH_SEARCH_CAP else None
    if paths is not None:
        return done(any(_reach(n, edges, P, bx, by) for P in paths), "exhaustive")
    for (s1, t1), (s2, t2) in (((ax, ay), (bx, by)), ((bx, by), (ax, ay))):
        P = _shortest_path_edges(n, edges, s1, t1)
        if P is not None and _reach(n, edges, P, s2, t2):
            return done(True, "lower-bound witness")
    return done(False, "lower-bound witness")


def _shortest_path_edges(n, edges, s, t):
    adj = [[] for _ in range(n)]
    for e, (a, b) in enumerate(edges):
        adj[a].append((int(b), e))
        adj[b].append((int(a), e))
    prev = {s: None}
    frontier = [s]
    while frontier and t not in prev:
        nxt = []
        for x in frontier:
            for y, e in adj[x]:
                if y not in prev:
                    prev[y] = (x, e)
                    nxt.append(y)
        frontier = nxt
    if t not in prev:
        return None
    used = set()
    y = t
    while prev[y] is not None:
        x, e = prev[y]
        used.add(e)
        y = x
    return used


# --------------------------------------------------------------------------
# monotonicity


def truth_table(predicate, graph: Graph, p: float = 0.5, cap: int = INCREASING_CAP) -> np.ndarray:
    """Predicate value on every configuration, indexed by configuration number."""
    E = graph.n_edges
    if E > cap:
        raise CapExceeded(f"{E} edges exceed the cap of {cap}")
    total = 1 << E
    if hasattr(predicate, "evaluate"):
        flags = kernels.enumerate_open(E, 0, total)
        return np.asarray(predicate.evaluate(graph, flags), dtype=bool)
    bits = np.arange(E)
    out = np.empty(total, dtype=bool)
    for c in range(total):
        out[c] = bool(predicate(Configuration(graph, ((c >> bits) & 1).astype(bool), p)))
    return out


def is_increasing(predicate, graph: Graph, cap: int = INCREASING_CAP) -> bool:
    """True iff opening any closed edge never turns the event from true to false."""
    table = truth_table(predicate, graph, cap=cap)
    idx = np.arange(len(table))
    for e in range(graph.n_edges):
        closed = idx[(idx >> e) & 1 == 0]
        if np.any(table[closed] & ~table[closed | (1 << e)]):
            return False
    return True
