"""Regular and escapable points, the local regularity event, volume tails."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import Configuration, cluster_of, connected, sample
from .estimators import cluster_values
from .flow import disjoint_paths
from .lattice import GeometryError, LatticeSpec, Region, _vset, graph_of, inner_boundary
from .records import Estimate
from .rng import CounterRNG


@dataclass(frozen=True)
class RegularityParams:
    K: int = 2
    T: float = 1.0
    s_max: int | None = None

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2 so that log s > 0")
        if self.T <= 0:
            raise ValueError("T must be > 0")
        if self.s_max is not None and self.s_max < self.K:
            raise ValueError("s_max must be >= K")


def density_bound(s: int, T: float = 1.0, power: int = 7) -> float:
    return T * s**4 * math.log(s) ** power


def _sup_dist(points: np.ndarray, u) -> np.ndarray:
    return np.abs(np.asarray(points) - np.asarray(u)).max(axis=1)


def is_regular(config: Configuration, u, region, params: RegularityParams) -> bool:
    """|C(u; region) within Lambda_s(u)| <= T s^4 (log s)^7 for every integer s in [K, s_max].

    ``s_max`` defaults to the largest sup-distance from u to the region;
    beyond it the counts stop growing while the bound keeps increasing.
    """
    region_set = _vset(region) if region is not None else frozenset(config.graph.vertices)
    u = tuple(u)
    if u not in region_set:
        raise GeometryError(f"{u} is not in the region")
    C = np.array(sorted(cluster_of(config, u, region_set)))
    dist = np.sort(_sup_dist(C, u))
    s_max = params.s_max
    if s_max is None:
        s_max = max(params.K, int(_sup_dist(np.array(sorted(region_set)), u).max()))
    s = np.arange(params.K, s_max + 1)
    counts = np.searchsorted(dist, s, side="right")
    bounds = params.T * s.astype(float) ** 4 * np.log(s) ** 7
    return bool(np.all(counts <= bounds))


def regular_at(config: Configuration, u, s: int, region=None, T: float = 1.0) -> bool:
    """The single event T_{s,T}(u) in ``region``."""
    region_set = _vset(region) if region is not None else frozenset(config.graph.vertices)
    C = np.array(sorted(cluster_of(config, tuple(u), region_set)))
    return bool((_sup_dist(C, u) <= s).sum() <= density_bound(s, T))


@dataclass
class LocalReport:
    holds: bool
    clause1: bool
    clause2: bool
    max_cluster: int
    n_paths: int
    outer: int
    mode: str


def ts_loc(config: Configuration, u, s: int, region=None, outer: int | None = None,
           vertex_disjoint: bool = False, details: bool = False):
    """Local regularity event at scale s around u.

    Clause 1: every cluster of Lambda_R(u) meets Lambda_s(u) in at most
    s^4 (log s)^4 points.  Clause 2: at most (log s)^3 disjoint open paths
    join Lambda_s(u) to the inner boundary of Lambda_R(u).  R defaults to
    s^(2d).
    """
    g = config.graph
    spec = g.spec
    if s < 2:
        raise ValueError("s must be >= 2")
    u = tuple(u)
    R = s ** (2 * spec.d) if outer is None else int(outer)
    if R < s:
        raise ValueError("outer radius must be >= s")
    outer_box = Region.box(R, center=u, d=spec.d)
    avail = _vset(region) if region is not None else None
    missing = [v for v in outer_box.vertices if not g.has(v) or (avail is not None and v not in avail)]
    if missing:
        raise GeometryError(f"Lambda_{R}({u}) does not fit in the simulated region; "
                            f"need the box of radius {R} around {u}")
    sub, parent = g.subgraph(outer_box.vertices)
    flags = np.ascontiguousarray(config.open[parent])
    labels = kernels.labels_from_open(np.ascontiguousarray(sub.edges[:, 0]),
                                      np.ascontiguousarray(sub.edges[:, 1]),
                                      sub.n_vertices, flags[None, :])[0]
    inner = _sup_dist(sub.coords, u) <= s
    counts = np.bincount(labels[inner], minlength=sub.n_vertices)
    max_cluster = int(counts.max())
    c1 = max_cluster <= s**4 * math.log(s) ** 4
    bound2 = math.log(s) ** 3
    sinks = [sub.idx(v) for v in inner_boundary(spec, outer_box)]
    n_paths = disjoint_paths(sub.n_vertices, sub.edges[flags], np.nonzero(inner)[0], sinks,
                             vertex_disjoint=vertex_disjoint,
                             limit=None if details else int(math.floor(bound2)) + 1)
    c2 = n_paths <= bound2
    if not details:
        return bool(c1 and c2)
    return LocalReport(bool(c1 and c2), bool(c1), bool(c2), max_cluster, int(n_paths), R,
                       "vertex-disjoint" if vertex_disjoint else "edge-disjoint")


# --------------------------------------------------------------------------
# escapability


@dataclass(frozen=True)
class EscapeTriplet:
    v: tuple
    w: tuple
    gamma: tuple


def _dist_to_set(points: np.ndarray, C: np.ndarray) -> np.ndarray:
    return np.abs(points[:, None, :] - C[None, :, :]).max(axis=2).min(axis=1)


def is_escapable(config: Configuration, u, S, Lam, K: int, w_filter=None) -> EscapeTriplet | None:
    """Earliest escape triplet (v, w, gamma) of u, or None.

    v runs over the neighbours of u in Lambda \\ S in lexicographic order; for
    each v a breadth-first search inside Lambda_K(v) within Lambda, off
    C(u; Lambda), finds the reachable points at sup-distance > K/10 from the
    cluster; the smallest such w with its shortest path is returned.
    ``Lam=None`` means the whole lattice.  ``w_filter`` optionally restricts w.
    """
    spec = config.graph.spec
    u = tuple(u)
    S_set = _vset(S)
    if u not in S_set or all(y in S_set for y in spec.neighbours(u)):
        raise GeometryError(f"{u} is not in the inner boundary of S")
    L_set = _vset(Lam) if Lam is not None else None
    region = L_set if L_set is not None else frozenset(config.graph.vertices)
    C_set = cluster_of(config, u, region)
    C = np.array(sorted(C_set))

    def inside(y):
        return L_set is None or y in L_set

    for v in sorted(spec.neighbours(u)):
        if v in S_set or not inside(v) or v in C_set:
            continue
        prev = {v: None}
        order = [v]
        queue = deque([v])
        vv = np.asarray(v)
        while queue:
            x = queue.popleft()
            for y in sorted(spec.neighbours(x)):
                if y in prev or y in C_set or not inside(y):
                    continue
                if np.abs(np.asarray(y) - vv).max() > K:
                    continue
                prev[y] = x
                order.append(y)
                queue.append(y)
        pts = np.array(order)
        far = _dist_to_set(pts, C) > K / 10
        cands = sorted(tuple(int(c) for c in pts[i]) for i in np.nonzero(far)[0])
        if w_filter is not None:
            cands = [w for w in cands if w_filter(w)]
        if not cands:
            continue
        w = cands[0]
        path = [w]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        trip = EscapeTriplet(v, w, tuple(reversed(path)))
        _check_triplet(spec, trip, u, C_set, L_set, K)
        return trip
    return None


def _check_triplet(spec: LatticeSpec, trip: EscapeTriplet, u, C_set, L_set, K):
    assert spec.adjacent(u, trip.v)
    assert trip.gamma[0] == trip.v and trip.gamma[-1] == trip.w
    for a, b in zip(trip.gamma, trip.gamma[1:]):
        assert spec.adjacent(a, b)
    for y in trip.gamma:
        assert y not in C_set
        assert max(abs(a - b) for a, b in zip(y, trip.v)) <= K
        assert L_set is None or y in L_set
    C = np.array(sorted(C_set))
    assert _dist_to_set(np.array([trip.w]), C)[0] > K / 10


# --------------------------------------------------------------------------
# pioneer classification


@dataclass
class Classification:
    pioneers: list
    regular: list
    escapable: list
    X: list
    triplets: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"n_pioneers": len(self.pioneers), "n_regular": len(self.regular),
                "n_escapable": len(self.escapable), "n_X": len(self.X)}


def classify_pioneers(config: Configuration, S, Lam, params: RegularityParams) -> Classification:
    """Pioneers of S, those (K,T)-regular in Lambda, and those also K-escapable in Lambda."""
    spec = config.graph.spec
    S_set = _vset(S)
    origin = (0,) * spec.d
    if origin not in S_set:
        raise GeometryError("S must contain the origin")
    if Lam is not None and not S_set <= _vset(Lam):
        raise GeometryError("S must be a subset of Lambda")
    region = _vset(Lam) if Lam is not None else frozenset(config.graph.vertices)
    pioneers = [u for u in inner_boundary(spec, S_set) if connected(config, origin, u, S_set)]
    regular, escapable, X, trips = [], [], [], {}
    for u in pioneers:
        reg = is_regular(config, u, region, params)
        trip = is_escapable(config, u, S_set, Lam, params.K)
        if reg:
            regular.append(u)
        if trip is not None:
            escapable.append(u)
            trips[u] = trip
        if reg and trip is not None:
            X.append(u)
    return Classification(pioneers, regular, escapable, X, trips)


def pioneer_fractions(spec: LatticeSpec, S, Lam, p: float, params: RegularityParams,
                      n: int = 1000, seed: int = 0) -> dict:
    """Sample means of the pioneer counts and the measured ratios E|X| / E P, E P^reg / E P."""
    g = graph_of(spec, Lam)
    rng = CounterRNG(seed, "classify")
    tot = np.zeros(4)
    for _ in range(n):
        c = classify_pioneers(sample(g, p, rng), S, Lam, params)
        tot += [len(c.pioneers), len(c.regular), len(c.escapable), len(c.X)]
    mean = tot / n
    ratio = (lambda a: float(a / mean[0]) if mean[0] > 0 else math.nan)
    return {"n": n, "mean_pioneers": float(mean[0]), "mean_regular": float(mean[1]),
            "mean_escapable": float(mean[2]), "mean_X": float(mean[3]),
            "regular_fraction": ratio(mean[1]), "X_fraction": ratio(mean[3])}


# --------------------------------------------------------------------------
# volume tails


@dataclass
class VolumeTail:
    t: list
    prob: list
    stderr: list
    scale: float
    n: int

    def estimates(self, params: dict | None = None, seed=None) -> list:
        out = []
        for t, q, se in zip(self.t, self.prob, self.stderr):
            out.append(Estimate(q, se, self.n, seed, "mc", quantity="volume_tail",
                                params=dict(params or {}, t=t)))
        return out


def volume_tail(spec: LatticeSpec, p: float, region, V, t_grid, n: int = 10_000,
                seed: int = 0) -> VolumeTail:
    """P[|C(0) within V| >= t |V|^(4/d)] for each t, with binomial standard errors."""
    g = graph_of(spec, region)
    V = sorted(_vset(V))
    if any(not g.has(v) for v in V):
        raise GeometryError("V must be a subset of the region")
    w = np.zeros(g.n_vertices)
    for v in V:
        w[g.idx(v)] = 1.0
    sizes = cluster_values(spec, region, (0,) * spec.d, w, p, n, seed)[:, 0]
    scale = len(V) ** (4.0 / spec.d)
    t = [float(x) for x in t_grid]
    prob = [float(np.mean(sizes >= x * scale)) for x in t]
    se = [math.sqrt(q * (1 - q) / n) for q in prob]
    return VolumeTail(t, prob, se, scale, n)
