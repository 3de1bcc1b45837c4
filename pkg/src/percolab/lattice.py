"""Geometry of Z^d: edge rules, finite regions, boundaries, facets, tubes.

Vertices are integer coordinate tuples.  Axis indices in the public API are
1-based (``i`` in ``1..d``) to match the usual ``e_1, ..., e_d`` convention.
Norms: ``|x|`` is the l-infinity norm, adjacency uses the l1 norm.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import rng as _rng

Vertex = tuple


class GeometryError(ValueError):
    """Raised when a region or vertex violates a geometric precondition."""


@dataclass(frozen=True)
class LatticeSpec:
    """The graph (Z^d, E): nearest-neighbour for ``range == 1``, spread-out otherwise."""

    d: int
    range: int = 1

    def __post_init__(self):
        if self.d < 1:
            raise GeometryError(f"dimension must be >= 1, got {self.d}")
        if self.range < 1:
            raise GeometryError(f"range must be >= 1, got {self.range}")

    @functools.cached_property
    def offsets(self) -> tuple:
        """All y != 0 with ||y||_1 <= range, lexicographically sorted."""
        r = self.range
        out = [
            y
            for y in itertools.product(range(-r, r + 1), repeat=self.d)
            if 0 < sum(abs(c) for c in y) <= r
        ]
        return tuple(sorted(out))

    @functools.cached_property
    def positive_offsets(self) -> tuple:
        return tuple(y for y in self.offsets if y > (0,) * self.d)

    @property
    def degree(self) -> int:
        return len(self.offsets)

    def adjacent(self, x: Vertex, y: Vertex) -> bool:
        dist = sum(abs(a - b) for a, b in zip(x, y))
        return 0 < dist <= self.range

    def neighbours(self, x: Vertex) -> list:
        return [tuple(a + b for a, b in zip(x, y)) for y in self.offsets]

    def to_json(self) -> dict:
        return {"d": self.d, "L": self.range}


def sup_norm(x) -> int:
    return max((abs(c) for c in x), default=0)


@dataclass(frozen=True)
class Region:
    """A finite vertex set given symbolically.

    kinds: ``box`` (center, radius), ``slab`` (ell, depth, width; the finite
    truncation ``-ell <= x_1 <= depth, |x_i| <= width``), ``tube`` (k, dirs,
    the union of boxes ``Lambda_k(x_j)`` with ``x_1 = 0`` and
    ``x_{j+1} - x_j = 2k e_{dirs[j]}``) and ``explicit``.
    """

    kind: str
    d: int
    params: tuple = ()
    _explicit: tuple = field(default=(), repr=False)

    # constructors ---------------------------------------------------------
    @classmethod
    def box(cls, radius: int, center: Sequence[int] | None = None, d: int | None = None) -> "Region":
        if center is None:
            if d is None:
                raise GeometryError("box needs a center or a dimension")
            center = (0,) * d
        center = tuple(int(c) for c in center)
        if radius < 0:
            raise GeometryError("box radius must be >= 0")
        return cls("box", len(center), (center, int(radius)))

    @classmethod
    def slab(cls, ell: int, depth: int, width: int, d: int) -> "Region":
        if depth < -ell or width < 0:
            raise GeometryError("empty slab")
        return cls("slab", d, (int(ell), int(depth), int(width)))

    @classmethod
    def tube(cls, k: int, dirs: Sequence[int], d: int) -> "Region":
        dirs = tuple(int(i) for i in dirs)
        if k < 1:
            raise GeometryError("tube block radius must be >= 1")
        if any(not 1 <= i <= d for i in dirs):
            raise GeometryError(f"tube directions must lie in 1..{d}")
        return cls("tube", d, (int(k), dirs))

    @classmethod
    def explicit(cls, vertices: Iterable[Sequence[int]], d: int | None = None) -> "Region":
        verts = tuple(sorted({tuple(int(c) for c in v) for v in vertices}))
        if d is None:
            if not verts:
                raise GeometryError("empty explicit region needs a dimension")
            d = len(verts[0])
        if any(len(v) != d for v in verts):
            raise GeometryError("explicit region mixes dimensions")
        return cls("explicit", d, (), verts)

    # resolution -----------------------------------------------------------
    @functools.cached_property
    def vertices(self) -> tuple:
        """Sorted, duplicate-free vertex tuple."""
        if self.kind == "explicit":
            return self._explicit
        if self.kind == "box":
            center, r = self.params
            ranges = [range(c - r, c + r + 1) for c in center]
            return tuple(itertools.product(*ranges))
        if self.kind == "slab":
            ell, depth, width = self.params
            ranges = [range(-ell, depth + 1)] + [range(-width, width + 1)] * (self.d - 1)
            return tuple(itertools.product(*ranges))
        if self.kind == "tube":
            out = set()
            for x in self.block_centers:
                out.update(Region.box(self.params[0], x).vertices)
            return tuple(sorted(out))
        raise GeometryError(f"unknown region kind {self.kind!r}")

    @functools.cached_property
    def vertex_set(self) -> frozenset:
        return frozenset(self.vertices)

    @property
    def block_centers(self) -> list:
        if self.kind != "tube":
            raise GeometryError("only tubes have block centers")
        k, dirs = self.params
        x = [0] * self.d
        centers = [tuple(x)]
        for i in dirs:
            x[i - 1] += 2 * k
            centers.append(tuple(x))
        return centers

    def __contains__(self, v) -> bool:
        return tuple(v) in self.vertex_set

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def minus(self, removed: Iterable[Vertex]) -> "Region":
        removed = set(map(tuple, removed))
        return Region.explicit([v for v in self.vertices if v not in removed], d=self.d)

    def issubset(self, other: "Region | None") -> bool:
        if other is None:
            return True
        return self.vertex_set <= other.vertex_set

    # serialisation ----------------------------------------------------------
    def to_json(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "center": list(self.params[0]), "radius": self.params[1]}
        if self.kind == "slab":
            ell, depth, width = self.params
            return {"kind": "slab", "d": self.d, "ell": ell, "depth": depth, "width": width}
        if self.kind == "tube":
            return {"kind": "tube", "d": self.d, "k": self.params[0], "dirs": list(self.params[1])}
        return {"kind": "explicit", "d": self.d, "vertices": [list(v) for v in self.vertices]}

    @classmethod
    def from_json(cls, obj: dict, d: int | None = None) -> "Region":
        kind = obj.get("kind")
        if kind == "box":
            center = obj.get("center")
            return cls.box(int(obj["radius"]), center=center, d=obj.get("d", d))
        if kind == "slab":
            return cls.slab(obj["ell"], obj["depth"], obj["width"], obj.get("d", d))
        if kind == "tube":
            return cls.tube(obj["k"], obj.get("dirs", []), obj.get("d", d))
        if kind == "explicit":
            return cls.explicit(obj["vertices"], d=obj.get("d", d))
        raise GeometryError(f"unknown region kind {kind!r}")

    @classmethod
    def parse(cls, text: str, d: int) -> "Region":
        """Short forms: ``box:R``, ``box:R@x,y``, ``slab:ell,depth,width``,
        ``tube:k:1,2,1``, ``set:0,0;1,0``."""
        kind, _, rest = text.partition(":")
        if kind == "box":
            radius, _, center = rest.partition("@")
            c = _coords(center) if center else None
            return cls.box(int(radius), center=c, d=d)
        if kind == "slab":
            ell, depth, width = (int(t) for t in rest.split(","))
            return cls.slab(ell, depth, width, d)
        if kind == "tube":
            k, _, dirs = rest.partition(":")
            return cls.tube(int(k), [int(t) for t in dirs.split(",") if t], d)
        if kind in ("set", "explicit"):
            return cls.explicit([_coords(t) for t in rest.split(";") if t], d=d)
        raise GeometryError(f"cannot parse region {text!r}")

    def describe(self) -> str:
        if self.kind == "box":
            center, r = self.params
            if any(center):
                return f"box:{r}@{','.join(map(str, center))}"
            return f"box:{r}"
        if self.kind == "slab":
            return "slab:" + ",".join(map(str, self.params))
        if self.kind == "tube":
            return f"tube:{self.params[0]}:{','.join(map(str, self.params[1]))}"
        return "set:" + ";".join(",".join(map(str, v)) for v in self.vertices)


def _coords(text: str) -> tuple:
    return tuple(int(t) for t in text.split(","))


def as_region(S, d: int | None = None) -> Region:
    if isinstance(S, Region):
        return S
    return Region.explicit(S, d=d)


# --------------------------------------------------------------------------
# indexed graphs


class Graph:
    """The finite graph (S, E(S)) with integer vertex indices.

    ``vertices`` are sorted lexicographically; ``edges`` is an ``(E, 2)``
    array of index pairs ``i < j`` sorted lexicographically, which is the
    canonical (min-endpoint, max-endpoint) coordinate order.
    """

    def __init__(self, spec: LatticeSpec, vertices: Sequence[Vertex]):
        self.spec = spec
        self.vertices = tuple(vertices)
        d = spec.d
        self.coords = np.array(self.vertices, dtype=np.int64).reshape(len(self.vertices), d)
        self.n_vertices = len(self.vertices)
        self.edges = self._build_edges()
        self.n_edges = len(self.edges)
        a = self.coords[self.edges[:, 0]]
        b = self.coords[self.edges[:, 1]]
        self.edge_keys = _rng.edge_keys_from_coords(a, b)

    def _encode(self, coords):
        return ((coords - self._lo) * self._strides).sum(axis=1)

    def _build_edges(self) -> np.ndarray:
        V = self.n_vertices
        if V == 0:
            return np.zeros((0, 2), dtype=np.int64)
        r = self.spec.range
        self._lo = self.coords.min(axis=0) - r
        hi = self.coords.max(axis=0) + r
        shape = hi - self._lo + 1
        strides = np.ones(self.spec.d, dtype=np.int64)
        for j in range(self.spec.d - 2, -1, -1):
            strides[j] = strides[j + 1] * shape[j + 1]
        self._strides = strides
        self._keys = self._encode(self.coords)  # sorted because vertices are
        pairs = []
        for y in self.spec.positive_offsets:
            nb = self._encode(self.coords + np.array(y, dtype=np.int64))
            pos = np.searchsorted(self._keys, nb)
            pos = np.minimum(pos, V - 1)
            hit = self._keys[pos] == nb
            src = np.nonzero(hit)[0]
            pairs.append(np.stack([src, pos[hit]], axis=1))
        edges = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        return np.ascontiguousarray(edges[order], dtype=np.int64)

    @functools.cached_property
    def index(self) -> dict:
        return {v: i for i, v in enumerate(self.vertices)}

    def idx(self, v) -> int:
        try:
            return self.index[tuple(v)]
        except KeyError:
            raise GeometryError(f"vertex {tuple(v)} is not in the region") from None

    def has(self, v) -> bool:
        return tuple(v) in self.index

    @functools.cached_property
    def edge_index(self) -> dict:
        return {(int(a), int(b)): e for e, (a, b) in enumerate(self.edges)}

    def edge_id(self, x, y) -> int:
        a, b = sorted((self.idx(x), self.idx(y)))
        try:
            return self.edge_index[(a, b)]
        except KeyError:
            raise GeometryError(f"{tuple(x)}-{tuple(y)} is not an edge of the region") from None

    @functools.cached_property
    def csr(self):
        """(indptr, neighbour, edge id) adjacency arrays."""
        V, E = self.n_vertices, self.n_edges
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        eid = np.concatenate([np.arange(E), np.arange(E)])
        order = np.lexsort((dst, src))
        src, dst, eid = src[order], dst[order], eid[order]
        indptr = np.zeros(V + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        return np.cumsum(indptr), np.ascontiguousarray(dst), np.ascontiguousarray(eid)

    def subgraph(self, vertices) -> tuple["Graph", np.ndarray]:
        """Induced subgraph and the parent edge id of each of its edges."""
        sub = graph_of(self.spec, vertices)
        if sub.n_edges == 0:
            return sub, np.zeros(0, dtype=np.int64)
        parent = np.array(
            [self.edge_index[(self.idx(sub.vertices[a]), self.idx(sub.vertices[b]))]
             for a, b in sub.edges],
            dtype=np.int64,
        )
        return sub, parent

    def vertex_mask(self, vertices) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        for v in vertices:
            mask[self.idx(v)] = True
        return mask

    def __repr__(self):
        return f"Graph(d={self.spec.d}, L={self.spec.range}, V={self.n_vertices}, E={self.n_edges})"


@functools.lru_cache(maxsize=256)
def _graph_cached(spec: LatticeSpec, vertices: tuple) -> Graph:
    return Graph(spec, vertices)


def graph_of(spec: LatticeSpec, S) -> Graph:
    if isinstance(S, Graph):
        return S
    if isinstance(S, Region):
        verts = S.vertices
    else:
        verts = tuple(sorted({tuple(v) for v in S}))
    return _graph_cached(spec, verts)


# --------------------------------------------------------------------------
# operations


def _verts(S) -> tuple:
    if isinstance(S, Region):
        return S.vertices
    if isinstance(S, Graph):
        return S.vertices
    return tuple(sorted({tuple(v) for v in S}))


def _vset(S) -> frozenset:
    if isinstance(S, Region):
        return S.vertex_set
    return frozenset(_verts(S))


def edge_set(spec: LatticeSpec, S) -> list:
    """E(S) in canonical order, as pairs of coordinate tuples."""
    g = graph_of(spec, S)
    return [(g.vertices[a], g.vertices[b]) for a, b in g.edges]


def inner_boundary(spec: LatticeSpec, S) -> list:
    """Vertices of S with at least one neighbour outside S, sorted."""
    members = _vset(S)
    return [x for x in _verts(S) if any(y not in members for y in spec.neighbours(x))]


def boundary_edge_pairs(spec: LatticeSpec, S, Lam=None) -> list:
    """Ordered pairs (u, v) with u in S, v in Lam \\ S, u ~ v.

    ``Lam=None`` stands for the whole lattice.
    """
    members = _vset(S)
    outer = None if Lam is None else _vset(Lam)
    if outer is not None and not members <= outer:
        raise GeometryError("S must be a subset of Lambda")
    out = []
    for u in _verts(S):
        for v in spec.neighbours(u):
            if v in members:
                continue
            if outer is None or v in outer:
                out.append((u, v))
    return out


def facet(spec: LatticeSpec, k: int, i: int, sign: int, center: Sequence[int] | None = None) -> list:
    """F_i^{+/-}(k) = Lambda_{floor(k/2)}(+/- k e_i) intersected with the inner boundary of Lambda_k."""
    if k < 1:
        raise GeometryError("facets need k >= 1")
    if not 1 <= i <= spec.d:
        raise GeometryError(f"axis must lie in 1..{spec.d}")
    if sign not in (1, -1):
        raise GeometryError("sign must be +1 or -1")
    z = tuple(center) if center is not None else (0,) * spec.d
    c = list(z)
    c[i - 1] += sign * k
    cap = Region.box(k // 2, c)
    bd = inner_boundary(spec, Region.box(k, z))
    return [x for x in bd if x in cap.vertex_set]


def neighbours_in(spec: LatticeSpec, x: Vertex, S) -> list:
    members = _vset(S)
    return [y for y in spec.neighbours(x) if y in members]
