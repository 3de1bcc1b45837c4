import itertools

import pytest
from hypothesis import given, strategies as st

from percolab.lattice import (GeometryError, LatticeSpec, Region, boundary_edge_pairs, edge_set,
                              facet, graph_of, inner_boundary)

from strategies import polyomino

NN2 = LatticeSpec(2)


def brute_edges(spec, S):
    S = list(S)
    return sum(1 for a, b in itertools.combinations(S, 2)
               if 0 < sum(abs(x - y) for x, y in zip(a, b)) <= spec.range)


def test_edge_counts():
    assert len(edge_set(NN2, [(0, 0), (1, 0)])) == 1
    assert len(edge_set(NN2, Region.box(1, d=2))) == 12
    assert len(edge_set(LatticeSpec(2, 2), [(0, 0), (2, 0)])) == 1
    assert graph_of(NN2, Region.box(2, d=2)).n_edges == 40


@pytest.mark.parametrize("d,L", [(1, 1), (2, 1), (2, 2), (3, 1), (1, 3)])
def test_edge_count_matches_pair_scan(d, L):
    spec = LatticeSpec(d, L)
    box = Region.box(2 if d < 3 else 1, d=d)
    assert graph_of(spec, box).n_edges == brute_edges(spec, box.vertices)


def test_degree():
    assert NN2.degree == 4
    assert LatticeSpec(2, 2).degree == 12
    assert LatticeSpec(3).degree == 6


def test_inner_boundary_examples():
    assert inner_boundary(NN2, [(0, 0)]) == [(0, 0)]
    ib = inner_boundary(NN2, Region.box(1, d=2))
    assert len(ib) == 8 and (0, 0) not in ib
    assert sorted(inner_boundary(LatticeSpec(1), [(0,), (1,), (2,)])) == [(0,), (2,)]


def test_boundary_pair_examples():
    assert len(boundary_edge_pairs(NN2, [(0, 0)])) == 4
    assert len(boundary_edge_pairs(NN2, Region.box(1, d=2))) == 12
    assert len(boundary_edge_pairs(LatticeSpec(2, 2), [(0, 0)])) == 12


def test_boundary_pairs_respect_lambda():
    S = [(0, 0)]
    Lam = [(0, 0), (1, 0)]
    assert boundary_edge_pairs(NN2, S, Lam) == [((0, 0), (1, 0))]


@given(polyomino())
def test_boundary_invariants(S):
    Sset = set(S)
    ib = inner_boundary(NN2, S)
    assert set(ib) <= Sset
    pairs = boundary_edge_pairs(NN2, S)
    assert all(u in Sset and v not in Sset for u, v in pairs)
    # edges with exactly one endpoint in S, counted directly
    count = 0
    for u in S:
        for axis in range(2):
            for s in (-1, 1):
                v = list(u)
                v[axis] += s
                count += tuple(v) not in Sset
    assert len(pairs) == count


def test_facet_examples():
    assert sorted(facet(NN2, 2, 1, 1)) == [(2, -1), (2, 0), (2, 1)]
    assert facet(NN2, 1, 1, -1) == [(-1, 0)]
    f = facet(NN2, 4, 1, 1)
    assert sorted(f) == [(4, j) for j in range(-2, 3)]


@pytest.mark.parametrize("d,k", [(2, 2), (2, 3), (3, 2)])
def test_facets_disjoint_and_on_boundary(d, k):
    spec = LatticeSpec(d)
    bd = set(inner_boundary(spec, Region.box(k, d=d)))
    facets = [set(facet(spec, k, i, s)) for i in range(1, d + 1) for s in (-1, 1)]
    for F in facets:
        assert F <= bd
    for a, b in itertools.combinations(facets, 2):
        assert not a & b


def brute_tube(k, dirs, d):
    centers = [(0,) * d]
    for step in dirs:
        c = list(centers[-1])
        c[abs(step) - 1] += (1 if step > 0 else -1) * 2 * k
        centers.append(tuple(c))
    pts = set()
    for c in centers:
        for off in itertools.product(range(-k, k + 1), repeat=d):
            pts.add(tuple(a + b for a, b in zip(c, off)))
    return pts


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("dirs", [[], [1], [1, 1], [1, 2, 2], [2, 1, 1]])
def test_tube_volume(d, k, dirs):
    dirs = [s for s in dirs if abs(s) <= d]
    Q = Region.tube(k, dirs, d)
    N = len(dirs) + 1
    assert set(Q.vertices) == brute_tube(k, dirs, d)
    assert len(Q) == N * (2 * k + 1) ** d - (N - 1) * (2 * k + 1) ** (d - 1)


@given(st.sampled_from(["box:2", "box:1@1,-1", "slab:1,2,3", "tube:1:1,2", "set:0,0;1,0;1,1"]))
def test_region_parse_roundtrip(text):
    R = Region.parse(text, 2)
    again = Region.parse(R.describe(), 2)
    assert again.vertex_set == R.vertex_set
    assert Region.from_json(R.to_json(), d=2).vertex_set == R.vertex_set


def test_region_errors():
    with pytest.raises(GeometryError):
        Region.parse("blob:3", 2)
    with pytest.raises(GeometryError):
        graph_of(NN2, Region.box(1, d=2)).idx((5, 5))


def test_spread_out_adjacency():
    spec = LatticeSpec(2, 2)
    assert spec.adjacent((0, 0), (2, 0))
    assert spec.adjacent((0, 0), (1, 1))
    assert not spec.adjacent((0, 0), (2, 1))
