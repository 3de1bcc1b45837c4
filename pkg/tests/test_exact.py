import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from percolab.config import CapExceeded
from percolab.estimators import tau_poly
from percolab.exact import EdgePoly, frontier_two_point, two_point_poly
from percolab.lattice import LatticeSpec, Region, graph_of

import oracles
from strategies import polyomino

NN2 = LatticeSpec(2)
SQUARE = [(0, 0), (1, 0), (0, 1), (1, 1)]


def test_edgepoly_constant_and_derivative():
    one = EdgePoly.constant(5)
    for p in (0.0, 0.3, 1.0):
        assert one(p) == pytest.approx(1.0, abs=1e-14)
        assert one.derivative(p) == pytest.approx(0.0, abs=1e-12)
    # P(all of 3 edges open) = p^3
    cube = EdgePoly([0, 0, 0, 1])
    assert cube(0.4) == pytest.approx(0.064)
    assert cube.derivative(0.4) == pytest.approx(3 * 0.16)


@given(st.lists(st.integers(0, 5), min_size=2, max_size=6), st.floats(0.05, 0.95))
def test_edgepoly_derivative_matches_finite_difference(counts, p):
    f = EdgePoly(counts)
    h = 1e-6
    assert f.derivative(p) == pytest.approx((f(p + h) - f(p - h)) / (2 * h), abs=1e-5)


def test_edgepoly_add_checks_sizes():
    with pytest.raises(ValueError):
        EdgePoly([1, 1]) + EdgePoly([1, 1, 1])


@pytest.mark.parametrize("p", [0.0, 0.2, 0.5, 0.8, 1.0])
def test_square_two_point(p):
    for method in ("enumerate", "frontier"):
        val = tau_poly(NN2, SQUARE, (0, 0), (1, 1), method=method)(p)
        assert val == pytest.approx(2 * p**2 - p**4, abs=1e-14)


def test_path_two_point():
    f = tau_poly(LatticeSpec(1), [(0,), (1,), (2,)], (0,), (2,))
    assert f(0.3) == pytest.approx(0.09)


@given(polyomino(max_size=9), st.floats(0.0, 1.0), st.data())
def test_enumeration_and_frontier_agree_with_oracle(S, p, data):
    y = data.draw(st.sampled_from(S))
    g = graph_of(NN2, S)
    enum = tau_poly(NN2, S, (0, 0), y, method="enumerate")(p)
    front = frontier_two_point(g, g.idx((0, 0)), g.idx(y))(p)
    ref = oracles.tau(S, p, (0, 0), y)
    assert enum == pytest.approx(ref, abs=1e-12)
    assert front == pytest.approx(ref, abs=1e-12)


def test_frontier_beyond_cap_matches_known_value():
    # Lambda_2 has 40 edges; tau(0, 0) = 1 is the trivial check, and the
    # frontier value for a corner-to-corner pair lies strictly between the
    # value inside the 3x3 sub-box and 1
    box2 = Region.box(2, d=2)
    g = graph_of(NN2, box2)
    assert g.n_edges == 40
    with pytest.raises(CapExceeded):
        tau_poly(NN2, box2, (0, 0), (2, 2), method="enumerate")
    big = tau_poly(NN2, box2, (0, 0), (1, 1), method="frontier")(0.5)
    small = tau_poly(NN2, Region.box(1, d=2), (0, 0), (1, 1))(0.5)
    assert small < big < 1


def test_two_point_poly_on_edge_list():
    edges = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    f = two_point_poly(edges, 4, 0, 2)
    assert f(0.5) == pytest.approx(0.4375)


def test_spread_out_two_point():
    spec = LatticeSpec(1, 2)
    S = [(0,), (1,), (2,)]
    # three edges: 0-1, 1-2, 0-2; 0 <-> 2 iff direct edge open or both others open
    p = 0.3
    want = p + (1 - p) * p * p
    assert tau_poly(spec, S, (0,), (2,))(p) == pytest.approx(want)
    assert oracles.tau(S, p, (0,), (2,), L=2) == pytest.approx(want)
