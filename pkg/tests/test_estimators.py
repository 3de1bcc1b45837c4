import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from percolab import estimators as est
from percolab.lattice import GeometryError, LatticeSpec, Region, boundary_edge_pairs, facet, inner_boundary

import oracles

NN1 = LatticeSpec(1)
NN2 = LatticeSpec(2)
SQUARE = [(0, 0), (1, 0), (0, 1), (1, 1)]
BOX1 = Region.box(1, d=2)
# theta_2(1/2) for d=2 by bitmask flooding over all 2^24 configurations of the
# edges with an interior endpoint (independent script, run once)
THETA2_HALF = 14768865 / 2**24


def within(e, exact, k):
    return abs(e.mean - exact) <= k * e.stderr + 1e-12


# -- tau ---------------------------------------------------------------------

@pytest.mark.parametrize("p", [0.2, 0.7])
def test_tau_single_edge(p):
    S = [(0, 0), (1, 0)]
    assert est.tau_exact(NN2, S, p, (0, 0), (1, 0)).mean == pytest.approx(p)
    assert within(est.tau(NN2, S, p, (0, 0), (1, 0), n=20_000, seed=2), p, 4)


def test_tau_trivial_cases():
    assert est.tau(NN2, BOX1, 0.3, (1, 1), (1, 1), n=100).mean == 1.0
    assert est.tau_exact(NN2, BOX1, 0.3, (1, 1), (1, 1)).mean == 1.0
    assert est.tau_exact(NN2, BOX1, 0.0, (0, 0), (1, 1)).mean == 0.0


def test_tau_square_and_mc():
    exact = est.tau_exact(NN2, SQUARE, 0.5, (0, 0), (1, 1))
    assert exact.mean == pytest.approx(0.4375, abs=1e-15)
    assert exact.mode == "exact" and exact.stderr == 0
    assert within(est.tau(NN2, SQUARE, 0.5, (0, 0), (1, 1), n=100_000, seed=1), 0.4375, 5)


def test_tau_rejects_points_outside():
    with pytest.raises(GeometryError):
        est.tau(NN2, SQUARE, 0.5, (0, 0), (5, 5), n=10)
    with pytest.raises(ValueError):
        est.tau(NN2, SQUARE, 1.2, (0, 0), (1, 1), n=10)


# -- phi and pioneers ---------------------------------------------------------

def phi_oracle(S, p):
    total = 0.0
    for u, _v in boundary_edge_pairs(NN2, S):
        total += p * oracles.tau(S, p, (0, 0), u)
    return total


@pytest.mark.parametrize("p", [0.0, 0.1, 0.37])
def test_phi_singleton(p):
    assert est.phi(NN2, [(0, 0)], p, mode="exact").mean == pytest.approx(4 * p)
    assert est.phi(NN2, [(0, 0)], p, n=1000).mean == pytest.approx(4 * p)


def test_phi_box1_exact_and_mc():
    ref = phi_oracle(list(BOX1.vertices), 0.5)
    e = est.phi(NN2, BOX1, 0.5, mode="exact")
    assert e.mean == pytest.approx(ref, abs=1e-12)
    assert within(est.phi(NN2, BOX1, 0.5, n=50_000, seed=3), ref, 4)


def test_phi_with_lambda_counts_only_inner_exits():
    S = [(0, 0)]
    Lam = [(0, 0), (1, 0)]
    assert est.phi(NN2, S, 0.3, Lam=Lam, mode="exact").mean == pytest.approx(0.3)


def test_phi_needs_origin():
    with pytest.raises(GeometryError):
        est.phi(NN2, [(1, 0)], 0.5, n=10)


def test_pioneers_examples():
    assert est.pioneers(NN2, [(0, 0)], 0.4, mode="exact").mean == 1.0
    assert est.pioneers(NN2, [(0, 0)], 0.4, n=100).mean == 1.0
    assert est.pioneers(NN2, Region.box(2, d=2), 0.0, n=100).mean == 0.0
    box = list(BOX1.vertices)
    ref = sum(oracles.tau(box, 0.5, (0, 0), u) for u in inner_boundary(NN2, box))
    assert est.pioneers(NN2, BOX1, 0.5, mode="exact").mean == pytest.approx(ref, abs=1e-12)
    assert within(est.pioneers(NN2, BOX1, 0.5, n=50_000, seed=5), ref, 4)


# -- theta --------------------------------------------------------------------

@pytest.mark.parametrize("p", [0.0, 0.1, 0.5, 0.9])
def test_theta_one_step(p):
    assert est.theta(NN2, 1, p, mode="exact").mean == pytest.approx(1 - (1 - p) ** 4, abs=1e-14)
    assert est.theta(NN1, 1, p, mode="exact").mean == pytest.approx(1 - (1 - p) ** 2, abs=1e-14)


def test_theta_examples():
    assert est.theta(NN2, 1, 0.5, mode="exact").mean == 0.9375
    assert est.theta(NN2, 3, 0.0, n=100).mean == 0.0
    assert est.theta(NN2, 2, 0.5, mode="exact").mean == pytest.approx(THETA2_HALF, abs=1e-14)
    assert within(est.theta(NN2, 2, 0.5, n=100_000, seed=6), THETA2_HALF, 4)


def test_theta_needs_positive_radius():
    with pytest.raises(ValueError):
        est.theta(NN2, 0, 0.5, n=10)


# -- chi ----------------------------------------------------------------------

def test_chi_examples():
    assert est.chi(NN2, 0.0, 3, n=100).mean == 1.0
    e = est.chi(NN1, 0.5, 40, n=50_000, seed=8)
    assert within(e, 1 + 2 * 0.5 / 0.5, 4)


def test_chi_touch_fraction_small_far_below_pc():
    e = est.chi(NN2, 0.3, 64, n=2000, seed=1)
    assert math.isfinite(e.mean) and e.diagnostics["touch_fraction"] < 0.01


def test_chi_warns_above_pc():
    with pytest.warns(UserWarning):
        est.chi(NN2, 0.6, 2, n=50, p_c=0.5)


# -- correlation lengths --------------------------------------------------------

def test_decay_fit_on_exact_chain():
    n = [1, 2, 3, 4, 5, 6]
    fit = est.fit_decay_length(n, [0.5**k for k in n])
    assert fit.xi == pytest.approx(-1 / math.log(0.5), rel=1e-12)
    assert fit.xi == pytest.approx(1.4427, abs=1e-4)
    doubled = est.fit_decay_length(n, [2 * 0.5**k for k in n])
    assert doubled.xi == pytest.approx(fit.xi, rel=1e-12)


def test_decay_fit_drops_zeros():
    with pytest.warns(UserWarning):
        fit = est.fit_decay_length([1, 2, 3, 4], [0.5, 0.25, 0.125, 0.0])
    assert fit.dropped == [4.0]
    with pytest.raises(ValueError):
        est.fit_decay_length([1, 2], [0.0, 0.0])


def test_xi_directional_chain():
    fit = est.xi_directional(NN1, [1], 0.5, [1, 2, 3, 4, 5], samples=100_000, seed=2)
    assert fit.xi == pytest.approx(1.4427, abs=4 * fit.stderr + 1e-9)


def test_xi_directional_small_p():
    fit = est.xi_directional(NN2, [1, 0], 0.05, [1, 2], samples=100_000, seed=2)
    assert 0 < fit.xi < 1
    assert len(fit.residuals) == 2


def test_xi_phi_examples():
    assert est.xi_phi(NN2, 1.0, 0.0, 3, n=100).mean == 0.0
    e = est.xi_phi(NN1, 1.0, 0.5, 60, n=50_000, seed=4)
    assert within(e, 4 / 3, 4)


@given(st.floats(0.1, 5), st.floats(0.1, 10), st.floats(1, 10))
def test_xi_phi_homogeneous(phi_order, weighted, size):
    base = est.xi_phi_from_moments(weighted, size, phi_order)
    scaled = est.xi_phi_from_moments(weighted * 2**phi_order, size, phi_order)
    assert scaled == pytest.approx(2 * base, rel=1e-12)


# -- sharp length ---------------------------------------------------------------

def test_sharp_length_small_p():
    assert est.sharp_length(NN2, 0.1, 5, n=200).value == 1
    assert est.sharp_length(NN2, 0.0, 5, n=200).value == 1


def test_sharp_length_grows_with_p():
    lo = est.sharp_length(NN2, 0.3, 60, n=2000, seed=3).value
    hi = est.sharp_length(NN2, 0.45, 60, n=2000, seed=3).value
    assert math.isfinite(hi) and hi > lo


def test_sharp_length_inf_when_not_reached():
    assert est.sharp_length(NN2, 0.45, 3, n=500).value == math.inf


# -- error term and facet sums ----------------------------------------------------

def test_error_term_examples():
    e = est.error_term(NN2, (0, 0), (1, 1), [], SQUARE, 0.5)
    assert e.mean == 0.0
    one = est.error_term(NN2, (0, 0), (1, 1), [(0, 0)], SQUARE, 0.5)
    assert one.mean == pytest.approx(0.4375)
    corner = est.error_term(NN2, (0, 0), (1, 1), [(1, 0)], SQUARE, 0.5)
    ref = oracles.tau(SQUARE, 0.5, (0, 0), (1, 0)) * oracles.tau(SQUARE, 0.5, (1, 0), (1, 1))
    assert corner.mean == pytest.approx(ref, abs=1e-12)
    mc = est.error_term(NN2, (0, 0), (1, 1), [(1, 0), (0, 1)], SQUARE, 0.5, mode="mc",
                        n=50_000, seed=1)
    assert within(mc, 2 * ref, 4)


def test_facet_sum_examples():
    assert est.facet_sum(NN2, BOX1, [(1, 0)], 0.0, n=100).mean == 0.0
    assert est.facet_sum(NN2, BOX1, [(1, 0), (1, 1)], 1.0, n=100).mean == 2.0
    F = facet(NN2, 1, 1, 1)
    assert F == [(1, 0)]
    ref = oracles.tau(list(BOX1.vertices), 0.5, (0, 0), (1, 0))
    assert est.facet_sum(NN2, BOX1, F, 0.5, mode="exact").mean == pytest.approx(ref, abs=1e-12)
    assert within(est.facet_sum(NN2, BOX1, F, 0.5, n=50_000, seed=2), ref, 4)


def test_tube_facet_sums_shape():
    out = est.tube_facet_sums(NN2, 1, [1, 1], 0.5, n=2000, seed=1)
    assert [e.params["N"] for e in out] == [1, 2, 3]
    assert all(e.mean > 0 for e in out)


# -- critical point ---------------------------------------------------------------

def test_decays_in_one_dimension():
    for p in (0.3, 0.7, 0.95):
        assert est.decays(NN1, p, 4, n=4000, seed=1)


def test_pc_bisection_contract():
    wide = est.estimate_pc(NN2, 4, 2000, p_bracket=(0.3, 0.7), tol=0.08, seed=1)
    narrow = est.estimate_pc(NN2, 4, 2000, p_bracket=(0.3, 0.7), tol=0.02, seed=1)
    assert narrow.width <= 0.02 and wide.width <= 0.08
    assert 2 * narrow.width <= wide.width
    assert wide.lo <= narrow.p_c <= wide.hi or abs(narrow.p_c - wide.p_c) < 0.08


def test_pc_requires_sign_change():
    with pytest.raises(ValueError):
        est.estimate_pc(NN2, 4, 500, p_bracket=(0.1, 0.2))


@pytest.mark.slow
def test_pc_square_lattice():
    r = est.estimate_pc(NN2, 64, 4000, p_bracket=(0.4, 0.6), tol=0.005, seed=1)
    assert abs(r.p_c - 0.5) <= 0.01


# -- couplings --------------------------------------------------------------------

def test_crn_monotone_in_p():
    box = Region.box(3, d=2)
    g = est.graph_of(NN2, box)
    bd = np.zeros(g.n_vertices)
    for u in inner_boundary(NN2, box):
        bd[g.idx(u)] = 1
    prev = None
    for p in (0.2, 0.35, 0.5, 0.65):
        v = est.cluster_values(NN2, box, (0, 0), np.stack([np.ones(g.n_vertices), bd], 1), p, 5000, seed=9)
        if prev is not None:
            assert np.all(v >= prev)
        prev = v


def test_domain_monotone():
    small, big = Region.box(1, d=2), Region.box(3, d=2)
    gs, gb = est.graph_of(NN2, small), est.graph_of(NN2, big)
    for y in [(1, 1), (1, 0), (-1, 1)]:
        a = est.cluster_values(NN2, small, (0, 0), est.tau_weights(NN2, small, y), 0.5, 5000, seed=2)
        b = est.cluster_values(NN2, big, (0, 0), est.tau_weights(NN2, big, y), 0.5, 5000, seed=2)
        assert np.all(a <= b)
