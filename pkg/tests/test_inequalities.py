import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from percolab.events import ConnectionEvent, EdgeOpenEvent
from percolab.fixtures import FIXTURES
from percolab.inequalities import (CheckReport, append_jsonl, check_bk, check_derivative_identity,
                                   check_effective_reversed_sl, check_far_reversed_sl, check_fkg,
                                   check_partial_monotonicity, check_pioneer_sandwich,
                                   check_reversed_sl, check_simon_lieb, derivative_sides,
                                   fit_exponent, reversed_sl_exact, summary_table)
from percolab.lattice import LatticeSpec, Region, graph_of
from percolab.regularity import RegularityParams

NN1, NN2 = LatticeSpec(1), LatticeSpec(2)
SQUARE = FIXTURES["square"]
CORNERS = ConnectionEvent((0, 0), (1, 1))


# -- FKG and BK -------------------------------------------------------------------------

def test_bk_square_numbers():
    rep = check_bk(SQUARE.graph, CORNERS, CORNERS, 0.5)
    assert rep.lhs == pytest.approx(0.0625, abs=1e-15)
    assert rep.rhs == pytest.approx((2 * 0.25 - 0.0625) ** 2, abs=1e-15)
    assert rep.passed and rep.verdict == "pass"


@given(st.floats(0.0, 1.0))
def test_fkg_same_event_gap_is_variance(p):
    rep = check_fkg(SQUARE.graph, CORNERS, CORNERS, p)
    P = 2 * p**2 - p**4
    assert rep.gap == pytest.approx(P * (1 - P), abs=1e-12)


def test_fkg_trivial_p():
    for p in (0.0, 1.0):
        assert check_fkg(SQUARE.graph, CORNERS, EdgeOpenEvent((0, 0), (1, 0)), p).gap == pytest.approx(0, abs=1e-15)


def test_fkg_rejects_decreasing_event():
    with pytest.raises(ValueError):
        check_fkg(SQUARE.graph, CORNERS, EdgeOpenEvent((0, 0), (1, 0), closed=True), 0.5)


def test_fkg_mc_agrees_with_exact():
    ex = check_fkg(FIXTURES["box1"].graph, *FIXTURES["box1"].events[0], 0.5)
    mc = check_fkg(FIXTURES["box1"].graph, *FIXTURES["box1"].events[0], 0.5, mode="mc",
                   n=40_000, seed=2)
    assert abs(mc.gap - ex.gap) <= 5 * mc.stderr + 1e-12


# -- Simon-Lieb -----------------------------------------------------------------------------

def test_simon_lieb_box2_frontier():
    box2, S = Region.box(2, d=2), Region.box(1, d=2)
    rep = check_simon_lieb(NN2, (0, 0), (2, 2), S, box2, 0.5, method="frontier")
    assert rep.gap >= 0 and rep.passed
    mc = check_simon_lieb(NN2, (0, 0), (2, 2), S, box2, 0.5, mode="mc", n=40_000, seed=5)
    assert abs(mc.lhs - rep.lhs) <= 5 * mc.stderr + 0.01
    assert mc.passed


def test_simon_lieb_matches_oracle():
    Lam = [(0, 0), (1, 0), (0, 1), (1, 1)]
    S = [(0, 0), (1, 0)]
    p = 0.37
    rep = check_simon_lieb(NN2, (0, 0), (1, 1), S, Lam, p)
    assert rep.lhs == pytest.approx(oracles.tau(Lam, p, (0, 0), (1, 1)), abs=1e-14)
    want = oracles.tau(S, p, (0, 0), (1, 1)) if (1, 1) in S else 0.0
    want += p * oracles.tau(S, p, (0, 0), (1, 0)) * oracles.tau(Lam, p, (1, 1), (1, 1))
    want += p * oracles.tau(S, p, (0, 0), (0, 0)) * oracles.tau(Lam, p, (0, 1), (1, 1))
    assert rep.rhs == pytest.approx(want, abs=1e-14)


# -- reversed Simon-Lieb ----------------------------------------------------------------

def _rsl_oracle(Lam, S, o, x, p):
    """Nested expectation with the cut cluster removed, by plain enumeration."""
    Lam, S = sorted(Lam), set(S)
    pairs = [(u, v) for u, v in oracles.lattice_edges(Lam) + [(b, a) for a, b in oracles.lattice_edges(Lam)]
             if u in S and v not in S]
    total = 0.0
    for u, v in pairs:
        def term(op, u=u, v=v):
            if u not in oracles.reach(op, o, S):
                return 0.0
            C = oracles.reach(op, u, set(Lam))
            if v in C or x in C:
                return 0.0
            rest = [z for z in Lam if z not in C]
            return p * oracles.tau(rest, p, v, x)
        total += oracles.expectation(Lam, p, term)
    base = oracles.tau(sorted(S), p, o, x) if x in S else 0.0
    return oracles.tau(Lam, p, o, x), base + total


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_reversed_sl_matches_oracle(p):
    Lam = [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (2, 1)]
    S = [(0, 0), (0, 1)]
    lhs, rhs = _rsl_oracle(Lam, S, (0, 0), (2, 1), p)
    got_lhs, ts, terms = reversed_sl_exact(NN2, (0, 0), (2, 1), S, Lam, p)
    assert got_lhs == pytest.approx(lhs, abs=1e-13)
    assert ts + sum(terms) == pytest.approx(rhs, abs=1e-13)
    assert lhs >= rhs - 1e-13


def test_reversed_sl_x_equals_o_has_zero_gap():
    rep = check_reversed_sl(NN2, (0, 0), (0, 0), [(0, 0), (1, 0)], Region.box(1, d=2), 0.4)
    assert rep.gap == pytest.approx(0.0, abs=1e-15)
    assert sum(rep.details["terms"]) == 0


def test_reversed_sl_box1_exact_and_mc():
    S, Lam = [(0, 0), (1, 0)], Region.box(1, d=2)
    ex = check_reversed_sl(NN2, (0, 0), (1, 1), S, Lam, 0.5)
    assert ex.passed and ex.gap >= 0
    mc = check_reversed_sl(NN2, (0, 0), (1, 1), S, Lam, 0.5, mode="mc", n_outer=6000, seed=4)
    assert abs(mc.gap - ex.gap) <= 5 * mc.stderr + 1e-3


def test_effective_reversed_sl_without_escapable_pioneers():
    # Lambda = S leaves no room to escape: the sums are empty
    box1 = Region.box(1, d=2)
    rep = check_effective_reversed_sl(NN2, (0, 0), (1, 1), box1, box1, 0.5, n=50, n_table=50)
    assert not rep.asserted and rep.verdict == "reported"
    assert rep.details["mean_X"] == 0 and math.isinf(rep.details["ratio"])
    assert RegularityParams(K=2, T=20.0) == RegularityParams(2, 20.0)


# -- pioneers, derivative ---------------------------------------------------------------------

def test_pioneer_sandwich_single_point():
    rep = check_pioneer_sandwich(NN2, [(0, 0)], 0.3)
    d = rep.details
    assert d["E_pioneers"] == pytest.approx(1.0, abs=1e-15)
    assert d["sum_tau"] == pytest.approx(1.0, abs=1e-15)
    assert d["phi"] / 0.3 == pytest.approx(4.0, abs=1e-12)
    assert rep.passed


def test_pioneer_sandwich_p_one_counts_boundary():
    rep = check_pioneer_sandwich(NN2, Region.box(1, d=2), 1.0)
    assert rep.details["E_pioneers"] == pytest.approx(8.0, abs=1e-12)
    assert abs(rep.details["E_pioneers"] - rep.details["sum_tau"]) <= 1e-12


def test_pioneer_sandwich_mc():
    rep = check_pioneer_sandwich(NN2, Region.box(2, d=2), 0.5, mode="mc", n=20_000, seed=1)
    assert rep.passed
    with pytest.raises(ValueError):
        check_pioneer_sandwich(NN2, [(0, 0)], 0.0, mode="mc", n=10)


@given(st.floats(0.01, 0.99))
def test_derivative_closed_forms(p):
    lhs2, rhs2 = derivative_sides(NN2, 1, p)
    assert lhs2 == pytest.approx(4 * (1 - p) ** 3, abs=1e-12)
    assert rhs2 == pytest.approx(lhs2, abs=1e-9)
    lhs1, rhs1 = derivative_sides(NN1, 1, p)
    assert lhs1 == pytest.approx(2 * (1 - p), abs=1e-12)
    assert rhs1 == pytest.approx(lhs1, abs=1e-9)


def test_derivative_identity_report():
    rep = check_derivative_identity(NN2, 1, 0.5)
    assert rep.lhs == pytest.approx(0.5, abs=1e-15) and rep.passed
    with pytest.raises(ValueError):
        derivative_sides(NN2, 1, 1.0)


def test_derivative_identity_radius_two_d1():
    for p in (0.2, 0.7):
        assert check_derivative_identity(NN1, 2, p).passed


def test_partial_monotonicity_same_region():
    S = Region.box(1, d=2)
    reps = check_partial_monotonicity(NN2, S, [S, Region.box(2, d=2)], 0.4, n=2000, seed=1)
    assert reps[0].details["ratio"] == pytest.approx(1.0, abs=1e-12)
    assert all(not r.asserted for r in reps)


# -- exponents ---------------------------------------------------------------------------------

def test_fit_exact_power_law():
    n = np.array([2, 4, 8, 16, 32])
    f = fit_exponent(n, 3.0 * n**-2.0)
    assert f.exponent == pytest.approx(-2.0, abs=1e-12)
    assert math.exp(f.intercept) == pytest.approx(3.0, rel=1e-12)
    assert not f.poor_fit
    assert fit_exponent(n, np.ones(5)).exponent == pytest.approx(0.0, abs=1e-12)


def test_fit_flags_exponential_decay():
    n = np.array([2, 4, 8, 16, 32])
    assert fit_exponent(n, 0.6**n).poor_fit
    assert fit_exponent(n, 0.6**n, stderrs=1e-3 * 0.6**n).poor_fit


def test_fit_input_errors():
    with pytest.raises(ValueError):
        fit_exponent([1, 2], [1, 2])
    with pytest.raises(ValueError):
        fit_exponent([1, 2, 3], [1, 0, 2])


# -- reports -------------------------------------------------------------------------------------

def test_report_validation_and_output(tmp_path):
    with pytest.raises(ValueError):
        CheckReport("x", "i", 0, 0, 0, 1e-3, "exact")
    with pytest.raises(ValueError):
        CheckReport("x", "i", 0, 0, 0, 0, "other")
    good = CheckReport("a", "i", np.float64(1.0), 1.0, 0.0, 1e-12, "exact")
    bad = CheckReport("a", "j", 1.0, 0.0, -1.0, 1e-12, "exact")
    text = summary_table([good, bad])
    assert "FAIL" in text.splitlines()[1]
    path = tmp_path / "out.jsonl"
    append_jsonl([good, bad], path)
    recs = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["verdict"] for r in recs] == ["pass", "FAIL"]
    assert isinstance(recs[0]["lhs"], float)


# -- far-pair comparison (descriptive) -------------------------------------------------------------

def test_far_sum_with_zero_cut_is_simon_lieb_sum():
    S, Lam = [(0, 0), (1, 0)], Region.box(1, d=2)
    far = check_far_reversed_sl(NN2, (0, 0), (1, 1), S, Lam, 0.4, eps=0.0)
    sl = check_simon_lieb(NN2, (0, 0), (1, 1), S, Lam, 0.4)
    assert far.rhs == pytest.approx(sl.rhs, abs=1e-14)  # x not in S: no tau_S(o,x) term
    assert far.lhs == pytest.approx(sl.lhs, abs=1e-14)
    assert not far.asserted and far.details["ratio"] == pytest.approx(far.lhs / far.rhs)


def test_far_sum_mc_agrees_and_cut_shrinks_sum():
    S, Lam = Region.box(1, d=2), Region.box(2, d=2)
    ex = check_far_reversed_sl(NN2, (0, 0), (2, 0), S, Lam, 0.4, eps=0.5)
    mc = check_far_reversed_sl(NN2, (0, 0), (2, 0), S, Lam, 0.4, eps=0.5, mode="mc", n=40_000, seed=3)
    assert abs(mc.rhs - ex.rhs) <= 5 * mc.stderr + 1e-3
    tight = check_far_reversed_sl(NN2, (0, 0), (2, 0), S, Lam, 0.4, eps=1.0)
    assert tight.rhs <= ex.rhs and tight.details["n_pairs"] < ex.details["n_pairs"]
    with pytest.raises(ValueError):
        check_far_reversed_sl(NN2, (0, 0), (2, 0), S, Lam, 0.4, eps=-1)
