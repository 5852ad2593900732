from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from corpus import make_case
from itemset_grid import simnet
from itemset_grid.costmodel import (
    GRID_LOGP,
    DimensionError,
    LogPParams,
    c_fdm,
    c_gfm,
    candidate_bound_ok,
    critical_level,
    estimate_factors,
    fdm_payloads,
    gfm_payloads,
    gfm_x,
    node_work,
    overall_cost,
    work_bound,
    work_bound_factored,
)


def test_logp_validation_and_parse():
    assert LogPParams.parse("2,1,0.5", P=3) == LogPParams(2, 1, 0.5, 3)
    assert GRID_LOGP.label() == "100,10,1"
    with pytest.raises(ValueError):
        LogPParams(-1, 0, 0)
    with pytest.raises(ValueError):
        LogPParams(P=0)
    with pytest.raises(ValueError):
        LogPParams.parse("1,2")


# -- communication -------------------------------------------------------------

def test_c_fdm_hand_vector():
    assert c_fdm(LogPParams(L=2, o=1, g=1, P=2), [[3]], 1) == 32


def test_c_gfm_hand_vector():
    assert c_gfm(LogPParams(L=2, o=1, g=1, P=2), [2], [], 1, 1) == 28


def test_zero_network_costs_nothing():
    p = LogPParams(0, 0, 0, P=4)
    assert c_fdm(p, [[5, 6, 7, 8], [1, 2, 3, 4]], 2) == 0
    assert c_gfm(p, [5, 6, 7, 8], [[1, 1, 1, 1]], 2, 1) == 0


def test_single_node_costs_nothing():
    p = LogPParams(3, 2, 1, P=1)
    assert c_fdm(p, [[9], [4]], 2) == 0
    assert c_gfm(p, [9], [], 2, 2) == 0


def test_c_gfm_empty_payload_single_pass():
    L, o, P = 3.0, 2.0, 4
    assert c_gfm(LogPParams(L, o, 1, P), [0, 0, 0, 0], [], 3, 3) == 2 * P * (P - 1) * (L * L + o)


def test_only_first_p_minus_one_entries_count():
    p = LogPParams(1, 1, 1, P=3)
    assert c_fdm(p, [[1, 2, 1000]], 1) == c_fdm(p, [[1, 2, 0]], 1) == 2 * 3 * ((1 + 2) + 2 * 2)


def test_dimension_errors():
    p = LogPParams(1, 1, 1, P=3)
    with pytest.raises(DimensionError):
        c_fdm(p, [[1, 2]], 2)
    with pytest.raises(DimensionError):
        c_fdm(p, [[1]], 1)
    with pytest.raises(DimensionError):
        c_gfm(p, [1, 2], [[1, 1]], 3, 3)
    with pytest.raises(DimensionError):
        c_gfm(p, [1, 2], [], 2, 3)


payload_rows = st.lists(st.integers(0, 50), min_size=4, max_size=4)


@settings(max_examples=100)
@given(st.lists(payload_rows, min_size=1, max_size=6), st.floats(0, 10), st.floats(0, 10),
       st.floats(0, 10), st.integers(1, 4))
def test_identity_and_formula(gc, L, o, g, P):
    p = LogPParams(L, o, g, P)
    k = len(gc)
    want = oracle.c_fdm(gc, P, L, o, g)
    assert c_fdm(p, gc, k) == pytest.approx(want)
    # first pass carries level k, later passes walk down to level 1
    assert c_gfm(p, gc[-1], gc[-2::-1], k, 1) == pytest.approx(want)


@settings(max_examples=100)
@given(st.lists(payload_rows, min_size=1, max_size=4), st.floats(0, 5), st.floats(0, 5),
       st.floats(0, 5), st.integers(1, 4), st.sampled_from(["L", "o", "g"]), st.floats(0, 5))
def test_costs_monotone_in_network_parameters(gc, L, o, g, P, name, bump):
    lo = LogPParams(L, o, g, P)
    hi = replace(lo, **{name: getattr(lo, name) + bump})
    k = len(gc)
    assert c_fdm(hi, gc, k) >= c_fdm(lo, gc, k)
    assert c_gfm(hi, gc[0], gc[1:], k, 1) >= c_gfm(lo, gc[0], gc[1:], k, 1)


@settings(max_examples=100)
@given(st.lists(payload_rows, min_size=1, max_size=4), st.integers(0, 3), st.integers(0, 3),
       st.integers(1, 20))
def test_costs_monotone_in_payloads(gc, level, node, bump):
    p = LogPParams(1.5, 1, 2, 4)
    level %= len(gc)
    more = [row[:] for row in gc]
    more[level][node] += bump
    k = len(gc)
    assert c_fdm(p, more, k) >= c_fdm(p, gc, k)
    assert c_gfm(p, more[0], more[1:], k, 1) >= c_gfm(p, gc[0], gc[1:], k, 1)


# -- work bounds -------------------------------------------------------------------

def test_work_bound_hand_vector():
    assert work_bound(3, [3, 3, 1]) == pytest.approx(37 / 3)
    assert work_bound([3, 3, 3], [3, 3, 1]) == pytest.approx(37 / 3)


def test_work_bound_zero_and_cap():
    assert work_bound(5, [0, 0, 0]) == 0
    # scalar I stops the sum at l = I - 1
    assert work_bound(2, [1, 1, 100]) == 2 * 1 + Fraction(1, 2) * 1


def test_work_bound_factored_reduces_to_plain():
    items, ls = [6, 5, 4, 3], [1, 6, 7, 2]
    assert work_bound_factored(items, ls, [1] * 4, [1] * 4) == pytest.approx(work_bound(items, ls))
    with pytest.raises(DimensionError):
        work_bound_factored(items, ls, [1], [1] * 4)


@settings(max_examples=60)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=6))
def test_work_bound_matches_oracle(pairs):
    items = [i for i, _ in pairs]
    gs = [g for _, g in pairs]
    assert work_bound(items, gs) == pytest.approx(float(oracle.work_sum(items, gs)))


def test_node_work_toy(toy_split):
    trace = simnet.run("fdm", toy_split, 0.6, 3)
    # node 0: I = [3, 2, 2], successes = [1, 2, 1]; node 1: I = [3, 3, 3], successes = [1, 3, 2]
    assert node_work(trace.nodes[0]) == pytest.approx(float(oracle.work_sum([3, 2, 2], [1, 2, 1])))
    assert node_work(trace.nodes[1]) == pytest.approx(float(oracle.work_sum([3, 3, 3], [1, 3, 2])))


def test_candidate_bound_on_runs():
    for case in [make_case(i) for i in range(40)]:
        for protocol in ("centralized", "fdm", "gfm"):
            trace = simnet.run(protocol, case.parts(), case.s, case.k)
            assert all(candidate_bound_ok(n) for n in trace.nodes), (protocol, case)


# -- overall cost and factors ----------------------------------------------------

def test_toy_overall_cost(toy_split):
    fdm = simnet.run("fdm", toy_split, 0.6, 3)
    gfm = simnet.run("gfm", toy_split, 0.6, 3)
    assert fdm_payloads(fdm) == [[2, 3], [1, 2], [0, 0]]
    assert gfm_payloads(gfm) == ([1, 2], [])
    p = LogPParams(1, 1, 1)
    c = overall_cost(fdm, gfm, p)
    work = float(oracle.work_sum([3, 2, 2], [1, 2, 1]) + oracle.work_sum([3, 3, 3], [1, 3, 2]))
    assert c.c_fdm == oracle.c_fdm([[2], [1], [0]], 2, 1, 1, 1) == 36
    assert c.c_gfm == oracle.pass_cost([1], 2, 1, 1, 1) == 12
    assert (c.rs_fdm, c.rs_gfm) == (8, 3)
    assert c.total_fdm == pytest.approx(work + 8 + 36)
    assert c.total_gfm == pytest.approx(work + 3 + 12)
    assert c.total_gfm <= c.total_fdm
    assert c.factor == pytest.approx(1 - c.total_gfm / c.total_fdm)
    assert (c.k, c.x) == (3, 3)


def test_single_node_zero_network_equals_local_work(toy):
    fdm = simnet.run("fdm", [toy], 0.6, 3)
    gfm = simnet.run("gfm", [toy], 0.6, 3)
    c = overall_cost(fdm, gfm, LogPParams(0, 0, 0))
    assert c.total_fdm == pytest.approx(node_work(fdm.nodes[0]))
    assert c.total_gfm == pytest.approx(node_work(gfm.nodes[0]))
    assert c.total_fdm == pytest.approx(c.total_gfm)
    assert c.factor == pytest.approx(0)


def test_doubling_g_doubles_only_comm(toy_split):
    fdm = simnet.run("fdm", toy_split, 0.6, 3)
    gfm = simnet.run("gfm", toy_split, 0.6, 3)
    a = overall_cost(fdm, gfm, LogPParams(0, 0, 1))
    b = overall_cost(fdm, gfm, LogPParams(0, 0, 2))
    assert (b.c_fdm, b.c_gfm) == (2 * a.c_fdm, 2 * a.c_gfm)
    assert (b.work_fdm, b.work_gfm, b.rs_fdm, b.rs_gfm) == (a.work_fdm, a.work_gfm, a.rs_fdm, a.rs_gfm)


def test_overall_cost_rejects_mismatch(toy_split, toy):
    fdm = simnet.run("fdm", toy_split, 0.6, 3)
    with pytest.raises(ValueError):
        overall_cost(fdm, simnet.run("gfm", toy_split, 0.8, 3), GRID_LOGP)
    with pytest.raises(ValueError):
        overall_cost(fdm, simnet.run("gfm", [toy, toy], 0.6, 3), GRID_LOGP)
    with pytest.raises(ValueError):
        overall_cost(fdm, fdm, GRID_LOGP)


def test_gfm_x():
    assert gfm_x(4, 1) == 4
    assert gfm_x(4, 2) == 3
    assert gfm_x(4, 0) == 4


def test_critical_level():
    assert critical_level([10, 9, 8, 0]) == 4
    assert critical_level([0.9, 0.8, 0.3, 0.2]) == 3
    assert critical_level([0.5, 0.5]) == 2
    assert critical_level([]) == 0


def test_factors_toy(toy_split):
    fdm = simnet.run("fdm", toy_split, 0.6, 3)
    gfm = simnet.run("gfm", toy_split, 0.6, 3)
    f = estimate_factors(fdm, gfm)
    assert f.p_l == [1.0, 1.0, 1.0] and f.p_il == [1.0, 1.0, 1.0]
    assert 1 <= f.critical_level <= 3
    assert (f.k, f.x, f.fdm_passes, f.gfm_passes) == (3, 3, 3, 1)
    assert f.gain == pytest.approx(1 - 12 / 36)
    assert set(f.to_dict()) >= {"p_l", "p_il", "critical_level", "x", "gain"}


def test_factors_identical_candidates_single_node(toy):
    f = estimate_factors(simnet.run("fdm", [toy], 0.4, 3), simnet.run("gfm", [toy], 0.4, 3))
    assert f.p_l == [1.0] * len(f.p_l) and f.p_il == [1.0] * len(f.p_il)
    assert f.gain == 0


def test_factor_invariants_on_corpus():
    for case in [make_case(i) for i in range(60)]:
        parts = case.parts()
        fdm = simnet.run("fdm", parts, case.s, case.k)
        gfm = simnet.run("gfm", parts, case.s, case.k)
        f = estimate_factors(fdm, gfm, GRID_LOGP)
        assert all(0 <= v <= 1 for v in f.p_l + f.p_il), case
        assert f.gain <= 1
        assert 0 <= f.critical_level <= len(f.p_l)
        assert f.k - f.x == max(gfm.passes - 1, 0)
        assert f.k - f.x <= f.k
        assert gfm.passes <= case.k
