import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from uavmac import experiments as ex
from uavmac.channel import UserLayout, snr_matrix
from uavmac.noma import (
    enumerate_orders,
    evaluate_dual,
    psi_objective,
    solve_p1,
    solve_p1_fixed_endpoints,
    subset_sum_rate,
    timeshare_lp,
    validate_noma_solution,
    vertex_rates,
)
from uavmac.numerics import grid_search_1d
from uavmac.scenario import Scenario
from uavmac.trajectory import MaxSpeedLeg, SpeedFreeSchedule


def _snr(sc, x, k):
    return float(snr_matrix([x], sc.layout, sc.channel)[0, k])


def _sum_capacity_along(sc, shf, subset):
    """(1/T) integral of log2(1 + sum_S snr) along an SHF trajectory, via quad."""
    f = lambda x: math.log2(1.0 + sum(_snr(sc, x, k) for k in subset))
    total = 0.0
    leg = shf.leg
    if leg.duration > 0:
        total += quad(f, leg.x_start, leg.x_end, epsabs=0, epsrel=1e-12, limit=200)[0] / leg.v_max
    total += sum(d * f(p) for p, d in zip(shf.hover_points, shf.hover_durations))
    return total / sc.horizon


# -- subset sum rate ---------------------------------------------------------


def test_subset_rate_singleton_overhead(two_users_100):
    sc = two_users_100
    assert subset_sum_rate(0.0, [0], sc) == pytest.approx(math.log2(1 + _snr(sc, 0.0, 0)), rel=1e-14)


def test_subset_rate_midpoint_formula(two_users_100):
    sc = two_users_100
    d = math.hypot(50.0, 250.0)
    theta = math.degrees(math.asin(250.0 / d))
    p = 1.0 / (1.0 + 10.0 * math.exp(-0.6 * (theta - 10.0)))
    s = (p + 0.2 * (1 - p)) * 1e-3 / d**2 * 1.0 / 1e-13
    assert subset_sum_rate(50.0, [0, 1], sc) == pytest.approx(math.log2(1 + 2 * s), rel=1e-13)


@given(st.floats(-200, 300))
def test_subset_rate_monotone(x):
    sc = Scenario(UserLayout((0.0, 100.0)))
    assert subset_sum_rate(x, [0], sc) <= subset_sum_rate(x, [0, 1], sc)


def test_subset_rate_rejects_empty(two_users_100):
    with pytest.raises(ValueError):
        subset_sum_rate(0.0, [], two_users_100)


# -- vertex rates ------------------------------------------------------------


def test_vertex_single_user():
    sc = Scenario(UserLayout((0.0,)))
    leg = MaxSpeedLeg(0.0, 200.0, 20.0)
    hov = SpeedFreeSchedule((0.0,), (90.0,))
    r = vertex_rates((0,), leg, hov, sc)
    expected = (quad(lambda x: math.log2(1 + _snr(sc, x, 0)), 0, 200, epsrel=1e-12)[0] / 20.0
                + 90.0 * math.log2(1 + _snr(sc, 0.0, 0))) / 100.0
    assert r[0] == pytest.approx(expected, rel=1e-9)


def test_vertex_symmetric_hover(two_users_100):
    sc = two_users_100
    leg = MaxSpeedLeg(50.0, 50.0, 20.0)
    hov = SpeedFreeSchedule((50.0,), (100.0,))
    s = _snr(sc, 50.0, 0)
    r = vertex_rates((0, 1), leg, hov, sc)
    assert r[0] == pytest.approx(math.log2(1 + s), rel=1e-12)
    assert r[1] == pytest.approx(math.log2((1 + 2 * s) / (1 + s)), rel=1e-12)
    np.testing.assert_allclose(vertex_rates((1, 0), leg, hov, sc), r[::-1], rtol=1e-12)


def test_vertex_telescoping_four_users(four_users):
    sc = four_users
    sol = solve_p1([0.25] * 4, sc)
    shf = sol.shf
    full = _sum_capacity_along(sc, shf, range(4))
    for order in itertools.permutations(range(4)):
        r = vertex_rates(order, shf.leg, shf.speed_free, sc)
        assert r.sum() == pytest.approx(full, rel=1e-9)


def test_vertex_telescoping_random_trajectories():
    sc = Scenario(UserLayout((0.0, 150.0, 400.0)))
    rng = np.random.default_rng(7)
    for _ in range(100):
        a, b = np.sort(rng.uniform(0.0, 400.0, 2))
        flight = (b - a) / 20.0
        pts = np.sort(rng.uniform(a, b, 2))
        durs = rng.dirichlet([1, 1]) * (100.0 - flight)
        leg = MaxSpeedLeg(a, b, 20.0)
        hov = SpeedFreeSchedule(tuple(pts), tuple(durs))
        order = tuple(rng.permutation(3))
        r = vertex_rates(order, leg, hov, sc)
        caps = subset_sum_rate(np.linspace(a, b, 2 * 256 + 1), [0, 1, 2], sc)
        w = np.ones(513)
        w[1:-1:2], w[2:-1:2] = 4.0, 2.0
        leg_int = w @ caps * (b - a) / (3 * 512) / 20.0
        total = (leg_int + sum(d * subset_sum_rate(p, [0, 1, 2], sc) for p, d in zip(pts, durs))) / 100.0
        assert r.sum() == pytest.approx(total, rel=1e-9)


def test_vertex_rejects_duration_mismatch(two_users_100):
    with pytest.raises(ValueError):
        vertex_rates((0, 1), MaxSpeedLeg(0, 0, 20), SpeedFreeSchedule((0.0,), (50.0,)), two_users_100)


# -- psi ---------------------------------------------------------------------


def test_psi_equal_weights_collapses(four_users):
    sc = four_users
    x = np.array([0.0, 123.0, 400.0])
    val = psi_objective(x, [2.0] * 4, (0, 1, 2, 3), sc)
    np.testing.assert_allclose(val, 2.0 / 100.0 * subset_sum_rate(x, range(4), sc), rtol=1e-13)


def test_psi_single_user_weight(four_users):
    sc = four_users
    val = psi_objective(300.0, [1.0, 0.0, 0.0, 0.0], (0, 1, 2, 3), sc)
    assert val == pytest.approx(subset_sum_rate(300.0, [0], sc) / 100.0, rel=1e-13)


def test_psi_rejects_unsorted_order(two_users_100):
    with pytest.raises(ValueError):
        psi_objective(0.0, [1.0, 2.0], (0, 1), two_users_100)


def test_psi_maximizers_four_users(four_users):
    """Two symmetric maximisers at the optimal multipliers of the equal profile."""
    sc = four_users
    sol = solve_p1([0.25] * 4, sc)
    lam = sol.dual.weights
    order = enumerate_orders(lam)[0]
    _, xs = grid_search_1d(lambda x: psi_objective(x, lam, order, sc), 0.0, 800.0, 2.0)
    assert len(xs) == 2
    assert xs[0] + xs[1] == pytest.approx(800.0, abs=2.0)
    _, _, reported = evaluate_dual(lam, 0.0, 800.0, sc)
    assert reported == pytest.approx(xs, abs=1e-9)


# -- decoding orders -----------------------------------------------------------


def test_orders_distinct_weights():
    assert enumerate_orders([0.2, 0.9, 0.5]) == [(1, 2, 0)]


def test_orders_two_way_tie():
    assert sorted(enumerate_orders([1.0, 1.0])) == [(0, 1), (1, 0)]


def test_orders_tie_ahead_of_singleton():
    assert sorted(enumerate_orders([1.0, 1.0, 0.5])) == [(0, 1, 2), (1, 0, 2)]


def test_orders_counts():
    assert len(enumerate_orders([1.0, 1.0, 1.0, 0.2, 0.2])) == 3 * 2
    assert len(enumerate_orders([1.0, 1.0, 1.0], all_permutations=True)) == 6


# -- time-sharing LP -----------------------------------------------------------


def test_timeshare_single_pair():
    tau, r = timeshare_lp([[3.0, 5.0]], [0.4, 0.6])
    assert r == pytest.approx(min(3.0 / 0.4, 5.0 / 0.6))
    np.testing.assert_allclose(tau, [1.0])


def test_timeshare_symmetric_pair():
    tau, r = timeshare_lp([[4.0, 1.0], [1.0, 4.0]], [0.5, 0.5])
    np.testing.assert_allclose(tau, [0.5, 0.5], atol=1e-12)
    assert r == pytest.approx(5.0)


def test_timeshare_matches_solver(four_users):
    sol = solve_p1([0.25] * 4, four_users)
    hs = sol.hover_set
    tuples = hs.rate_tuples.reshape(-1, 4)
    _, r = timeshare_lp(tuples, [0.25] * 4)
    assert r >= sol.sum_rate - 1e-6


# -- solver --------------------------------------------------------------------


def test_fixed_point_is_static_region_point(two_users_100):
    sc = two_users_100
    sol = solve_p1_fixed_endpoints(50.0, 50.0, [0.5, 0.5], sc)
    assert sol.rates[0] == pytest.approx(sol.rates[1], abs=1e-6)
    s = _snr(sc, 50.0, 0)
    assert sol.sum_rate == pytest.approx(math.log2(1 + 2 * s), abs=1e-6)


def test_polymatroid_membership(four_users):
    sc = four_users
    sol = solve_p1([0.25] * 4, sc)
    for size in range(1, 5):
        for sub in itertools.combinations(range(4), size):
            bound = _sum_capacity_along(sc, sol.shf, sub)
            assert sol.rates[list(sub)].sum() <= bound + 1e-8


def test_solution_invariants(two_users_800):
    sc = two_users_800
    sol = solve_p1([0.3, 0.7], sc)
    assert np.all(sol.rates >= np.array([0.3, 0.7]) * sol.sum_rate - 1e-6)
    assert abs(sol.duality_gap) <= 1e-3
    assert sol.hover_set.shares.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(validate_noma_solution(sol, sc), sol.rates, atol=1e-6)
    assert sol.shf.x_initial <= sol.shf.x_final


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=2))
def test_weak_duality_random_duals(raw):
    sc = Scenario(UserLayout((0.0, 800.0)))
    alpha = np.array([0.5, 0.5])
    lam = np.array(raw) / (np.array(raw) @ alpha)
    primal = _PRIMAL.setdefault("p", solve_p1_fixed_endpoints(0.0, 800.0, alpha, sc))
    val, _, _ = evaluate_dual(lam, 0.0, 800.0, sc)
    assert val >= primal.sum_rate - 1e-9


_PRIMAL: dict = {}


def test_dual_scaling_invariance(four_users):
    lam = np.array([1.3, 0.7, 0.9, 1.1])
    v1, g1, m1 = evaluate_dual(lam, 0.0, 800.0, four_users)
    v2, g2, m2 = evaluate_dual(3.0 * lam, 0.0, 800.0, four_users)
    assert v2 == pytest.approx(3.0 * v1, rel=1e-12)
    assert m1 == m2


def test_large_horizon_single_midpoint_hover():
    sc = Scenario(UserLayout((0.0, 100.0)), horizon=1000.0)
    sol = solve_p1([0.5, 0.5], sc)
    assert sol.n_hover == 1
    assert sol.shf.hover_points[0] == pytest.approx(50.0, abs=sc.grid.step)


def test_zero_speed_is_static_hover():
    sc = Scenario(UserLayout((0.0, 800.0)), v_max=0.0)
    sol = solve_p1([0.3, 0.7], sc)
    _, r_static, _ = ex.benchmark_static_hover("noma", [0.3, 0.7], sc)
    assert sol.sum_rate == pytest.approx(r_static, abs=1e-6)
    assert sol.shf.x_initial == sol.shf.x_final


def test_monotone_in_horizon(two_users_800):
    vals = [solve_p1([0.5, 0.5], two_users_800.replace(horizon=t)).sum_rate for t in (40, 60, 100)]
    assert all(b >= a - 1e-6 for a, b in zip(vals, vals[1:]))
