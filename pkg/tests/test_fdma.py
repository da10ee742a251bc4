import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from uavmac import experiments as ex
from uavmac.channel import UserLayout
from uavmac.fdma import (
    allocate_bandwidth,
    bandwidth_allocation,
    evaluate_dual_fdma,
    g1,
    solve_p2,
    solve_p2_fixed_endpoints,
    timeshare_lp_fdma,
    user_rate_fdma,
    validate_fdma_solution,
)
from uavmac.noma import solve_p1
from uavmac.scenario import Scenario
from uavmac.tdma import solve_p3


def _rate(b, s):
    return 0.0 if b == 0 else b * math.log2(1.0 + s / b)


# -- per-user rate -------------------------------------------------------------


def test_user_rate_full_and_zero_band(two_users_100):
    sc = two_users_100
    s = float(sc.snr([30.0])[0, 0])
    assert user_rate_fdma(1.0, 30.0, 0, sc) == pytest.approx(math.log2(1 + s), rel=1e-14)
    assert user_rate_fdma(0.0, 30.0, 0, sc) == 0.0


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(-300, 400))
def test_user_rate_concave_in_bandwidth(b1, b2, x):
    sc = Scenario(UserLayout((0.0, 100.0)))
    mid = user_rate_fdma(0.5 * (b1 + b2), x, 1, sc)
    assert mid >= 0.5 * (user_rate_fdma(b1, x, 1, sc) + user_rate_fdma(b2, x, 1, sc)) - 1e-12


# -- allocation ----------------------------------------------------------------


def test_allocation_symmetric_users():
    sc = Scenario(UserLayout((0.0, 0.0, 0.0)))
    alloc = bandwidth_allocation([1.0, 1.0, 1.0], 10.0, sc)
    np.testing.assert_allclose(alloc.fractions, [1 / 3] * 3, atol=1e-12)


def test_allocation_single_positive_weight(four_users):
    alloc = bandwidth_allocation([0.0, 0.0, 2.0, 0.0], 100.0, four_users)
    np.testing.assert_array_equal(alloc.fractions, [0.0, 0.0, 1.0, 0.0])


def test_allocation_matches_grid_oracle(two_users_100):
    sc = two_users_100
    s1, s2 = sc.snr([50.0])[0]
    b1 = np.linspace(0.0, 1.0, 10001)
    obj = [2.0 * _rate(b, s1) + _rate(1.0 - b, s2) for b in b1]
    best = b1[int(np.argmax(obj))]
    alloc = bandwidth_allocation([2.0, 1.0], 50.0, sc)
    assert alloc.fractions[0] == pytest.approx(best, abs=1e-4)
    assert g1([2.0, 1.0], 50.0, sc) >= max(obj) - 1e-12


def test_allocation_matches_scalar_optimizer(four_users):
    """Optimum of the 1D restriction between the two strongest users agrees."""
    sc = four_users
    snr = sc.snr([120.0])[0]
    mu = np.array([1.5, 0.7, 0.0, 0.0])
    res = minimize_scalar(lambda b: -(mu[0] * _rate(b, snr[0]) + mu[1] * _rate(1 - b, snr[1])),
                          bounds=(0, 1), method="bounded", options={"xatol": 1e-12})
    b, _, _ = allocate_bandwidth(snr[None, :], mu, sc.horizon)
    assert b[0, 0] == pytest.approx(res.x, abs=1e-6)


def test_allocation_kkt_closed_form(four_users):
    sc = four_users
    mu = np.array([1.2, 0.8, 1.0, 0.5])
    snr = sc.snr([0.0, 260.0, 555.0])
    b, _, eta = allocate_bandwidth(snr, mu, sc.horizon)
    np.testing.assert_allclose(b.sum(axis=1), 1.0, atol=1e-9)
    # stationarity: mu_k d/db [b log2(1 + s/b)] == eta T for every user
    for i in range(3):
        s, bb = snr[i], b[i]
        grad = mu * (np.log2(1 + s / bb) - s / (bb + s) / np.log(2))
        np.testing.assert_allclose(grad, eta[i] * sc.horizon, rtol=1e-7)


def test_g1_beats_random_allocations(four_users):
    sc = four_users
    rng = np.random.default_rng(3)
    mu = np.array([1.0, 0.3, 2.0, 0.9])
    for x in (0.0, 300.0, 700.0):
        s = sc.snr([x])[0]
        best = g1(mu, x, sc)
        for b in rng.dirichlet(np.ones(4), size=1000):
            assert best >= sum(m * _rate(bb, ss) for m, bb, ss in zip(mu, b, s)) - 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=4, max_size=4).filter(lambda v: max(v) > 1e-3),
       st.floats(-100.0, 900.0))
def test_allocation_sums_to_one(mu, x):
    sc = Scenario(UserLayout((0.0, 800 / 3, 1600 / 3, 800.0)))
    b = bandwidth_allocation(mu, x, sc).fractions
    assert abs(b.sum() - 1.0) <= 1e-9
    assert np.all(b >= 0)
    assert np.all(b[np.asarray(mu) == 0] == 0)


def test_allocation_rejects_zero_weights(two_users_100):
    with pytest.raises(ValueError):
        bandwidth_allocation([0.0, 0.0], 0.0, two_users_100)


def test_g1_single_user():
    sc = Scenario(UserLayout((0.0,)))
    s = float(sc.snr([40.0])[0, 0])
    assert g1([3.0], 40.0, sc) == pytest.approx(3.0 * math.log2(1 + s), rel=1e-14)


def test_g1_homogeneous(four_users):
    mu = np.array([1.0, 0.5, 0.25, 2.0])
    assert g1(4.0 * mu, 333.0, four_users) == pytest.approx(4.0 * g1(mu, 333.0, four_users), rel=1e-10)
    np.testing.assert_allclose(bandwidth_allocation(4.0 * mu, 333.0, four_users).fractions,
                               bandwidth_allocation(mu, 333.0, four_users).fractions, atol=1e-9)


def test_g1_mirror_symmetric(two_users_100):
    xs = np.linspace(0.0, 50.0, 26)
    left = g1([1.0, 1.0], xs, two_users_100)
    right = g1([1.0, 1.0], 100.0 - xs, two_users_100)
    np.testing.assert_allclose(left, right, rtol=0, atol=1e-9)


# -- dual and time sharing -----------------------------------------------------


def test_dual_full_speed_leg_is_pure_integral(two_users_800):
    sc = two_users_800.replace(horizon=40.0)
    val, sub, _ = evaluate_dual_fdma([1.0, 1.0], 0.0, 800.0, sc)
    xs = np.linspace(0.0, 800.0, 8001)
    f = g1([1.0, 1.0], xs, sc)
    integral = np.sum((f[1:] + f[:-1]) / 2 * np.diff(xs)) / 20.0 / 40.0
    assert val == pytest.approx(integral, rel=1e-6)
    assert sub @ [1.0, 1.0] == pytest.approx(val, rel=1e-9)


def test_dual_zero_speed_is_point_max():
    sc = Scenario(UserLayout((0.0, 100.0)), v_max=0.0)
    val, _, maxima = evaluate_dual_fdma([1.0, 1.0], 50.0, 50.0, sc)
    assert val == pytest.approx(g1([1.0, 1.0], 50.0, sc) / 1.0, rel=1e-12)
    assert maxima == [50.0]


def test_timeshare_single_location():
    kappa, r = timeshare_lp_fdma([[2.0, 6.0]], [0.5, 0.5])
    assert r == pytest.approx(4.0)
    np.testing.assert_allclose(kappa, [1.0])


def test_timeshare_symmetric_pair():
    kappa, r = timeshare_lp_fdma([[3.0, 1.0], [1.0, 3.0]], [0.5, 0.5])
    np.testing.assert_allclose(kappa, [0.5, 0.5], atol=1e-12)
    assert r == pytest.approx(4.0)


# -- solver --------------------------------------------------------------------


def test_single_user_hovers_overhead():
    sc = Scenario(UserLayout((0.0,)))
    sol = solve_p2([1.0], sc)
    s = float(sc.snr([0.0])[0, 0])
    assert sol.sum_rate == pytest.approx(math.log2(1 + s), rel=1e-9)
    assert sol.shf.hover_points[0] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("alpha", [(0.5, 0.5), (0.3, 0.7), (0.9, 0.1)])
def test_two_user_nesting(two_users_800, alpha):
    sc = two_users_800
    f = solve_p2(alpha, sc)
    assert f.sum_rate <= solve_p1(alpha, sc).sum_rate + 1e-6
    assert f.sum_rate >= solve_p3(alpha, sc).sum_rate - 1e-6
    assert abs(f.duality_gap) <= 1e-3
    assert f.kappa.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(f.rates >= np.asarray(alpha) * f.sum_rate - 1e-6)


def test_two_user_matches_oracle(two_users_800):
    sc = two_users_800
    sol = solve_p2([0.5, 0.5], sc)
    oracle = ex.oracle_two_user_hfh("fdma", [0.5, 0.5], sc)
    assert sol.sum_rate == pytest.approx(oracle.rate, abs=1e-3)


def test_validator_reproduces_rates(two_users_800):
    sc = two_users_800
    sol = solve_p2([0.3, 0.7], sc)
    np.testing.assert_allclose(validate_fdma_solution(sol, sc), sol.rates, atol=1e-6)
    for frac in sol.hover_allocations(sc):
        assert abs(frac.sum() - 1.0) <= 1e-9


def test_fixed_endpoints_symmetric_point(two_users_100):
    sc = two_users_100
    sol = solve_p2_fixed_endpoints(50.0, 50.0, [0.5, 0.5], sc)
    s = float(sc.snr([50.0])[0, 0])
    assert sol.sum_rate == pytest.approx(2 * 0.5 * math.log2(1 + s / 0.5), abs=1e-6)
