import math

import numpy as np
import pytest

from uavmac import experiments as ex
from uavmac.channel import UserLayout
from uavmac.experiments import (
    RateProfile,
    RegionBoundary,
    BoundaryPoint,
    benchmark_static_hover,
    benchmark_successive_hover,
    chord_convexity_violation,
    default_profiles,
    oracle_two_user_hfh,
    pareto_sweep,
    region_nesting_report,
)
from uavmac.dual import SolverError
from uavmac.noma import solve_p1
from uavmac.scenario import Scenario


# -- profiles ------------------------------------------------------------------


def test_rate_profile_validation():
    assert RateProfile((0.25, 0.75)).alpha == (0.25, 0.75)
    for bad in [(), (0.5, 0.6), (-0.1, 1.1), (float("nan"), 1.0)]:
        with pytest.raises(ValueError):
            RateProfile(bad)


def test_default_profiles():
    two = default_profiles(2)
    assert len(two) == 21
    assert two[0].alpha == (0.0, 1.0) and two[-1].alpha == (1.0, 0.0)
    assert two[3].alpha == (0.15, 0.85)
    four = default_profiles(4)
    assert four[0] == RateProfile.equal(4)
    assert four[1:] == [RateProfile.axis(4, j) for j in range(4)]


# -- sweeps --------------------------------------------------------------------


def test_sweep_axis_profile_is_single_user_optimum(two_users_800):
    sc = two_users_800
    b = pareto_sweep("noma", [(1.0, 0.0)], sc, workers=1)
    p = b.points[0]
    # the UAV can hover above user 1 the whole time
    assert p.rate == pytest.approx(sc.overhead_capacity[0], abs=1e-6)


def test_sweep_symmetric_pair(two_users_100):
    b = pareto_sweep("fdma", [(0.5, 0.5)], two_users_100, workers=1)
    r = b.points[0].rates
    assert r[0] == pytest.approx(r[1], abs=1e-6)


def test_sweep_records_failures():
    sc = Scenario(UserLayout((0.0, 100.0)), horizon=1.0, v_max=0.0)
    b = pareto_sweep("tdma", [(0.5, 0.5)], sc.replace(v_max=20.0), workers=1)
    assert b.points or b.failures
    bad = pareto_sweep("noma", [(0.5, 0.5), (1.0,)], Scenario(UserLayout((0.0, 100.0))), workers=1)
    assert len(bad.points) == 1 and len(bad.failures) == 1
    assert bad.failures[0][0] == (1.0,)


def test_sweep_parallel_matches_serial(two_users_100):
    profs = default_profiles(2, 5)
    serial = pareto_sweep("tdma", profs, two_users_100, workers=1)
    par = pareto_sweep("tdma", profs, two_users_100, workers=2)
    assert [p.rate for p in serial.points] == [p.rate for p in par.points]


def test_rows_layout():
    b = RegionBoundary("noma", [BoundaryPoint(np.array([0.4, 0.6]), np.array([4.0, 6.0]), 10.0, 10.0, 1)])
    assert b.rows() == [[0.4, 0.6, 4.0, 6.0, 10.0]]


def test_chord_convexity_detects_dent():
    def pt(a1, r):
        a = np.array([a1, 1 - a1])
        return BoundaryPoint(a, a * r, r, r, 1)

    convex = RegionBoundary("x", [pt(0.0, 10.0), pt(0.5, 12.0), pt(1.0, 10.0)])
    dented = RegionBoundary("x", [pt(0.0, 10.0), pt(0.5, 9.0), pt(1.0, 10.0)])
    assert chord_convexity_violation(convex) <= 0
    assert chord_convexity_violation(dented) == pytest.approx(1.0)


# -- benchmarks ----------------------------------------------------------------


def test_successive_single_user():
    sc = Scenario(UserLayout((0.0,)))
    r, val = benchmark_successive_hover("fdma", [1.0], sc)
    assert val == pytest.approx(sc.overhead_capacity[0], rel=1e-12)


def test_successive_needs_flight_time(two_users_800):
    with pytest.raises(SolverError):
        benchmark_successive_hover("noma", [0.5, 0.5], two_users_800.replace(horizon=30.0))


@pytest.mark.parametrize("scheme", ex.SCHEMES)
def test_benchmarks_below_optimum(two_users_800, scheme):
    alpha = [0.4, 0.6]
    opt = ex.solve(scheme, alpha, two_users_800).sum_rate
    assert benchmark_successive_hover(scheme, alpha, two_users_800)[1] <= opt + 1e-6
    assert benchmark_static_hover(scheme, alpha, two_users_800)[1] <= opt + 1e-6


def test_static_symmetric_midpoint(two_users_100):
    sc = two_users_100
    _, val, x = benchmark_static_hover("noma", [0.5, 0.5], sc)
    assert x == pytest.approx(50.0, abs=sc.grid.step)
    s = float(sc.snr([50.0])[0, 0])
    assert val == pytest.approx(math.log2(1 + 2 * s), abs=1e-9)


def test_static_independent_of_horizon(two_users_800):
    a = benchmark_static_hover("fdma", [0.3, 0.7], two_users_800)
    b = benchmark_static_hover("fdma", [0.3, 0.7], two_users_800.replace(horizon=250.0))
    assert a[1] == pytest.approx(b[1], rel=1e-12)


@pytest.mark.parametrize("scheme", ex.SCHEMES)
def test_static_equals_solver_without_motion(scheme):
    sc = Scenario(UserLayout((0.0, 800.0)), v_max=0.0)
    opt = ex.solve(scheme, [0.3, 0.7], sc).sum_rate
    assert benchmark_static_hover(scheme, [0.3, 0.7], sc)[1] == pytest.approx(opt, abs=1e-6)


# -- oracle --------------------------------------------------------------------


def test_oracle_static_collapse():
    sc = Scenario(UserLayout((0.0, 100.0)), v_max=0.0)
    res = oracle_two_user_hfh("noma", [0.5, 0.5], sc, grid_points=21)
    _, val, _ = benchmark_static_hover("noma", [0.5, 0.5], sc)
    assert res.rate == pytest.approx(val, abs=1e-6)


def test_oracle_needs_two_users(four_users):
    with pytest.raises(ValueError):
        oracle_two_user_hfh("noma", [0.25] * 4, four_users)


def test_oracle_agrees_with_noma_solver(two_users_800):
    res = oracle_two_user_hfh("noma", [0.5, 0.5], two_users_800)
    assert solve_p1([0.5, 0.5], two_users_800).sum_rate == pytest.approx(res.rate, abs=1e-3)
    assert res.rate >= res.grid_rate - 1e-9


def test_oracle_respects_flight_time(two_users_800):
    sc = two_users_800.replace(horizon=45.0)
    res = oracle_two_user_hfh("tdma", [0.5, 0.5], sc, grid_points=41)
    assert (res.x_f - res.x_i) / sc.v_max <= sc.horizon * (1 + 1e-9)


# -- nesting -------------------------------------------------------------------


def test_nesting_single_profile(two_users_100):
    rep = region_nesting_report([(0.3, 0.7)], two_users_100, workers=1)
    assert rep.ok
    row = rep.rows[0]
    assert row["tdma"] <= row["fdma"] + 1e-6 <= row["noma"] + 2e-6


# -- hover locations -----------------------------------------------------------


def _fake_noma(points, durations, weights, x_i=0.0, x_f=100.0):
    from types import SimpleNamespace

    from uavmac.numerics import DualVector

    shf = SimpleNamespace(x_initial=x_i, x_final=x_f, hover_points=points,
                          hover_durations=durations)
    return SimpleNamespace(scheme="noma", shf=shf, dual=DualVector(np.asarray(weights, float)))


def test_hover_groups_split_on_dip(two_users_100):
    # equal weights: the weighted hover objective peaks at the midpoint only,
    # so a point far from it is a separate location unless tol covers the dip
    sol = _fake_noma([10.0, 50.0], [5.0, 5.0], [1.0, 1.0])
    assert ex.hover_location_groups(sol, two_users_100, tol=0.0) == [[10.0], [50.0]]
    assert ex.hover_location_count(sol, two_users_100, tol=1e3) == 1


def test_hover_groups_ignore_zero_dwell(two_users_100):
    sol = _fake_noma([10.0, 50.0, 90.0], [0.0, 5.0, 0.0], [1.0, 1.0])
    assert ex.hover_location_groups(sol, two_users_100, tol=0.0) == [[50.0]]


def test_hover_groups_merge_split_grid_location(two_users_100):
    sol = solve_p1([0.05, 0.95], two_users_100)
    groups = ex.hover_location_groups(sol, two_users_100)
    assert sum(len(g) for g in groups) == sol.n_hover
    assert len(groups) == 1
