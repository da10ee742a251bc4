"""Capacity region of the UAV-enabled multiple access channel (NOMA with SIC).

For a fixed trajectory the capacity region is the polymatroid

    { r >= 0 : sum_{k in S} r_k <= (1/T) int_0^T log2(1 + sum_{k in S} snr_k(x(t))) dt
               for every nonempty subset S }.

The boundary point in direction ``alpha`` (largest common rate ``R`` with
``r >= alpha R``) is found by Lagrange duality: for multipliers ``lam`` the
weighted sum rate is maximised by successive decoding in order of
decreasing ``lam`` (user ``order[0]`` decoded last, interference-free), the
leg is flown at maximum speed, and the remaining time is spent hovering at
the maximiser of

    psi(x) = sum_k (lam_{pi(k)} - lam_{pi(k+1)}) / T * log2(1 + sum_{i<=k} snr_{pi(i)}(x)).

Users are indexed from 0 throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import snr_matrix
from .dual import (
    CellSolution,
    DualEval,
    DualRun,
    SearchStats,
    SolverError,
    endpoint_search,
    minimize_dual,
    timeshare_lp as _timeshare_columns,
    validate_alpha,
)
from .numerics import (
    DualVector,
    LpProblem,
    cluster_maxima,
    simpson_rule,
    solve_lp,
)
from .scenario import Scenario, SolverSettings, subset_capacity_table
from .trajectory import MaxSpeedLeg, ShfTrajectory, SpeedFreeSchedule, assemble_shf

__all__ = [
    "DecodingOrder",
    "HoverSolutionSet",
    "NomaSolution",
    "subset_sum_rate",
    "vertex_rates",
    "psi_objective",
    "evaluate_dual",
    "enumerate_orders",
    "timeshare_lp",
    "solve_p1_fixed_endpoints",
    "solve_p1",
    "validate_noma_solution",
]

DecodingOrder = tuple
"""A permutation of user indices; ``order[0]`` is decoded last."""


def _prefix_masks(order: Sequence[int]) -> list[int]:
    masks, m = [], 0
    for k in order:
        m |= 1 << int(k)
        masks.append(m)
    return masks


def _vertex_from_table(order: Sequence[int], caps: np.ndarray) -> np.ndarray:
    """Vertex rates from a subset-capacity vector indexed by bitmask."""
    r = np.zeros(len(order))
    prev = 0.0
    for k, m in zip(order, _prefix_masks(order)):
        r[k] = caps[m] - prev
        prev = caps[m]
    return r


def _check_order(order: Sequence[int], k: int) -> tuple:
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(k)):
        raise ValueError(f"{order!r} is not a permutation of 0..{k - 1}")
    return order


def subset_sum_rate(x, subset: Sequence[int], scenario: Scenario):
    """Sum capacity ``log2(1 + sum_{k in subset} snr_k(x))`` in bps/Hz.

    Parameters
    ----------
    x : float or array_like
        UAV location(s).
    subset : sequence of int
        Nonempty set of user indices.
    scenario : Scenario
        Problem instance.
    """
    subset = sorted(set(int(k) for k in subset))
    if not subset:
        raise ValueError("subset must be nonempty")
    s = snr_matrix(np.atleast_1d(x), scenario.layout, scenario.channel)[:, subset].sum(axis=1)
    out = np.log2(1.0 + s)
    return float(out[0]) if np.ndim(x) == 0 else out


def _leg_subset_integrals(scenario: Scenario, leg: MaxSpeedLeg) -> np.ndarray:
    """Time integrals of every subset capacity over a leg (direct Simpson)."""
    k = scenario.n_users
    if leg.duration == 0.0:
        return np.zeros(1 << k)
    nodes, w = simpson_rule(leg.x_start, leg.x_end, scenario.settings.quadrature_panels)
    caps = subset_capacity_table(scenario.snr(nodes))
    return caps @ w / leg.v_max


def vertex_rates(
    order: Sequence[int],
    leg: MaxSpeedLeg,
    hovers: SpeedFreeSchedule,
    scenario: Scenario,
) -> np.ndarray:
    """Average rates of SIC with a fixed decoding order over a trajectory.

    Parameters
    ----------
    order : sequence of int
        Decoding order, ``order[0]`` decoded last.
    leg : MaxSpeedLeg
        Maximum-speed part of the trajectory.
    hovers : SpeedFreeSchedule
        Hover part; ``leg.duration + hovers.total`` must equal ``T``.
    scenario : Scenario
        Problem instance.

    Returns
    -------
    numpy.ndarray
        Rate of each user (bps/Hz), indexed by user.
    """
    k = scenario.n_users
    order = _check_order(order, k)
    t = scenario.horizon
    if abs(leg.duration + hovers.total - t) > 1e-9 * max(1.0, t):
        raise ValueError("leg and hover durations must add up to the horizon")
    caps = _leg_subset_integrals(scenario, leg)
    if hovers.hover_points:
        hc = subset_capacity_table(scenario.snr(np.asarray(hovers.hover_points)))
        caps = caps + hc @ np.asarray(hovers.hover_durations)
    return _vertex_from_table(order, caps) / t


def _sorted_order(lam: np.ndarray) -> tuple:
    return tuple(int(i) for i in np.argsort(-lam, kind="stable"))


def psi_objective(x, dual, order: Sequence[int], scenario: Scenario):
    """Weighted sum rate per unit time of hovering at ``x``.

    Parameters
    ----------
    x : float or array_like
        Hover location(s).
    dual : DualVector or array_like
        Multipliers ``lam``.
    order : sequence of int
        Decoding order sorting ``lam`` in decreasing order.
    scenario : Scenario

    Raises
    ------
    ValueError
        If ``order`` does not sort ``lam`` decreasingly (beyond the tie
        tolerance).
    """
    lam = np.asarray(getattr(dual, "weights", dual), dtype=float)
    order = _check_order(order, lam.size)
    seq = lam[list(order)]
    tol = scenario.settings.tie_tol * max(float(lam.max()), 1e-300)
    if np.any(np.diff(seq) > tol):
        raise ValueError("order must sort the dual weights in decreasing order")
    d = seq - np.append(seq[1:], 0.0)
    caps = subset_capacity_table(scenario.snr(np.atleast_1d(x)))[_prefix_masks(order)]
    out = d @ caps / scenario.horizon
    return float(out[0]) if np.ndim(x) == 0 else out


def enumerate_orders(dual, tie_tol: float = 1e-4, all_permutations: bool = False) -> list:
    """Decoding orders compatible with (near-)ties of the multipliers.

    Weights are sorted decreasingly and grouped: a new group starts when a
    weight falls more than ``tie_tol * max(lam)`` below its group's largest.
    Within each group of size ``m`` the ``m`` cyclic rotations of its members
    (in index order) are used, giving ``prod m`` orders; ``all_permutations``
    yields all ``prod m!`` instead.

    Parameters
    ----------
    dual : DualVector or array_like
    tie_tol : float, optional
        Relative tie tolerance.
    all_permutations : bool, optional

    Returns
    -------
    list of tuple
    """
    lam = np.asarray(getattr(dual, "weights", dual), dtype=float)
    order = np.argsort(-lam, kind="stable")
    tol = tie_tol * max(float(lam.max()), 0.0)
    groups: list[list[int]] = []
    for k in order:
        if groups and lam[groups[-1][0]] - lam[k] <= tol:
            groups[-1].append(int(k))
        else:
            groups.append([int(k)])
    choices = []
    for g in groups:
        g = sorted(g)
        if all_permutations:
            choices.append(list(itertools.permutations(g)))
        else:
            choices.append([tuple(g[i:] + g[:i]) for i in range(len(g))])
    return [tuple(itertools.chain.from_iterable(c)) for c in itertools.product(*choices)]


def timeshare_lp(rate_tuples, alpha) -> tuple[np.ndarray, float]:
    """Time-share rate tuples to maximise the common rate for a profile.

    Parameters
    ----------
    rate_tuples : array_like
        ``(J, K)`` candidate rate tuples.
    alpha : array_like
        Rate profile.

    Returns
    -------
    tau : numpy.ndarray
        Time-sharing fractions (sum to one).
    R : float
        Largest ``R`` with ``sum_j tau_j r_j >= alpha R``.
    """
    cols = np.atleast_2d(np.asarray(rate_tuples, dtype=float))
    tau, r_val, _ = _timeshare_columns(cols.T, np.asarray(alpha, dtype=float))
    return tau, r_val


@dataclass
class HoverSolutionSet:
    """Hover points, decoding orders and their time-sharing fractions.

    Attributes
    ----------
    hover_points : list of float
        Distinct hover locations, ascending.
    orders : list of tuple
        Decoding orders in use.
    shares : numpy.ndarray
        ``(len(hover_points), len(orders))`` fractions ``tau`` of the
        speed-free time (sum to one).
    rate_tuples : numpy.ndarray
        ``(len(hover_points), len(orders), K)`` average-rate tuple obtained by
        flying the leg and spending the whole speed-free time at the point
        with the order.
    leg_shares : numpy.ndarray
        Fraction of the leg operated with each order.
    """

    hover_points: list
    orders: list
    shares: np.ndarray
    rate_tuples: np.ndarray
    leg_shares: np.ndarray


@dataclass
class NomaSolution:
    """Optimal NOMA boundary point for a rate profile.

    Attributes
    ----------
    alpha : numpy.ndarray
        Rate profile.
    shf : ShfTrajectory
        Successive hover-and-fly trajectory.
    hover_set : HoverSolutionSet
        Decoding-order schedule.
    rates : numpy.ndarray
        Achieved average rates.
    sum_rate : float
        Common rate ``R`` (largest with ``rates >= alpha R``).
    dual : DualVector
        Optimal multipliers, ``alpha @ dual == 1``.
    dual_value : float
        Dual bound on ``R``.
    stats : SearchStats or None
        Endpoint-search statistics.
    """

    alpha: np.ndarray
    shf: ShfTrajectory
    hover_set: HoverSolutionSet
    rates: np.ndarray
    sum_rate: float
    dual: DualVector
    dual_value: float
    stats: SearchStats | None = None
    scheme: str = field(default="noma", init=False)

    @property
    def duality_gap(self) -> float:
        return float(self.dual_value - self.sum_rate)

    @property
    def n_hover(self) -> int:
        return self.shf.n_hover

    @property
    def common_rate(self) -> float:
        """``R / K``: every user's rate when ``alpha`` is the equal profile."""
        return self.sum_rate / len(self.alpha)


@dataclass
class _NomaPrimal:
    common_rate: float
    rates: np.ndarray
    points: list
    orders: list
    shares: np.ndarray
    tuples: np.ndarray
    leg_shares: np.ndarray


class NomaCell:
    """Dual oracle of the NOMA problem for fixed end points.

    Parameters
    ----------
    scenario : Scenario
    x_i, x_f : float
        End points.
    leg_caps : numpy.ndarray
        ``(2^K,)`` time integrals of subset capacities over the leg.
    hover_x : numpy.ndarray
        Candidate hover locations.
    hover_caps : numpy.ndarray
        ``(2^K, m)`` subset capacities at the candidates.
    i0, i1 : int, optional
        Grid indices of the end points (for the endpoint search).
    step : float
        Spacing of the hover candidates (for candidate merging).
    """

    def __init__(self, scenario, x_i, x_f, leg_caps, hover_x, hover_caps,
                 i0=None, i1=None):
        self.scenario = scenario
        self.x_i, self.x_f = float(x_i), float(x_f)
        self.i0, self.i1 = i0, i1
        self.t = scenario.horizon
        self.t_leg = scenario.flight_time(self.x_i, self.x_f)
        self.t_hover = max(self.t - self.t_leg, 0.0)
        self.leg_caps = leg_caps
        self.hover_x = np.asarray(hover_x, dtype=float)
        self.hover_caps = hover_caps
        self.k = scenario.n_users

    # -- dual oracle -------------------------------------------------------
    def psi(self, lam: np.ndarray, order=None) -> np.ndarray:
        order = _sorted_order(lam) if order is None else order
        seq = lam[list(order)]
        d = seq - np.append(seq[1:], 0.0)
        return d @ self.hover_caps[_prefix_masks(order)] / self.t

    def evaluate(self, lam: np.ndarray) -> DualEval:
        order = _sorted_order(lam)
        masks = _prefix_masks(order)
        seq = lam[list(order)]
        d = seq - np.append(seq[1:], 0.0)
        psi = d @ self.hover_caps[masks] / self.t
        j = int(np.argmax(psi))
        a = self.leg_caps[masks] + self.t_hover * self.hover_caps[masks, j]
        r = np.zeros(self.k)
        r[list(order)] = np.diff(np.concatenate([[0.0], a])) / self.t
        return DualEval(float(d @ a / self.t), r, j, order)

    # -- primal recovery ---------------------------------------------------
    def _vertex(self, order, j) -> np.ndarray:
        caps = self.leg_caps + self.t_hover * self.hover_caps[:, j]
        return _vertex_from_table(order, caps) / self.t

    def _candidates(self, lam, run: DualRun, tol_rel: float, merge: int) -> list[int]:
        psi = self.psi(lam)
        tol = tol_rel * max(abs(float(psi.max())), 1e-300)
        cands = set(cluster_maxima(psi, tol))
        for lam_h, ev in run.history:
            cands.add(int(np.argmax(self.psi(lam_h))))
        # merge candidates closer than `merge` nodes, keeping the best psi
        kept: list[int] = []
        for j in sorted(cands, key=lambda i: -psi[i]):
            if all(abs(j - i) > merge for i in kept):
                kept.append(j)
        return sorted(kept)

    def _orders(self, lam, run: DualRun, settings: SolverSettings, all_perm: bool) -> list:
        orders = enumerate_orders(lam, settings.tie_tol, all_perm)
        for lam_h, ev in run.history:
            if ev.info not in orders:
                orders.append(ev.info)
        return orders

    def _solve(self, lam, run, alpha, settings, tol_rel, all_perm, decoupled):
        cands = self._candidates(lam, run, tol_rel, settings.candidate_merge)
        if self.t_hover == 0.0:
            cands = cands[:1]
        orders = self._orders(lam, run, settings, all_perm)
        n_o = len(orders)
        tuples = np.array([[self._vertex(o, j) for o in orders] for j in cands])
        if not decoupled:
            tau, r_val, _ = _timeshare_columns(tuples.reshape(-1, self.k).T, alpha)
            shares = tau.reshape(len(cands), n_o)
            leg_shares = shares.sum(axis=0)
        else:
            shares, leg_shares, r_val = self._decoupled_lp(cands, orders, alpha)
        rates = self._rates(cands, orders, shares, leg_shares)
        return _NomaPrimal(r_val, rates, [float(self.hover_x[j]) for j in cands],
                           orders, shares, tuples, leg_shares)

    def _rates(self, cands, orders, shares, leg_shares) -> np.ndarray:
        r = np.zeros(self.k)
        for i, o in enumerate(orders):
            r += leg_shares[i] * _vertex_from_table(o, self.leg_caps)
            for g, j in enumerate(cands):
                if shares[g, i] > 0:
                    r += shares[g, i] * self.t_hover * _vertex_from_table(o, self.hover_caps[:, j])
        return r / self.t

    def _decoupled_lp(self, cands, orders, alpha):
        """Time-share orders on the leg independently of the hover schedule."""
        n_o, n_c = len(orders), len(cands)
        leg_cols = np.array([_vertex_from_table(o, self.leg_caps) for o in orders]).T / self.t
        hov_cols = np.array([[self.t_hover * _vertex_from_table(o, self.hover_caps[:, j])
                              for o in orders] for j in cands]).reshape(-1, self.k).T / self.t
        nv = n_o + n_c * n_o + 1
        c = np.zeros(nv)
        c[-1] = 1.0
        a_ub = np.hstack([-leg_cols, -hov_cols, alpha.reshape(-1, 1)])
        a_eq = np.zeros((2, nv))
        a_eq[0, :n_o] = 1.0
        a_eq[1, n_o:-1] = 1.0
        lp = solve_lp(LpProblem(c, a_ub, np.zeros(self.k), a_eq, np.ones(2)))
        if lp.status != "optimal":
            raise SolverError(f"time-sharing LP is {lp.status}")
        beta = np.maximum(lp.x[:n_o], 0.0)
        tau = np.maximum(lp.x[n_o:-1], 0.0)
        beta /= beta.sum()
        tau /= tau.sum()
        shares = tau.reshape(n_c, n_o)
        rates = self._rates(cands, orders, shares, beta)
        pos = alpha > 0
        return shares, beta, float(np.min(rates[pos] / alpha[pos]))

    def recover(self, run: DualRun, alpha: np.ndarray, settings: SolverSettings) -> _NomaPrimal:
        lam = run.lam
        best = self._solve(lam, run, alpha, settings, settings.candidate_tol,
                           settings.all_permutations, decoupled=False)
        if run.value - best.common_rate > settings.gap_tol:
            alt = self._solve(lam, run, alpha, settings, 10.0 * settings.candidate_tol,
                              True, decoupled=True)
            if alt.common_rate > best.common_rate:
                best = alt
        return best


def _grid_cell(scenario: Scenario, i0: int, i1: int) -> NomaCell:
    g = scenario.grid
    leg = g.leg_time_integral(g.subset_cum.T, i0, i1)
    return NomaCell(scenario, g.xs[i0], g.xs[i1], leg, g.xs[i0:i1 + 1],
                    g.subset_cap[:, i0:i1 + 1], i0, i1)


def _hover_grid(scenario: Scenario, x_i: float, x_f: float) -> np.ndarray:
    xs = scenario.grid.xs
    inner = xs[(xs > x_i) & (xs < x_f)]
    return np.unique(np.concatenate([[x_i], inner, [x_f]]))


def _free_cell(scenario: Scenario, x_i: float, x_f: float, hover_x=None) -> NomaCell:
    _check_endpoints(scenario, x_i, x_f)
    leg = MaxSpeedLeg(x_i, x_f, scenario.v_max)
    leg_caps = _leg_subset_integrals(scenario, leg)
    hx = _hover_grid(scenario, x_i, x_f) if hover_x is None else np.asarray(hover_x, float)
    return NomaCell(scenario, x_i, x_f, leg_caps, hx, subset_capacity_table(scenario.snr(hx)))


def _check_endpoints(scenario: Scenario, x_i: float, x_f: float) -> None:
    if x_f < x_i:
        raise ValueError("x_i must not exceed x_f")
    if scenario.flight_time(x_i, x_f) > scenario.horizon * (1.0 + 1e-12):
        raise SolverError("horizon is shorter than the flight time between the end points")


def evaluate_dual(dual, x_i: float, x_f: float, scenario: Scenario):
    """Dual function of the fixed-end-point NOMA problem.

    Parameters
    ----------
    dual : DualVector or array_like
        Multipliers ``lam >= 0``.
    x_i, x_f : float
        End points.
    scenario : Scenario

    Returns
    -------
    value : float
        ``max`` weighted sum rate ``sum_k lam_k r_k``.
    subgradient : numpy.ndarray
        Rate tuple attaining it.
    maximizers : list of float
        Clustered grid maximisers of ``psi`` on ``[x_i, x_f]``.
    """
    lam = np.asarray(getattr(dual, "weights", dual), dtype=float)
    cell = _free_cell(scenario, x_i, x_f)
    ev = cell.evaluate(lam)
    psi = cell.psi(lam)
    tol = scenario.settings.near_tie_tol
    maxima = [float(cell.hover_x[j]) for j in cluster_maxima(psi, tol)]
    return ev.value, ev.subgradient, maxima


def _build_solution(sol: CellSolution, alpha, scenario, stats=None) -> NomaSolution:
    cell: NomaCell = sol.cell
    p: _NomaPrimal = sol.primal
    keep_pts = np.flatnonzero(p.shares.sum(axis=1) > 0)
    keep_ord = np.flatnonzero((p.shares.sum(axis=0) > 0) | (p.leg_shares > 0))
    shares = p.shares[np.ix_(keep_pts, keep_ord)]
    shares = shares / shares.sum()
    pts = [p.points[i] for i in keep_pts]
    durations = shares.sum(axis=1) * cell.t_hover
    shf = assemble_shf(cell.x_i, cell.x_f, pts, durations, scenario.v_max, scenario.horizon)
    hs = HoverSolutionSet(
        hover_points=pts,
        orders=[p.orders[i] for i in keep_ord],
        shares=shares,
        rate_tuples=p.tuples[np.ix_(keep_pts, keep_ord)],
        leg_shares=p.leg_shares[keep_ord] / p.leg_shares[keep_ord].sum(),
    )
    return NomaSolution(
        alpha=alpha,
        shf=shf,
        hover_set=hs,
        rates=p.rates,
        sum_rate=p.common_rate,
        dual=DualVector(sol.run.lam),
        dual_value=sol.run.value,
        stats=stats,
    )


def solve_p1_fixed_endpoints(x_i: float, x_f: float, alpha, scenario: Scenario,
                             hover_points=None) -> NomaSolution:
    """Optimal NOMA boundary point for given trajectory end points.

    Parameters
    ----------
    x_i, x_f : float
        End points with ``x_i <= x_f`` and a flight time within the horizon.
    alpha : array_like
        Rate profile.
    scenario : Scenario
    hover_points : array_like, optional
        Restrict hovering to these locations (default: the location grid
        inside ``[x_i, x_f]`` plus both end points).

    Returns
    -------
    NomaSolution
    """
    alpha = validate_alpha(alpha, scenario.n_users)
    cell = _free_cell(scenario, x_i, x_f, hover_points)
    run = minimize_dual(cell, alpha, scenario.settings)
    primal = cell.recover(run, alpha, scenario.settings)
    return _build_solution(CellSolution(cell, run, primal), alpha, scenario)


def solve_p1(alpha, scenario: Scenario) -> NomaSolution:
    """Optimal NOMA boundary point: dual decomposition plus endpoint search.

    Parameters
    ----------
    alpha : array_like
        Rate profile.
    scenario : Scenario

    Returns
    -------
    NomaSolution
    """
    alpha = validate_alpha(alpha, scenario.n_users)
    best, stats = endpoint_search(scenario, alpha, lambda a, b: _grid_cell(scenario, a, b))
    return _build_solution(best, alpha, scenario, stats)


def validate_noma_solution(sol: NomaSolution, scenario: Scenario) -> np.ndarray:
    """Re-evaluate the rates of a NOMA solution from its trajectory and schedule.

    Leg integrals use direct Simpson quadrature rather than the grid tables.

    Returns
    -------
    numpy.ndarray
        Recomputed average rates.
    """
    leg = sol.shf.leg
    leg_caps = _leg_subset_integrals(scenario, leg)
    hs = sol.hover_set
    t = scenario.horizon
    t_hover = t - leg.duration
    r = np.zeros(scenario.n_users)
    hover_caps = subset_capacity_table(scenario.snr(np.asarray(hs.hover_points)))
    for i, o in enumerate(hs.orders):
        r += hs.leg_shares[i] * _vertex_from_table(o, leg_caps)
        for g in range(len(hs.hover_points)):
            r += hs.shares[g, i] * t_hover * _vertex_from_table(o, hover_caps[:, g])
    return r / t

