"""Rate region under time-division multiple access.

Only one user transmits at a time.  For weights ``nu`` the best choice at
location ``x`` is the user maximising ``nu_k log2(1 + snr_k(x))``, so along
the maximum-speed leg the active user switches where two weighted rates
cross.  A user's gain is largest directly above it and falls off with
distance, so speed-free time given to user ``k`` is best spent at ``w_k``
clamped into ``[x_I, x_F]``: exactly above the user whenever the leg passes
it, otherwise at the nearer end point.  How the speed-free time is split
among the users follows from a small LP.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dual import (
    CellSolution,
    DualEval,
    DualRun,
    SearchStats,
    SolverError,
    endpoint_search,
    solve_cell,
    validate_alpha,
)
from .numerics import DualVector, LpProblem, quadrature, simpson_rule, solve_lp
from .scenario import Scenario, SolverSettings
from .trajectory import MaxSpeedLeg, ShfTrajectory, assemble_shf

__all__ = [
    "TdmaSchedule",
    "TdmaSolution",
    "best_user",
    "flight_rate_integrals",
    "switching_points",
    "hover_window",
    "hover_locations",
    "hover_duration_lp",
    "solve_p3_fixed_endpoints",
    "solve_p3",
    "validate_tdma_solution",
]

_POS_TOL = 1e-9


def _weights_of(dual) -> np.ndarray:
    nu = np.asarray(getattr(dual, "weights", dual), dtype=float)
    if np.any(nu < 0) or not np.any(nu > 0):
        raise ValueError("dual weights must be nonnegative and not all zero")
    return nu


def best_user(dual, x: float, scenario: Scenario) -> int:
    """Index of the user with the largest weighted rate at ``x`` (lowest wins ties)."""
    nu = _weights_of(dual)
    cap = np.log2(1.0 + scenario.snr([x])[0])
    return int(np.argmax(nu * cap))


def _weighted_diff(scenario: Scenario, nu: np.ndarray, a: np.ndarray, b: np.ndarray, x: np.ndarray):
    cap = np.log2(1.0 + scenario.snr(x))
    idx = np.arange(x.size)
    return nu[a] * cap[idx, a] - nu[b] * cap[idx, b]


def _refine_crossings(scenario: Scenario, nu, a, b, lo, hi, tol: float = 1e-9, max_iter: int = 60):
    """Vectorised Illinois regula falsi for ``nu_a c_a(x) = nu_b c_b(x)`` on ``[lo, hi]``.

    ``a`` wins at ``lo`` and ``b`` at ``hi``; when no sign change exists the
    bracket end where the difference is smallest is returned.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    if lo.size == 0:
        return lo
    flo = _weighted_diff(scenario, nu, a, b, lo)
    fhi = _weighted_diff(scenario, nu, a, b, hi)
    x = np.where(np.abs(flo) <= np.abs(fhi), lo, hi)
    ok = (flo > 0) & (fhi < 0)
    side = np.zeros(lo.size, dtype=int)
    for _ in range(max_iter):
        if not ok.any() or np.all((hi - lo)[ok] <= tol):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = np.where(ok, (lo * fhi - hi * flo) / (fhi - flo), x)
        xn = np.where(np.isfinite(xn), np.clip(xn, lo, hi), 0.5 * (lo + hi))
        fx = _weighted_diff(scenario, nu, a, b, xn)
        x = np.where(ok, xn, x)
        left = ok & (fx > 0)
        right = ok & (fx <= 0)
        # Illinois modification: halve the stale end's value when one end repeats
        fhi = np.where(left & (side == 1), 0.5 * fhi, fhi)
        flo = np.where(right & (side == -1), 0.5 * flo, flo)
        lo = np.where(left, xn, lo)
        flo = np.where(left, fx, flo)
        hi = np.where(right, xn, hi)
        fhi = np.where(right, fx, fhi)
        side = np.where(left, 1, np.where(right, -1, side))
        ok &= fx != 0
    return x


def _partial(scenario: Scenario, users: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Three-point Simpson integrals of ``log2(1 + snr_user)`` over ``[lo, hi]``."""
    pts = np.concatenate([lo, 0.5 * (lo + hi), hi])
    cap = np.log2(1.0 + scenario.snr(pts))
    n = lo.size
    c = cap[np.arange(3 * n), np.tile(users, 3)].reshape(3, n)
    return (hi - lo) / 6.0 * (c[0] + 4.0 * c[1] + c[2])


class _GridLeg:
    """Argmax attribution of every grid interval for one weight vector.

    Attributes
    ----------
    labels : numpy.ndarray
        Best user at each grid node.
    cross : numpy.ndarray
        Crossing location inside each interval (NaN where the label does
        not change).
    cum : numpy.ndarray
        ``(n, K)`` cumulative position integrals of each user's own rate
        over the positions where it is active.
    """

    def __init__(self, scenario: Scenario, nu: np.ndarray):
        g = scenario.grid
        weighted = g.cap * nu
        self.labels = lab = np.argmax(weighted, axis=1)
        n = g.n_nodes
        k = scenario.n_users
        piece = np.zeros((max(n - 1, 0), k))
        self.cross = np.full(max(n - 1, 0), np.nan)
        if n > 1:
            dint = np.diff(g.cum, axis=0)
            same = lab[:-1] == lab[1:]
            j_same = np.flatnonzero(same)
            piece[j_same, lab[j_same]] = dint[j_same, lab[j_same]]
            j_sw = np.flatnonzero(~same)
            if j_sw.size:
                a, b = lab[j_sw], lab[j_sw + 1]
                xc = _refine_crossings(scenario, nu, a, b, g.xs[j_sw], g.xs[j_sw + 1])
                self.cross[j_sw] = xc
                piece[j_sw, a] += _partial(scenario, a, g.xs[j_sw], xc)
                piece[j_sw, b] += _partial(scenario, b, xc, g.xs[j_sw + 1])
        self.cum = np.vstack([np.zeros((1, k)), np.cumsum(piece, axis=0)])


class _GridLegCache:
    def __init__(self, scenario: Scenario, size: int = 32):
        self.scenario = scenario
        self.cache: dict[bytes, _GridLeg] = {}
        self.order: list[bytes] = []
        self.size = size

    def __call__(self, nu: np.ndarray) -> _GridLeg:
        key = nu.tobytes()
        hit = self.cache.get(key)
        if hit is None:
            hit = self.cache[key] = _GridLeg(self.scenario, nu)
            self.order.append(key)
            if len(self.order) > self.size:
                self.cache.pop(self.order.pop(0), None)
        return hit


def _grid_legs(scenario: Scenario) -> _GridLegCache:
    g = scenario.grid
    if not hasattr(g, "_tdma_legs"):
        g._tdma_legs = _GridLegCache(scenario)
    return g._tdma_legs


def flight_rate_integrals(dual, leg: MaxSpeedLeg, scenario: Scenario) -> np.ndarray:
    """Per-user time integrals of the own rate over the leg's active intervals.

    Crossings of the weighted rates are located on a fine scan of the leg
    and polished by bisection to ``1e-6`` m; every constant-user segment is
    then integrated with composite Simpson.

    Returns
    -------
    numpy.ndarray
        ``(K,)`` integrals in (bps/Hz) * s; they add up to the leg integral
        of the best user's own rate.
    """
    nu = _weights_of(dual)
    k = scenario.n_users
    out = np.zeros(k)
    if leg.duration == 0.0:
        return out
    for (a, b, user) in _leg_segments(nu, leg.x_start, leg.x_end, scenario):
        panels = max(8, int(np.ceil(scenario.settings.quadrature_panels * (b - a) / (leg.x_end - leg.x_start))))
        out[user] += quadrature(lambda x: np.log2(1.0 + scenario.snr(x)[:, user]), a, b, panels)
    return out / leg.v_max


def _leg_segments(nu: np.ndarray, x0: float, x1: float, scenario: Scenario, scan: int = 2048):
    """Constant-user position segments ``(a, b, user)`` of ``[x0, x1]``."""
    xs = np.linspace(x0, x1, scan + 1)
    lab = np.argmax(np.log2(1.0 + scenario.snr(xs)) * nu, axis=1)
    segs = []
    start = x0
    for j in np.flatnonzero(lab[:-1] != lab[1:]):
        ua, ub = int(lab[j]), int(lab[j + 1])
        lo, hi = xs[j], xs[j + 1]

        def diff(x):
            c = np.log2(1.0 + scenario.snr([x])[0])
            return nu[ua] * c[ua] - nu[ub] * c[ub]

        while hi - lo > 1e-6:
            mid = 0.5 * (lo + hi)
            if diff(mid) >= 0:
                lo = mid
            else:
                hi = mid
        xc = 0.5 * (lo + hi)
        segs.append((start, xc, ua))
        start = xc
    segs.append((start, x1, int(lab[-1])))
    return segs


def switching_points(dual, scenario: Scenario) -> list[tuple[int, float]]:
    """Crossings of consecutive positive-weight users between their positions.

    Returns
    -------
    list of (int, float)
        ``(k, x)``: user ``k`` hands over to the next positive-weight user at
        ``x``.  Pairs where one user dominates the whole interval are
        omitted.
    """
    nu = _weights_of(dual)
    w = scenario.layout.w
    act = np.flatnonzero(nu > 0)
    out = []
    for k, kn in zip(act[:-1], act[1:]):
        lo, hi = float(w[k]), float(w[kn])
        if hi <= lo:
            continue

        def diff(x, k=k, kn=kn):
            c = np.log2(1.0 + scenario.snr([x])[0])
            return nu[k] * c[k] - nu[kn] * c[kn]

        if not (diff(lo) > 0 > diff(hi)):
            continue
        while hi - lo > 1e-6:
            mid = 0.5 * (lo + hi)
            if diff(mid) > 0:
                lo = mid
            else:
                hi = mid
        out.append((int(k), 0.5 * (lo + hi)))
    return out


def _own_capacity(scenario: Scenario, spots) -> np.ndarray:
    spots = np.asarray(spots, dtype=float)
    k = np.arange(spots.size)
    return np.log2(1.0 + scenario.snr(spots)[k, k])


def hover_window(x_i: float, x_f: float, scenario: Scenario) -> np.ndarray:
    """Users located inside ``[x_i, x_f]`` (the only admissible hover points)."""
    w = scenario.layout.w
    return np.flatnonzero((w >= x_i - _POS_TOL) & (w <= x_f + _POS_TOL))


def hover_locations(x_i: float, x_f: float, scenario: Scenario) -> np.ndarray:
    """Best hover spot of every user for a leg from ``x_i`` to ``x_f``.

    Returns
    -------
    numpy.ndarray
        ``(K,)`` user positions clamped into ``[x_i, x_f]``.
    """
    return np.clip(scenario.layout.w, x_i, x_f)


def hover_duration_lp(flight_rates, alpha, k_i: int, k_f: int, scenario: Scenario,
                      t_hover: float, hover_caps=None):
    """Optimal split of the speed-free time among the users ``k_i..k_f``.

    Parameters
    ----------
    flight_rates : array_like
        ``(K,)`` leg time integrals of each user's rate (bps/Hz * s).
    alpha : array_like
        Rate profile.
    k_i, k_f : int
        First and last user (0-based, inclusive) the UAV may hover above.
    scenario : Scenario
    t_hover : float
        Speed-free time ``T_hat`` to distribute.
    hover_caps : array_like, optional
        ``(K,)`` capacity of each user at its hover spot; defaults to the
        capacity directly above the user.

    Returns
    -------
    tau : numpy.ndarray
        ``(K,)`` hover durations, zero outside the window.
    rates : numpy.ndarray
        Average rates.
    R : float
        Common rate.
    """
    alpha = np.asarray(alpha, dtype=float)
    flight = np.asarray(flight_rates, dtype=float)
    k = flight.size
    t = scenario.horizon
    tau = np.zeros(k)
    if t_hover <= 0.0 or k_f < k_i:
        if t_hover > 0.0:
            raise SolverError("positive hover time but no user inside the hover window")
        rates = flight / t
        pos = alpha > 0
        return tau, rates, float(np.min(rates[pos] / alpha[pos]))
    window = np.arange(k_i, k_f + 1)
    all_caps = scenario.overhead_capacity if hover_caps is None else np.asarray(hover_caps, float)
    caps = all_caps[window]
    m = window.size
    # variables: tau over the window, then R; rows r_k >= alpha_k R
    c = np.zeros(m + 1)
    c[-1] = 1.0
    a_ub = np.zeros((k, m + 1))
    a_ub[window, np.arange(m)] = -caps / t
    a_ub[:, -1] = alpha
    b_ub = flight / t
    a_eq = np.zeros((1, m + 1))
    a_eq[0, :m] = 1.0
    lp = solve_lp(LpProblem(c, a_ub, b_ub, a_eq, np.array([t_hover])))
    if lp.status != "optimal":
        raise SolverError(f"hover-duration LP is {lp.status}")
    tau[window] = np.maximum(lp.x[:m], 0.0)
    tau[window] *= t_hover / tau[window].sum()
    rates = flight / t
    rates[window] += tau[window] * caps / t
    pos = alpha > 0
    return tau, rates, float(np.min(rates[pos] / alpha[pos]))


@dataclass
class TdmaSchedule:
    """Who transmits when.

    Attributes
    ----------
    segments : list of (float, float, int)
        ``(t_start, t_end, user)`` over the flight time ``[0, T_bar]``, in
        leg time (hover pauses excluded).
    hover_durations : numpy.ndarray
        ``(K,)`` time spent hovering while each user transmits.
    hover_locations : numpy.ndarray or None
        ``(K,)`` where each user is served while hovering; ``None`` means
        directly above the user.
    """

    segments: list
    hover_durations: np.ndarray
    hover_locations: np.ndarray | None = None

    def hover_capacity(self, scenario: Scenario) -> np.ndarray:
        """Capacity of each user at its hover spot."""
        if self.hover_locations is None:
            return scenario.overhead_capacity
        return _own_capacity(scenario, self.hover_locations)


@dataclass
class TdmaSolution:
    """Optimal TDMA boundary point for a rate profile.

    Attributes
    ----------
    alpha : numpy.ndarray
    shf : ShfTrajectory
    schedule : TdmaSchedule
    rates : numpy.ndarray
    sum_rate : float
        Common rate ``R``.
    dual : DualVector
    dual_value : float
    stats : SearchStats or None
    """

    alpha: np.ndarray
    shf: ShfTrajectory
    schedule: TdmaSchedule
    rates: np.ndarray
    sum_rate: float
    dual: DualVector
    dual_value: float
    stats: SearchStats | None = None
    scheme: str = field(default="tdma", init=False)

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

    @property
    def hover_points(self) -> list[float]:
        return [float(p) for p, d in zip(self.shf.hover_points, self.shf.hover_durations) if d > 0]


@dataclass
class _TdmaPrimal:
    common_rate: float
    rates: np.ndarray
    tau: np.ndarray
    segments: list


class TdmaCell:
    """Dual oracle of the TDMA problem for grid end points ``xs[i0], xs[i1]``."""

    def __init__(self, scenario: Scenario, i0: int, i1: int):
        g = scenario.grid
        self.scenario = scenario
        self.i0, self.i1 = i0, i1
        self.x_i, self.x_f = float(g.xs[i0]), float(g.xs[i1])
        self.t = scenario.horizon
        self.t_leg = scenario.flight_time(self.x_i, self.x_f)
        self.t_hover = max(self.t - self.t_leg, 0.0)
        self.k = scenario.n_users
        self.window = np.arange(self.k)
        self.spots = hover_locations(self.x_i, self.x_f, scenario)
        self.caps = _own_capacity(scenario, self.spots)
        self._legs = _grid_legs(scenario)

    def leg_integrals(self, nu: np.ndarray) -> np.ndarray:
        if self.i1 == self.i0:
            return np.zeros(self.k)
        leg = self._legs(nu)
        return (leg.cum[self.i1] - leg.cum[self.i0]) / self.scenario.v_max

    def evaluate(self, nu: np.ndarray) -> DualEval:
        r = self.leg_integrals(nu)
        j = -1
        if self.t_hover > 0.0:
            vals = nu[self.window] * self.caps[self.window]
            j = int(self.window[int(np.argmax(vals))])
            r = r.copy()
            r[j] += self.t_hover * self.caps[j]
        r = r / self.t
        return DualEval(float(r @ nu), r, j, None)

    def segments(self, nu: np.ndarray) -> list[tuple[float, float, int]]:
        """Active-user segments of the leg in leg time."""
        if self.i1 == self.i0:
            return []
        g = self.scenario.grid
        leg = self._legs(nu)
        lab = leg.labels
        v = self.scenario.v_max
        out = []
        start = self.x_i
        for j in range(self.i0, self.i1):
            if lab[j] != lab[j + 1]:
                xc = float(leg.cross[j])
                out.append(((start - self.x_i) / v, (xc - self.x_i) / v, int(lab[j])))
                start = xc
        out.append(((start - self.x_i) / v, self.t_leg, int(lab[self.i1])))
        return [s for s in out if s[1] > s[0]] or out[-1:]

    def recover(self, run: DualRun, alpha: np.ndarray, settings: SolverSettings) -> _TdmaPrimal:
        # the leg schedule that is optimal at the final multipliers, or at a
        # late iterate if that time-shares better with the hover LP
        best = None
        for nu in [run.lam] + [lam for lam, _ in reversed(run.history)]:
            flight = self.leg_integrals(nu)
            tau, rates, r_val = hover_duration_lp(flight, alpha, 0, self.k - 1, self.scenario,
                                                  self.t_hover, hover_caps=self.caps)
            if best is None or r_val > best.common_rate + 1e-12:
                best = _TdmaPrimal(r_val, rates, tau, self.segments(nu))
            if run.value - best.common_rate <= settings.gap_tol * 1e-3:
                break
        return best


def _grid_cell(scenario: Scenario, i0: int, i1: int):
    return TdmaCell(scenario, i0, i1)


def _build_solution(sol: CellSolution, alpha, scenario: Scenario, stats=None) -> TdmaSolution:
    cell: TdmaCell = sol.cell
    p: _TdmaPrimal = sol.primal
    use = np.flatnonzero(p.tau > 0)
    shf = assemble_shf(cell.x_i, cell.x_f, [float(cell.spots[k]) for k in use], p.tau[use],
                       scenario.v_max, scenario.horizon)
    return TdmaSolution(
        alpha=alpha,
        shf=shf,
        schedule=TdmaSchedule(p.segments, p.tau, cell.spots.copy()),
        rates=p.rates,
        sum_rate=p.common_rate,
        dual=DualVector(sol.run.lam),
        dual_value=sol.run.value,
        stats=stats,
    )


def _check_overhead_optimal(scenario: Scenario) -> None:
    """Warn if some user's gain is not maximal directly above it (model sanity)."""
    g = scenario.grid
    if g.n_nodes < 2:
        return
    best = g.cap.max(axis=0)
    if np.any(best > scenario.overhead_capacity * (1.0 + 1e-12)):
        warnings.warn("a user's channel is not strongest directly above it; "
                      "hovering above users may be suboptimal", RuntimeWarning, stacklevel=3)


def solve_p3(alpha, scenario: Scenario) -> TdmaSolution:
    """Optimal TDMA boundary point: dual decomposition plus endpoint search."""
    alpha = validate_alpha(alpha, scenario.n_users)
    _check_overhead_optimal(scenario)
    best, stats = endpoint_search(scenario, alpha, lambda a, b: _grid_cell(scenario, a, b))
    return _build_solution(best, alpha, scenario, stats)


def solve_p3_fixed_endpoints(i0: int, i1: int, alpha, scenario: Scenario) -> TdmaSolution:
    """Optimal TDMA boundary point for the grid end points ``xs[i0]``, ``xs[i1]``."""
    alpha = validate_alpha(alpha, scenario.n_users)
    cell = _grid_cell(scenario, i0, i1)
    if cell is None or not scenario.grid.feasible(i0, i1):
        raise SolverError("end points admit no feasible TDMA trajectory")
    return _build_solution(solve_cell(cell, alpha, scenario.settings), alpha, scenario)


def validate_tdma_solution(sol: TdmaSolution, scenario: Scenario) -> np.ndarray:
    """Re-evaluate the rates of a TDMA solution by direct quadrature."""
    leg = sol.shf.leg
    r = np.zeros(scenario.n_users)
    for t0, t1, k in sol.schedule.segments:
        if t1 > t0:
            nodes, w = simpson_rule(leg.x_start + leg.v_max * t0, leg.x_start + leg.v_max * t1,
                                    scenario.settings.quadrature_panels)
            r[k] += w @ np.log2(1.0 + scenario.snr(nodes)[:, k]) / leg.v_max
    spots = getattr(sol.schedule, "hover_locations", None)
    caps = scenario.overhead_capacity if spots is None else _own_capacity(scenario, spots)
    r += np.asarray(sol.schedule.hover_durations) * caps
    return r / scenario.horizon
