"""Rate region under frequency-division multiple access.

User ``k`` granted the bandwidth fraction ``b_k`` achieves
``b_k log2(1 + snr_k / b_k)`` bps/Hz.  For weights ``mu`` the best split at a
location maximises ``sum_k mu_k b_k log2(1 + snr_k / b_k)`` over the simplex;
stationarity gives, with ``y_k = snr_k / b_k``,

    ln(1 + y_k) - y_k / (1 + y_k) = eta T ln 2 / mu_k,

whose solution is expressed with the principal Lambert W function:
``b_k = -W(-exp(-(eta T ln2 / mu_k + 1))) snr_k / (1 + W(...))``.  The
multiplier ``eta`` is set so that the fractions sum to one.

The boundary point for a rate profile is found exactly as for NOMA: dual
decomposition over ``mu``, a maximum-speed leg with the optimal split at
every instant, hovering at the maximisers of the weighted rate, and a small
LP time-sharing the hover points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

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
from .numerics import DualVector, cluster_maxima, lambert_w0, simpson_rule, simpson_weights
from .scenario import Scenario, SolverSettings
from .trajectory import ShfTrajectory, assemble_shf

__all__ = [
    "BandwidthAllocation",
    "FdmaSolution",
    "user_rate_fdma",
    "bandwidth_allocation",
    "allocate_bandwidth",
    "g1",
    "evaluate_dual_fdma",
    "timeshare_lp_fdma",
    "solve_p2_fixed_endpoints",
    "solve_p2",
    "validate_fdma_solution",
]

_LN2 = np.log(2.0)
_BRANCH = -np.exp(-1.0)


def _a_of_y(y):
    """``ln(1 + y) - y / (1 + y)``, increasing from 0 at ``y = 0``."""
    return np.log1p(y) - y / (1.0 + y)


def user_rate_fdma(b, x, k: int, scenario: Scenario):
    """Rate ``b log2(1 + snr_k(x) / b)`` of user ``k`` with bandwidth ``b``.

    The value at ``b = 0`` is the continuous limit 0.
    """
    s = scenario.snr(np.atleast_1d(x))[:, k]
    b = np.asarray(b, dtype=float)
    bb = np.where(b > 0, b, 1.0)
    with np.errstate(over="ignore", divide="ignore"):
        ratio = s / bb
        # log(1 + s/b) = log(s + b) - log(b) once s/b overflows
        logs = np.where(np.isfinite(ratio), np.log1p(ratio), np.log(s + bb) - np.log(bb))
    r = np.where(b > 0, bb * logs / _LN2, 0.0)
    return float(r.ravel()[0]) if r.size == 1 and np.ndim(x) == 0 and b.ndim == 0 else r


def _y_of_a(a: np.ndarray) -> np.ndarray:
    """Invert ``_a_of_y`` through the Lambert W function (``a > 0``)."""
    z = -np.exp(-(a + 1.0))
    z = np.maximum(z, _BRANCH + 1e-15)
    w = lambert_w0(z)
    with np.errstate(divide="ignore"):
        return np.where(w < 0.0, -(1.0 + w) / w, np.inf)


def allocate_bandwidth(snr: np.ndarray, mu: np.ndarray, horizon: float,
                       tol: float = 1e-10, max_iter: int = 100, log_c0=None):
    """Optimal bandwidth split at many locations at once.

    Parameters
    ----------
    snr : numpy.ndarray
        ``(n, K)`` SNRs.
    mu : numpy.ndarray
        ``(K,)`` nonnegative weights with at least one positive entry.
    horizon : float
        ``T``, which only scales the reported multiplier ``eta``.
    tol : float, optional
        Target ``|sum_k b_k - 1|`` before the final normalisation.
    log_c0 : numpy.ndarray, optional
        ``(n,)`` starting guess for ``log(eta T ln 2)`` (e.g. from a nearby
        weight vector); it is clipped into the bracket.

    Returns
    -------
    b : numpy.ndarray
        ``(n, K)`` fractions; users with ``mu_k = 0`` get 0.
    y : numpy.ndarray
        ``(n, K)`` per-user SNR per unit bandwidth ``snr / b`` (``inf`` when
        ``b = 0``).
    eta : numpy.ndarray
        ``(n,)`` multiplier of the bandwidth constraint.

    Notes
    -----
    The root of ``sum_k b_k(c) = 1`` in ``c = eta T ln 2`` is bracketed by
    ``min_k mu_k A(K' snr_k)`` and ``max_k mu_k A(K' snr_k)``, where
    ``A(y) = ln(1 + y) - y / (1 + y)`` and ``K'`` counts positive weights
    (at those values the user attaining the extreme gets exactly ``1/K'``).
    Safeguarded Newton steps on ``log c`` fall back to bisection whenever a
    step leaves the bracket.
    """
    snr = np.atleast_2d(np.asarray(snr, dtype=float))
    mu = np.asarray(mu, dtype=float)
    n, k = snr.shape
    if np.any(mu < 0) or not np.any(mu > 0):
        raise ValueError("weights must be nonnegative with at least one positive entry")
    act = np.flatnonzero(mu > 0)
    b = np.zeros((n, k))
    y = np.full((n, k), np.inf)
    if act.size == 1:
        j = act[0]
        b[:, j] = 1.0
        y[:, j] = snr[:, j]
        return b, y, mu[j] * _a_of_y(snr[:, j]) / (horizon * _LN2)

    s = snr[:, act]
    m = mu[act]
    kp = act.size
    cj = m * _a_of_y(kp * s)
    lo = np.log(cj.min(axis=1))
    hi = np.log(cj.max(axis=1))
    u = 0.5 * (lo + hi)
    if log_c0 is not None:
        u = np.where(np.isfinite(log_c0), np.clip(log_c0, lo, hi), u)
    # with w = W0(-exp(-(a + 1))) the per-unit SNR is y = -(1 + w) / w, so
    # b = s / y = -s w / (1 + w) and d b / d u = -b a / (1 + w)^2; an
    # underflowed w = 0 correctly yields b = 0
    for _ in range(max_iter):
        with np.errstate(over="ignore"):
            a = np.exp(u)[:, None] / m
        w = lambert_w0(np.maximum(-np.exp(-(a + 1.0)), _BRANCH + 1e-15))
        inv = 1.0 / (1.0 + w)
        bt = -s * w * inv
        f = bt.sum(axis=1) - 1.0
        df = -np.where(bt > 0, bt * np.minimum(a, 1e300) * inv * inv, 0.0).sum(axis=1)
        pos = f > 0
        lo = np.where(pos, u, lo)
        hi = np.where(pos, hi, u)
        done = (np.abs(f) <= tol) | (hi - lo <= 1e-15 * np.maximum(1.0, np.abs(u)))
        if done.all():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            u_new = u - f / df
        bad = ~np.isfinite(u_new) | (u_new <= lo) | (u_new >= hi)
        u_new = np.where(bad, 0.5 * (lo + hi), u_new)
        u = np.where(done, u, u_new)
    else:
        raise SolverError("bandwidth multiplier search did not converge")

    bs = bt / bt.sum(axis=1, keepdims=True)
    # keep y consistent with the normalised fractions
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ys = np.where(bs > 0, s / np.where(bs > 0, bs, 1.0), np.inf)
    b[:, act] = bs
    y[:, act] = ys
    eta = np.exp(u) / (horizon * _LN2)
    return b, y, eta


def _rates_from_allocation(b: np.ndarray, y: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.where(b > 0, b * np.log2(1.0 + np.where(b > 0, y, 0.0)), 0.0)


@dataclass
class BandwidthAllocation:
    """Optimal bandwidth split at one location.

    Attributes
    ----------
    fractions : numpy.ndarray
        ``b_k >= 0`` summing to one.
    eta : float
        Multiplier of the bandwidth constraint.
    """

    fractions: np.ndarray
    eta: float


def bandwidth_allocation(dual, x: float, scenario: Scenario) -> BandwidthAllocation:
    """Weighted-sum-rate optimal bandwidth split at location ``x``."""
    mu = np.asarray(getattr(dual, "weights", dual), dtype=float)
    b, _, eta = allocate_bandwidth(scenario.snr(np.atleast_1d(x)), mu, scenario.horizon)
    return BandwidthAllocation(b[0], float(eta[0]))


def g1(dual, x, scenario: Scenario):
    """Maximum weighted sum rate ``sum_k mu_k b_k log2(1 + snr_k / b_k)`` at ``x``."""
    mu = np.asarray(getattr(dual, "weights", dual), dtype=float)
    b, y, _ = allocate_bandwidth(scenario.snr(np.atleast_1d(x)), mu, scenario.horizon)
    out = _rates_from_allocation(b, y) @ mu
    return float(out[0]) if np.ndim(x) == 0 else out


# --------------------------------------------------------------------------
# per-dual pointwise tables on the location grid (shared by all cells)
# --------------------------------------------------------------------------

class _GridRates:
    """Optimal per-node rates on the location grid for recently used weights."""

    def __init__(self, scenario: Scenario, size: int = 16):
        self.scenario = scenario
        self.cache: dict[bytes, np.ndarray] = {}
        self.order: list[bytes] = []
        self.size = size
        self.last = None

    def __call__(self, mu: np.ndarray) -> np.ndarray:
        key = mu.tobytes()
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        g = self.scenario.grid
        t = self.scenario.horizon
        guess = None
        if self.last is not None:
            # the multiplier is homogeneous of degree one in the weights
            guess = self.last[0] + np.log(mu.sum() / self.last[1])
        b, y, eta = allocate_bandwidth(g.snr, mu, t, log_c0=guess)
        self.last = (np.log(eta * t * _LN2), mu.sum())
        rates = _rates_from_allocation(b, y)
        self.cache[key] = rates
        self.order.append(key)
        if len(self.order) > self.size:
            self.cache.pop(self.order.pop(0), None)
        return rates


def _grid_rates(scenario: Scenario) -> _GridRates:
    g = scenario.grid
    if not hasattr(g, "_fdma_rates"):
        g._fdma_rates = _GridRates(scenario)
    return g._fdma_rates


@lru_cache(maxsize=1024)
def _weights(n_points: int, dx: float) -> np.ndarray:
    return simpson_weights(n_points, dx)


class FdmaCell:
    """Dual oracle of the FDMA problem for fixed end points.

    Leg samples and hover candidates are either a slice of the location grid
    (``i0``/``i1`` given) or explicit node sets with their own SNRs.
    """

    def __init__(self, scenario: Scenario, x_i: float, x_f: float, *,
                 i0=None, i1=None, leg_nodes=None, leg_weights=None, hover_x=None):
        self.scenario = scenario
        self.x_i, self.x_f = float(x_i), float(x_f)
        self.i0, self.i1 = i0, i1
        self.t = scenario.horizon
        self.t_leg = scenario.flight_time(self.x_i, self.x_f)
        self.t_hover = max(self.t - self.t_leg, 0.0)
        self.k = scenario.n_users
        self.on_grid = i0 is not None
        if self.on_grid:
            g = scenario.grid
            m = i1 - i0 + 1
            self.leg_w = (_weights(m, g.step) / scenario.v_max) if m > 1 else np.zeros(1)
            self.hover_x = g.xs[i0:i1 + 1]
            self._rates = _grid_rates(scenario)
        else:
            self.leg_nodes = np.asarray(leg_nodes, dtype=float)
            self.leg_w = np.asarray(leg_weights, dtype=float)
            self.hover_x = np.asarray(hover_x, dtype=float)
            self.leg_snr = scenario.snr(self.leg_nodes) if self.leg_nodes.size else np.zeros((0, self.k))
            self.hover_snr = scenario.snr(self.hover_x)

    def _pointwise(self, mu: np.ndarray):
        """Per-user rates on leg samples and at hover candidates."""
        if self.on_grid:
            rates = self._rates(mu)[self.i0:self.i1 + 1]
            return rates, rates
        if self.leg_nodes.size:
            bl, yl, _ = allocate_bandwidth(self.leg_snr, mu, self.t)
            leg = _rates_from_allocation(bl, yl)
        else:
            leg = np.zeros((0, self.k))
        bh, yh, _ = allocate_bandwidth(self.hover_snr, mu, self.t)
        return leg, _rates_from_allocation(bh, yh)

    def evaluate(self, mu: np.ndarray) -> DualEval:
        leg, hov = self._pointwise(mu)
        leg_r = self.leg_w @ leg if leg.shape[0] else np.zeros(self.k)
        gh = hov @ mu
        j = int(np.argmax(gh))
        r = (leg_r + self.t_hover * hov[j]) / self.t
        return DualEval(float(r @ mu), r, j, None)

    def weighted_hover(self, mu: np.ndarray) -> np.ndarray:
        return self._pointwise(mu)[1] @ mu

    def recover(self, run: DualRun, alpha: np.ndarray, settings: SolverSettings):
        mu = run.lam
        leg, hov = self._pointwise(mu)
        leg_r = self.leg_w @ leg if leg.shape[0] else np.zeros(self.k)
        gh = hov @ mu
        tol = settings.candidate_tol * max(abs(float(gh.max())), 1e-300)
        cands = cluster_maxima(gh, tol)
        kept: list[int] = []
        for j in sorted(cands, key=lambda i: -gh[i]):
            if all(abs(j - i) > settings.candidate_merge for i in kept):
                kept.append(j)
        kept.sort()
        if self.t_hover == 0.0:
            kept = kept[:1]
        cols = [(leg_r + self.t_hover * hov[j]) / self.t for j in kept]
        strategies = [(mu, j) for j in kept]
        tau, r_val, _ = _timeshare_columns(np.array(cols).T, alpha)
        primal = _FdmaPrimal(r_val, np.array(cols).T @ tau, strategies, tau,
                             [float(self.hover_x[j]) for j in kept])
        if run.value - r_val > settings.gap_tol:
            # offer whole strategies from late iterates as well (mixtures of
            # leg allocations are dominated by the allocation of the mixture)
            for mu_h, ev in run.history:
                lg, hv = self._pointwise(mu_h)
                lr = self.leg_w @ lg if lg.shape[0] else np.zeros(self.k)
                cols.append((lr + self.t_hover * hv[ev.argmax]) / self.t)
                strategies.append((mu_h, ev.argmax))
            tau2, r2, _ = _timeshare_columns(np.array(cols).T, alpha)
            if r2 > r_val:
                primal = _FdmaPrimal(r2, np.array(cols).T @ tau2, strategies, tau2,
                                     [float(self.hover_x[j]) for _, j in strategies])
        return primal


@dataclass
class _FdmaPrimal:
    common_rate: float
    rates: np.ndarray
    strategies: list
    kappa: np.ndarray
    points: list


@dataclass
class FdmaSolution:
    """Optimal FDMA boundary point for a rate profile.

    Attributes
    ----------
    alpha : numpy.ndarray
    shf : ShfTrajectory
    hover_points : list of float
        Hover locations with positive time share.
    kappa : numpy.ndarray
        Time-sharing fractions of the speed-free time per hover point.
    allocation_weights : list of numpy.ndarray
        Weight vector whose optimal split is used while hovering at each
        point (the final multipliers unless a late iterate was mixed in).
    leg_weights : numpy.ndarray
        Weights defining the bandwidth split along the leg.
    rates : numpy.ndarray
    sum_rate : float
        Common rate ``R``.
    dual : DualVector
    dual_value : float
    stats : SearchStats or None
    """

    alpha: np.ndarray
    shf: ShfTrajectory
    hover_points: list
    kappa: np.ndarray
    allocation_weights: list
    leg_weights: list
    leg_shares: np.ndarray
    rates: np.ndarray
    sum_rate: float
    dual: DualVector
    dual_value: float
    stats: SearchStats | None = None
    scheme: str = field(default="fdma", init=False)

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

    def hover_allocations(self, scenario: Scenario) -> list[np.ndarray]:
        """Bandwidth fractions used at each hover point."""
        return [allocate_bandwidth(scenario.snr([x]), mu, scenario.horizon)[0][0]
                for x, mu in zip(self.hover_points, self.allocation_weights)]


def _grid_cell(scenario: Scenario, i0: int, i1: int) -> FdmaCell:
    g = scenario.grid
    return FdmaCell(scenario, g.xs[i0], g.xs[i1], i0=i0, i1=i1)


def _free_cell(scenario: Scenario, x_i: float, x_f: float, hover_x=None) -> FdmaCell:
    if x_f < x_i:
        raise ValueError("x_i must not exceed x_f")
    if scenario.flight_time(x_i, x_f) > scenario.horizon * (1.0 + 1e-12):
        raise SolverError("horizon is shorter than the flight time between the end points")
    if x_f > x_i:
        nodes, w = simpson_rule(x_i, x_f, scenario.settings.quadrature_panels)
        w = w / scenario.v_max
    else:
        nodes, w = np.zeros(0), np.zeros(0)
    if hover_x is None:
        xs = scenario.grid.xs
        hover_x = np.unique(np.concatenate([[x_i], xs[(xs > x_i) & (xs < x_f)], [x_f]]))
    return FdmaCell(scenario, x_i, x_f, leg_nodes=nodes, leg_weights=w, hover_x=hover_x)


def evaluate_dual_fdma(dual, x_i: float, x_f: float, scenario: Scenario):
    """Dual function of the fixed-end-point FDMA problem.

    Returns
    -------
    value : float
    subgradient : numpy.ndarray
        Average rate tuple of the maximising strategy.
    maximizers : list of float
        Clustered maximisers of the weighted hover rate.
    """
    mu = np.asarray(getattr(dual, "weights", dual), dtype=float)
    cell = _free_cell(scenario, x_i, x_f)
    ev = cell.evaluate(mu)
    gh = cell.weighted_hover(mu)
    maxima = [float(cell.hover_x[j]) for j in cluster_maxima(gh, scenario.settings.near_tie_tol)]
    return ev.value, ev.subgradient, maxima


def timeshare_lp_fdma(rate_tuples, alpha) -> tuple[np.ndarray, float]:
    """Time-share per-location FDMA rate tuples (rows) for a profile."""
    cols = np.atleast_2d(np.asarray(rate_tuples, dtype=float))
    kappa, r_val, _ = _timeshare_columns(cols.T, np.asarray(alpha, dtype=float))
    return kappa, r_val


def _build_solution(sol: CellSolution, alpha, scenario, stats=None) -> FdmaSolution:
    cell: FdmaCell = sol.cell
    p: _FdmaPrimal = sol.primal
    keep = np.flatnonzero(p.kappa > 0)
    kappa = p.kappa[keep] / p.kappa[keep].sum()
    pts = [p.points[i] for i in keep]
    weights = [p.strategies[i][0] for i in keep]
    shf = assemble_shf(cell.x_i, cell.x_f, pts, kappa * cell.t_hover,
                       scenario.v_max, scenario.horizon)
    return FdmaSolution(
        alpha=alpha,
        shf=shf,
        hover_points=pts,
        kappa=kappa,
        allocation_weights=weights,
        leg_weights=weights,
        leg_shares=kappa,
        rates=p.rates,
        sum_rate=p.common_rate,
        dual=DualVector(sol.run.lam),
        dual_value=sol.run.value,
        stats=stats,
    )


def solve_p2_fixed_endpoints(x_i: float, x_f: float, alpha, scenario: Scenario,
                             hover_points=None) -> FdmaSolution:
    """Optimal FDMA boundary point for given end points (optionally restricted hovers)."""
    alpha = validate_alpha(alpha, scenario.n_users)
    cell = _free_cell(scenario, x_i, x_f, hover_points)
    run = minimize_dual(cell, alpha, scenario.settings)
    primal = cell.recover(run, alpha, scenario.settings)
    return _build_solution(CellSolution(cell, run, primal), alpha, scenario)


def solve_p2(alpha, scenario: Scenario) -> FdmaSolution:
    """Optimal FDMA boundary point: dual decomposition plus endpoint search."""
    alpha = validate_alpha(alpha, scenario.n_users)
    best, stats = endpoint_search(scenario, alpha, lambda a, b: _grid_cell(scenario, a, b))
    return _build_solution(best, alpha, scenario, stats)


def validate_fdma_solution(sol: FdmaSolution, scenario: Scenario) -> np.ndarray:
    """Re-evaluate the rates of an FDMA solution by direct quadrature.

    Each time-sharing component ``i`` flies the leg with the split optimal for
    ``leg_weights[i]`` for a fraction ``leg_shares[i]`` of the rate budget and
    hovers at ``hover_points[i]`` for ``kappa[i]`` of the speed-free time.
    """
    leg = sol.shf.leg
    t = scenario.horizon
    t_hover = t - leg.duration
    r = np.zeros(scenario.n_users)
    if leg.duration > 0:
        nodes, w = simpson_rule(leg.x_start, leg.x_end, scenario.settings.quadrature_panels)
        snr = scenario.snr(nodes)
        for share, mu in zip(sol.leg_shares, sol.leg_weights):
            b, y, _ = allocate_bandwidth(snr, mu, t)
            r += share * (w @ _rates_from_allocation(b, y)) / leg.v_max
    for x, kap, mu in zip(sol.hover_points, sol.kappa, sol.allocation_weights):
        b, y, _ = allocate_bandwidth(scenario.snr([x]), mu, t)
        r += kap * t_hover * _rates_from_allocation(b, y)[0]
    return r / t
