"""Boundary sweeps, benchmark schemes, a brute-force oracle and report checks."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import minimize

from . import fdma, noma, tdma
from .dual import SolverError, validate_alpha
from .numerics import quadrature
from .scenario import Scenario

__all__ = [
    "SCHEMES",
    "RateProfile",
    "BoundaryPoint",
    "RegionBoundary",
    "HfhOracleResult",
    "NestingReport",
    "default_profiles",
    "solve",
    "pareto_sweep",
    "benchmark_successive_hover",
    "benchmark_static_hover",
    "oracle_two_user_hfh",
    "region_nesting_report",
    "chord_convexity_violation",
    "hover_location_groups",
    "hover_location_count",
    "worker_count",
]

SCHEMES = ("noma", "fdma", "tdma")

_SOLVERS = {"noma": noma.solve_p1, "fdma": fdma.solve_p2, "tdma": tdma.solve_p3}


def _check_scheme(scheme: str) -> str:
    s = scheme.lower()
    if s not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return s


def solve(scheme: str, alpha, scenario: Scenario):
    """Run the optimal solver of ``scheme`` for one rate profile."""
    return _SOLVERS[_check_scheme(scheme)](alpha, scenario)


def worker_count(default: int = 1) -> int:
    """Worker processes for sweeps (``UAVMAC_WORKERS`` overrides the default)."""
    raw = os.environ.get("UAVMAC_WORKERS")
    if raw is None or raw.strip() == "":
        return default
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"UAVMAC_WORKERS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError("UAVMAC_WORKERS must be >= 1")
    return n


# --------------------------------------------------------------------------
# profiles and boundaries
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RateProfile:
    """Rate profile ``alpha``: nonnegative shares summing to one."""

    alpha: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in self.alpha)
        if not a:
            raise ValueError("rate profile must not be empty")
        if any(v < 0 or not math.isfinite(v) for v in a):
            raise ValueError("rate profile entries must be finite and nonnegative")
        if abs(sum(a) - 1.0) > 1e-12:
            raise ValueError("rate profile must sum to one")
        object.__setattr__(self, "alpha", a)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.alpha)

    @classmethod
    def equal(cls, k: int) -> "RateProfile":
        return cls(tuple([1.0 / k] * k))

    @classmethod
    def axis(cls, k: int, user: int) -> "RateProfile":
        a = [0.0] * k
        a[user] = 1.0
        return cls(tuple(a))


def default_profiles(k: int, points: int = 21) -> list[RateProfile]:
    """Profiles used for boundary sweeps.

    Two users: ``alpha_1`` on ``points`` evenly spaced values in ``[0, 1]``.
    More users: the equal profile followed by the ``K`` axis profiles.
    """
    if k == 1:
        return [RateProfile((1.0,))]
    if k == 2:
        out = []
        for a1 in np.linspace(0.0, 1.0, points):
            a1 = round(float(a1), 12)
            out.append(RateProfile((a1, round(1.0 - a1, 12))))
        return out
    return [RateProfile.equal(k)] + [RateProfile.axis(k, j) for j in range(k)]


@dataclass
class BoundaryPoint:
    """One solved boundary point."""

    alpha: np.ndarray
    rates: np.ndarray
    rate: float
    dual_value: float
    n_hover: int

    @property
    def duality_gap(self) -> float:
        return float(self.dual_value - self.rate)


@dataclass
class RegionBoundary:
    """Boundary points of one scheme's region plus failed profiles.

    Attributes
    ----------
    scheme : str
    points : list of BoundaryPoint
    failures : list of (tuple, str)
        Profiles whose solve raised, with the error message.
    """

    scheme: str
    points: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def rows(self) -> list[list[float]]:
        """``alpha..., r..., R`` rows for CSV emission."""
        return [list(p.alpha) + list(p.rates) + [p.rate] for p in self.points]


def _sweep_one(args):
    scheme, alpha, scenario = args
    try:
        sol = solve(scheme, alpha, scenario)
    except (SolverError, ValueError, ArithmeticError) as exc:
        return alpha, None, f"{type(exc).__name__}: {exc}"
    return alpha, BoundaryPoint(np.asarray(alpha), np.asarray(sol.rates), float(sol.sum_rate),
                                float(sol.dual_value), int(sol.n_hover)), None


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def pareto_sweep(scheme: str, profiles: Sequence, scenario: Scenario,
                 workers: int | None = None) -> RegionBoundary:
    """Solve one boundary point per profile; failures are recorded, not raised."""
    scheme = _check_scheme(scheme)
    workers = worker_count() if workers is None else workers
    alphas = [tuple(getattr(p, "alpha", p)) for p in profiles]
    out = RegionBoundary(scheme)
    for alpha, point, err in _map(_sweep_one, [(scheme, a, scenario) for a in alphas], workers):
        if point is None:
            out.failures.append((alpha, err))
        else:
            out.points.append(point)
    return out


# --------------------------------------------------------------------------
# benchmarks
# --------------------------------------------------------------------------

def benchmark_successive_hover(scheme: str, alpha, scenario: Scenario):
    """Fly from the first to the last user, hovering only above users.

    Hover durations and the resource allocation are still optimised.

    Returns
    -------
    rates : numpy.ndarray
    R : float

    Raises
    ------
    SolverError
        If the horizon is shorter than the flight from ``w_1`` to ``w_K``.
    """
    scheme = _check_scheme(scheme)
    alpha = validate_alpha(alpha, scenario.n_users)
    w = scenario.layout.w
    w1, wk = float(w[0]), float(w[-1])
    if scenario.flight_time(w1, wk) > scenario.horizon * (1.0 + 1e-12):
        raise SolverError("successive hovering needs T >= (w_K - w_1) / V_max")
    hovers = np.unique(w)
    if scheme == "noma":
        sol = noma.solve_p1_fixed_endpoints(w1, wk, alpha, scenario, hover_points=hovers)
    elif scheme == "fdma":
        sol = fdma.solve_p2_fixed_endpoints(w1, wk, alpha, scenario, hover_points=hovers)
    else:
        sol = tdma.solve_p3_fixed_endpoints(0, scenario.grid.n_nodes - 1, alpha, scenario)
    return np.asarray(sol.rates), float(sol.sum_rate)


def _fdma_min_bandwidth(rate: np.ndarray, snr: np.ndarray, iters: int = 80) -> np.ndarray:
    """Smallest ``b`` with ``b log2(1 + snr / b) >= rate`` (``inf`` if ``b = 1`` is short)."""
    lo = np.zeros_like(snr)
    hi = np.ones_like(snr)
    full = np.log2(1.0 + snr)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = mid * np.log2(1.0 + snr / mid) >= rate
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return np.where(rate <= 0, 0.0, np.where(rate > full, np.inf, hi))


def _static_rates(scheme: str, alpha: np.ndarray, snr: np.ndarray):
    """Best common rate and rate tuples of a static UAV at each row of ``snr``."""
    cap = np.log2(1.0 + snr)
    pos = alpha > 0
    n, k = snr.shape
    if scheme == "tdma":
        r_val = 1.0 / np.sum(alpha[pos] / cap[:, pos], axis=1)
        return r_val, r_val[:, None] * alpha[None, :]
    if scheme == "noma":
        r_val = np.full(n, np.inf)
        for size in range(1, k + 1):
            for sub in combinations(range(k), size):
                a_s = alpha[list(sub)].sum()
                if a_s > 0:
                    c_s = np.log2(1.0 + snr[:, list(sub)].sum(axis=1))
                    r_val = np.minimum(r_val, c_s / a_s)
        return r_val, r_val[:, None] * alpha[None, :]
    # fdma: bisection on the common rate with minimal bandwidth per user
    lo = np.zeros(n)
    hi = np.min(cap[:, pos] / alpha[pos], axis=1)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        need = _fdma_min_bandwidth(mid[:, None] * alpha[None, :], snr).sum(axis=1)
        ok = need <= 1.0
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return lo, lo[:, None] * alpha[None, :]


def benchmark_static_hover(scheme: str, alpha, scenario: Scenario):
    """Best single hover location on the location grid.

    Returns
    -------
    rates : numpy.ndarray
    R : float
    x_h : float
    """
    scheme = _check_scheme(scheme)
    alpha = validate_alpha(alpha, scenario.n_users)
    g = scenario.grid
    r_val, tuples = _static_rates(scheme, alpha, g.snr)
    j = int(np.argmax(r_val))
    return tuples[j], float(r_val[j]), float(g.xs[j])


# --------------------------------------------------------------------------
# two-user hover-fly-hover oracle
# --------------------------------------------------------------------------

@dataclass
class HfhOracleResult:
    """Best hover-fly-hover trajectory found by the brute-force oracle.

    Attributes
    ----------
    rate : float
        Common rate.
    x_i, x_f : float
        Initial and final hover locations.
    grid_rate : float
        Best value on the coarse grid before local polishing.
    """

    scheme: str
    alpha: np.ndarray
    rate: float
    x_i: float
    x_f: float
    grid_rate: float


def _max_min_lines(a: np.ndarray, s: np.ndarray, tmax: np.ndarray) -> np.ndarray:
    """``max_{0 <= t <= tmax} min_m (a_m + s_m t)`` row-wise (exact)."""
    m = a.shape[-1]
    cands = [np.zeros_like(tmax), tmax]
    for p, q in combinations(range(m), 2):
        ds = s[..., q] - s[..., p]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(ds != 0, (a[..., p] - a[..., q]) / ds, 0.0)
        cands.append(np.clip(np.nan_to_num(t), 0.0, tmax))
    t = np.stack(cands, axis=-1)
    vals = np.min(a[..., None, :] + s[..., None, :] * t[..., None], axis=-1)
    return vals.max(axis=-1)


class _HfhModel:
    """Exact inner problems of the hover-fly-hover family for two users."""

    def __init__(self, scheme: str, alpha: np.ndarray, scenario: Scenario, panels: int = 64):
        self.scheme = scheme
        self.alpha = alpha
        self.sc = scenario
        self.t = scenario.horizon
        self.v = scenario.v_max
        self.panels = panels
        self.pos = alpha > 0

    # -- channel helpers ---------------------------------------------------
    def snr(self, x):
        return self.sc.snr(np.atleast_1d(x))

    def leg_int(self, fn, x0: float, x1: float) -> float:
        if x1 <= x0:
            return 0.0
        return quadrature(fn, x0, x1, self.panels) / self.v

    # -- NOMA --------------------------------------------------------------
    def noma_lines(self, leg: np.ndarray, c_i: np.ndarray, c_f: np.ndarray, t_hat):
        """Lines ``A_S(t_I) / alpha_S`` for the three subset constraints."""
        subsets = [(0,), (1,), (0, 1)]
        a_list, s_list = [], []
        for j, sub in enumerate(subsets):
            a_s = self.alpha[list(sub)].sum()
            if a_s <= 0:
                continue
            a_list.append((leg[..., j] + t_hat * c_f[..., j]) / (self.t * a_s))
            s_list.append((c_i[..., j] - c_f[..., j]) / (self.t * a_s))
        return np.stack(a_list, -1), np.stack(s_list, -1)

    def subset_caps(self, snr: np.ndarray) -> np.ndarray:
        return np.log2(1.0 + np.stack([snr[..., 0], snr[..., 1], snr[..., 0] + snr[..., 1]], -1))

    def noma_value(self, x_i: float, x_f: float) -> float:
        t_hat = self.t - self.sc.flight_time(x_i, x_f)
        leg = np.array([self.leg_int(lambda x, j=j: self.subset_caps(self.snr(x))[:, j], x_i, x_f)
                        for j in range(3)])
        c = self.subset_caps(self.snr([x_i, x_f]))
        a, s = self.noma_lines(leg, c[0], c[1], t_hat)
        return float(_max_min_lines(a[None], s[None], np.array([t_hat]))[0])

    # -- TDMA --------------------------------------------------------------
    def tdma_lines(self, l1, l2, c1_i, c2_f, t_hat):
        """Lines in ``t_I`` for user 1 (hovering at x_I) and user 2 (at x_F)."""
        a_list, s_list = [], []
        if self.pos[0]:
            a_list.append(l1 / (self.t * self.alpha[0]))
            s_list.append(np.broadcast_to(c1_i / (self.t * self.alpha[0]), np.shape(l1)))
        if self.pos[1]:
            a_list.append((l2 + t_hat * c2_f) / (self.t * self.alpha[1]))
            s_list.append(np.broadcast_to(-c2_f / (self.t * self.alpha[1]), np.shape(l2)))
        return np.stack(a_list, -1), np.stack(s_list, -1)

    def tdma_value_at(self, x_i: float, x_f: float, s: float) -> float:
        t_hat = self.t - self.sc.flight_time(x_i, x_f)
        cap = lambda x, k: np.log2(1.0 + self.snr(x)[:, k])  # noqa: E731
        l1 = self.leg_int(lambda x: cap(x, 0), x_i, s)
        l2 = self.leg_int(lambda x: cap(x, 1), s, x_f)
        a, sl = self.tdma_lines(np.array([l1]), np.array([l2]), cap(x_i, 0), cap(x_f, 1), t_hat)
        return float(_max_min_lines(a, sl, np.array([t_hat]))[0])

    def tdma_value(self, x_i: float, x_f: float, scan: int = 256) -> float:
        if x_f <= x_i:
            return self.tdma_value_at(x_i, x_f, x_i)
        ss = np.linspace(x_i, x_f, scan + 1)
        vals = np.array([self.tdma_value_at(x_i, x_f, s) for s in ss])
        j = int(np.argmax(vals))
        lo, hi = ss[max(j - 1, 0)], ss[min(j + 1, scan)]
        best = vals[j]
        # golden-section polish of the switch point inside the bracket
        gr = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        c, d = b - gr * (b - a), a + gr * (b - a)
        fc, fd = self.tdma_value_at(x_i, x_f, c), self.tdma_value_at(x_i, x_f, d)
        for _ in range(40):
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - gr * (b - a)
                fc = self.tdma_value_at(x_i, x_f, c)
            else:
                a, c, fc = c, d, fd
                d = a + gr * (b - a)
                fd = self.tdma_value_at(x_i, x_f, d)
        return float(max(best, fc, fd))

    # -- FDMA --------------------------------------------------------------
    def mu_of(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.pos.all():
            return theta / self.alpha[0], (1.0 - theta) / self.alpha[1]
        if self.pos[0]:
            return np.full_like(theta, 1.0 / self.alpha[0]), np.zeros_like(theta)
        return np.zeros_like(theta), np.full_like(theta, 1.0 / self.alpha[1])

    @staticmethod
    def fdma_point(mu1, mu2, s1, s2, iters: int = 64):
        """``max_b mu1 b log2(1+s1/b) + mu2 (1-b) log2(1+s2/(1-b))`` by bisection on the slope."""
        mu1, mu2, s1, s2 = np.broadcast_arrays(mu1, mu2, s1, s2)

        def q(y):
            return np.log1p(y) - y / (1.0 + y)

        lo = np.zeros(mu1.shape)
        hi = np.ones(mu1.shape)
        for _ in range(iters):
            b = 0.5 * (lo + hi)
            # b may round to 1 late in the bisection; the NaN slope then
            # counts as "not increasing", which keeps the bracket valid
            with np.errstate(divide="ignore", invalid="ignore"):
                slope = mu1 * q(s1 / b) - mu2 * q(s2 / (1.0 - b))
            up = slope > 0
            lo = np.where(up, b, lo)
            hi = np.where(up, hi, b)
        b = 0.5 * (lo + hi)
        b = np.where(mu2 == 0, 1.0, np.where(mu1 == 0, 0.0, b))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(b > 0, b * np.log2(1.0 + s1 / b), 0.0)
            r2 = np.where(b < 1, (1.0 - b) * np.log2(1.0 + s2 / (1.0 - b)), 0.0)
        return mu1 * r1 + mu2 * r2

    def fdma_dual(self, theta: float, x_i: float, x_f: float) -> float:
        m1, m2 = self.mu_of(theta)
        t_hat = self.t - self.sc.flight_time(x_i, x_f)
        leg = 0.0
        if x_f > x_i:
            leg = self.leg_int(lambda x: self.fdma_point(m1, m2, *self.snr(x).T), x_i, x_f)
        h = self.fdma_point(m1, m2, *self.snr([x_i, x_f]).T)
        return float((leg + t_hat * np.max(h)) / self.t)

    def fdma_value(self, x_i: float, x_f: float, bracket=(0.0, 1.0)) -> float:
        if not self.pos.all():
            return self.fdma_dual(0.5, x_i, x_f)
        # the dual is convex in theta; golden section finds its minimum
        gr = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = bracket
        c, d = b - gr * (b - a), a + gr * (b - a)
        fc, fd = self.fdma_dual(c, x_i, x_f), self.fdma_dual(d, x_i, x_f)
        for _ in range(50):
            if fc <= fd:
                b, d, fd = d, c, fc
                c = b - gr * (b - a)
                fc = self.fdma_dual(c, x_i, x_f)
            else:
                a, c, fc = c, d, fd
                d = a + gr * (b - a)
                fd = self.fdma_dual(d, x_i, x_f)
        ends = [self.fdma_dual(e, x_i, x_f) for e in bracket]
        return float(min(fc, fd, *ends))

    def value(self, x_i: float, x_f: float) -> float:
        if self.scheme == "noma":
            return self.noma_value(x_i, x_f)
        if self.scheme == "tdma":
            return self.tdma_value(x_i, x_f)
        return self.fdma_value(x_i, x_f)


def _oracle_grid_values(model: _HfhModel, u: np.ndarray, fine: int) -> np.ndarray:
    """Coarse-grid HFH values for every end-point pair (``-inf`` if infeasible)."""
    sc = model.sc
    n = u.size
    t = model.t
    if n > 1:
        z = np.linspace(u[0], u[-1], (n - 1) * fine + 1)
    else:
        z = u.copy()
    snr_z = sc.snr(z)
    node = np.arange(n) * fine
    dist = u[None, :] - u[:, None]
    if model.v > 0:
        flight = np.where(dist >= 0, dist / model.v, np.inf)
    else:
        flight = np.where(dist == 0, 0.0, np.inf)
    feasible = (dist >= 0) & (flight <= t * (1.0 + 1e-12))
    t_hat = np.where(feasible, t - np.where(np.isfinite(flight), flight, 0.0), 0.0)
    out = np.full((n, n), -np.inf)
    ii, jj = np.nonzero(feasible)

    def cum(vals):
        if z.size < 2:
            return np.zeros_like(vals)
        return cumulative_trapezoid(vals, z, axis=0, initial=0.0)

    def leg(c_cum):
        d = c_cum[node[jj]] - c_cum[node[ii]]
        return d / model.v if model.v > 0 else np.zeros_like(d)

    if model.scheme == "noma":
        caps = model.subset_caps(snr_z)
        cc = cum(caps)
        a, s = model.noma_lines(leg(cc), caps[node[ii]], caps[node[jj]], t_hat[ii, jj])
        out[ii, jj] = _max_min_lines(a, s, t_hat[ii, jj])
        return out

    if model.scheme == "tdma":
        cap = np.log2(1.0 + snr_z)
        cc = cum(cap)
        stride = max(1, fine // 8)
        for i in range(n):
            sel = jj[ii == i]
            if sel.size == 0:
                continue
            s_idx = np.arange(node[i], node[sel.max()] + 1, stride)
            j_nodes = node[sel]
            valid = s_idx[None, :] <= j_nodes[:, None]
            l1 = (cc[s_idx, 0] - cc[node[i], 0])[None, :] / model.v if model.v > 0 else np.zeros((1, s_idx.size))
            l2 = (cc[j_nodes, 1][:, None] - cc[s_idx, 1][None, :]) / model.v if model.v > 0 else np.zeros((sel.size, s_idx.size))
            l1 = np.broadcast_to(l1, l2.shape)
            th = np.broadcast_to(t_hat[i, sel][:, None], l2.shape)
            a, s = model.tdma_lines(l1, l2, cap[node[i], 0], cap[j_nodes, 1][:, None], th)
            vals = _max_min_lines(a, s, th)
            out[i, sel] = np.where(valid, vals, -np.inf).max(axis=1)
        return out

    # fdma: minimum over a theta grid bounds each pair's value from above
    thetas = np.linspace(0.0, 1.0, 101) if model.pos.all() else np.array([0.5])
    m1, m2 = model.mu_of(thetas)
    best = np.full(ii.size, np.inf)
    for th_m1, th_m2 in zip(m1, m2):
        g = model.fdma_point(th_m1, th_m2, snr_z[:, 0], snr_z[:, 1])
        gc = cum(g)
        d = gc[node[jj]] - gc[node[ii]]
        lg = d / model.v if model.v > 0 else np.zeros_like(d)
        val = (lg + t_hat[ii, jj] * np.maximum(g[node[ii]], g[node[jj]])) / t
        best = np.minimum(best, val)
    out[ii, jj] = best
    return out


def oracle_two_user_hfh(scheme: str, alpha, scenario: Scenario, grid_points: int = 81,
                        fine: int = 64, top: int = 6, polish: bool = True) -> HfhOracleResult:
    """Brute-force best hover-fly-hover trajectory for two users.

    The UAV hovers at ``x_I``, flies at full speed to ``x_F`` and hovers
    there for the remaining time.  End points are scanned on a uniform grid
    over ``[w_1, w_2]``; the inner problem is solved exactly for each pair:

    * NOMA: the common rate is a minimum of three functions linear in the
      initial hover time, maximised exactly over their breakpoints;
    * TDMA: user 1 transmits before a switch point, user 2 after it; the
      hover split follows in closed form and the switch point is scanned;
    * FDMA: the per-trajectory region is convex, so the common rate equals
      the minimum over one weight parameter of the weighted-sum dual, with
      the per-location bandwidth split found by bisection.

    The best ``top`` grid pairs are re-evaluated with Simpson leg integrals
    and the best one is polished over continuous end points (Nelder-Mead).

    Parameters
    ----------
    scheme : {"noma", "fdma", "tdma"}
    alpha : array_like
        Two-user rate profile.
    scenario : Scenario
        Must have exactly two users.
    grid_points : int, optional
        End-point grid size per axis.
    fine : int, optional
        Sub-intervals per grid interval for the leg integral tables.
    top : int, optional
        Grid pairs re-evaluated exactly.
    polish : bool, optional
        Continuous local refinement of the best pair.

    Returns
    -------
    HfhOracleResult
    """
    scheme = _check_scheme(scheme)
    if scenario.n_users != 2:
        raise ValueError("the hover-fly-hover oracle needs exactly two users")
    alpha = validate_alpha(alpha, 2)
    model = _HfhModel(scheme, alpha, scenario)
    w1, w2 = (float(v) for v in scenario.layout.span)
    u = np.linspace(w1, w2, grid_points) if w2 > w1 else np.array([w1])
    vals = _oracle_grid_values(model, u, fine)
    grid_best = float(np.max(vals))
    order = np.argsort(vals, axis=None)[::-1][:top]
    best = (-np.inf, w1, w1)
    for flat in order:
        i, j = np.unravel_index(flat, vals.shape)
        if not np.isfinite(vals[i, j]):
            continue
        r = model.value(float(u[i]), float(u[j]))
        if r > best[0]:
            best = (r, float(u[i]), float(u[j]))

    if polish and w2 > w1:
        t = scenario.horizon
        v = scenario.v_max

        def feasible(x):
            return (w1 <= x[0] <= x[1] <= w2) and (
                x[1] == x[0] or (v > 0 and (x[1] - x[0]) / v <= t * (1.0 + 1e-12)))

        def neg(x):
            return -model.value(float(x[0]), float(x[1])) if feasible(x) else 1e9

        step = (w2 - w1) / max(grid_points - 1, 1)
        x0 = np.array(best[1:])
        simplex = [x0, x0 + [-step / 2, 0.0], x0 + [0.0, step / 2]]
        simplex = [np.clip(p, w1, w2) for p in simplex]
        if all(feasible(p) for p in simplex) and len({tuple(p) for p in simplex}) == 3:
            res = minimize(neg, x0, method="Nelder-Mead",
                           options={"initial_simplex": np.array(simplex), "xatol": 1e-3,
                                    "fatol": 1e-10, "maxiter": 200})
            if -res.fun > best[0] and feasible(res.x):
                best = (float(-res.fun), float(res.x[0]), float(res.x[1]))

    return HfhOracleResult(scheme, alpha, float(best[0]), best[1], best[2], grid_best)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

def chord_convexity_violation(boundary: RegionBoundary) -> float:
    """Largest amount by which a chord between two boundary points pokes out.

    For every pair of two-user boundary points and every profile direction
    between them, the chord's intersection with that direction is compared
    with the boundary point solved for it.  A convex region gives values
    ``<= 0`` (up to solver accuracy).
    """
    pts = sorted(boundary.points, key=lambda p: p.alpha[0])
    if pts and len(pts[0].alpha) != 2:
        raise ValueError("chord test is defined for two-user boundaries")
    worst = -np.inf
    for a in range(len(pts)):
        for b in range(a + 2, len(pts)):
            p, q = pts[a].rates, pts[b].rates
            for m in range(a + 1, b):
                d = pts[m].alpha
                den = (q[0] - p[0]) * d[1] - (q[1] - p[1]) * d[0]
                if den == 0:
                    continue
                lam = (q[0] * d[1] - q[1] * d[0]) / den
                if not 0.0 <= lam <= 1.0:
                    continue
                point = lam * p + (1.0 - lam) * q
                r_chord = float(point.sum())
                worst = max(worst, r_chord - pts[m].rate)
    return float(worst) if np.isfinite(worst) else 0.0


def _weighted_hover_values(sol, scenario: Scenario, xs: np.ndarray) -> np.ndarray:
    """The scheme's weighted hover objective at the final multipliers."""
    w = np.asarray(sol.dual.weights, dtype=float)
    x_i, x_f = sol.shf.x_initial, sol.shf.x_final
    if sol.scheme == "noma":
        return noma._free_cell(scenario, x_i, x_f, hover_x=xs).psi(w)
    if sol.scheme == "fdma":
        return fdma._free_cell(scenario, x_i, x_f, hover_x=xs).weighted_hover(w)
    return (np.log2(1.0 + scenario.snr(xs)) * w).max(axis=1)


def hover_location_groups(sol, scenario: Scenario, tol: float | None = None) -> list[list[float]]:
    """Group a solution's hover points into hover locations.

    Neighbouring hover points with positive dwell time belong to the same
    location when the weighted hover objective at the final multipliers stays
    within ``tol`` of its maximum everywhere between them, i.e. when they sit
    in one near-tie cluster of the dual maximisers.  A location that the
    discrete search splits over adjacent grid nodes thus counts once, while
    maximisers separated by a dip larger than ``tol`` stay apart.  For TDMA,
    whose hover spots are fixed per user, every distinct spot is a location.

    Parameters
    ----------
    sol : NomaSolution, FdmaSolution or TdmaSolution
    scenario : Scenario
    tol : float, optional
        Absolute near-tie tolerance; defaults to ``settings.near_tie_tol``.

    Returns
    -------
    list of list of float
        Hover points per location, in flight order.
    """
    tol = scenario.settings.near_tie_tol if tol is None else float(tol)
    shf = sol.shf
    pts = sorted({float(p) for p, d in zip(shf.hover_points, shf.hover_durations) if d > 0})
    if len(pts) <= 1 or sol.scheme == "tdma":
        return [[p] for p in pts]
    n = scenario.settings.location_intervals
    grid = np.linspace(shf.x_initial, shf.x_final, n + 1)
    xs = np.unique(np.concatenate([grid, pts]))
    vals = _weighted_hover_values(sol, scenario, xs)
    vmax = float(vals.max())
    groups = [[pts[0]]]
    for p, q in zip(pts, pts[1:]):
        between = (xs >= p) & (xs <= q)
        if np.all(vals[between] >= vmax - tol):
            groups[-1].append(q)
        else:
            groups.append([q])
    return groups


def hover_location_count(sol, scenario: Scenario, tol: float | None = None) -> int:
    """Number of hover locations, see :func:`hover_location_groups`."""
    return len(hover_location_groups(sol, scenario, tol))


@dataclass
class NestingReport:
    """Ordering check ``R_TDMA <= R_FDMA <= R_NOMA`` per profile.

    Attributes
    ----------
    rows : list of dict
        Per profile: ``alpha``, the three rates and both margins
        (``fdma - tdma`` and ``noma - fdma``).
    violations : list of dict
        Rows where a margin is below ``-tol``.
    failures : list
        Solver failures ``(scheme, alpha, message)``.
    tol : float
    """

    rows: list
    violations: list
    failures: list
    tol: float

    @property
    def ok(self) -> bool:
        return not self.violations and not self.failures


def region_nesting_report(profiles: Sequence, scenario: Scenario, tol: float = 1e-6,
                          workers: int | None = None) -> NestingReport:
    """Solve all three schemes per profile and check their ordering."""
    sweeps = {s: pareto_sweep(s, profiles, scenario, workers) for s in SCHEMES}
    by = {s: {tuple(p.alpha): p.rate for p in sweeps[s].points} for s in SCHEMES}
    rows, viol, fails = [], [], []
    for s in SCHEMES:
        fails.extend((s, a, m) for a, m in sweeps[s].failures)
    for prof in profiles:
        a = tuple(getattr(prof, "alpha", prof))
        if not all(a in by[s] for s in SCHEMES):
            continue
        row = {"alpha": a, "tdma": by["tdma"][a], "fdma": by["fdma"][a], "noma": by["noma"][a]}
        row["fdma_minus_tdma"] = row["fdma"] - row["tdma"]
        row["noma_minus_fdma"] = row["noma"] - row["fdma"]
        rows.append(row)
        if row["fdma_minus_tdma"] < -tol or row["noma_minus_fdma"] < -tol:
            viol.append(row)
    return NestingReport(rows, viol, fails, tol)
