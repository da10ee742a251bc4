"""Problem instance, solver settings and precomputed location tables."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_simpson

from .channel import ChannelParams, UserLayout, single_user_capacity, snr_matrix

__all__ = ["SolverSettings", "Scenario", "LocationGrid", "subset_capacity_table"]


def subset_capacity_table(snr: np.ndarray) -> np.ndarray:
    """Sum capacities of every user subset.

    Parameters
    ----------
    snr : numpy.ndarray
        ``(n, K)`` SNRs at ``n`` locations.

    Returns
    -------
    numpy.ndarray
        ``(2^K, n)`` array whose row ``mask`` holds
        ``log2(1 + sum_{k in mask} snr_k)`` (bit ``k`` of ``mask`` selects
        user ``k``); row 0 is zero.
    """
    snr = np.atleast_2d(snr)
    k = snr.shape[1]
    total = np.zeros((1 << k, snr.shape[0]))
    for mask in range(1, 1 << k):
        low = mask & -mask
        total[mask] = total[mask ^ low] + snr[:, low.bit_length() - 1]
    return np.log2(1.0 + total)


@dataclass(frozen=True)
class SolverSettings:
    """Discretisation and tolerance knobs shared by all solvers.

    Parameters
    ----------
    location_intervals : int
        Intervals of the uniform location grid over ``[w_1, w_K]``; hover
        searches and leg quadrature tables live on this grid.
    endpoint_points : int
        Points per axis of the coarse ``(x_I, x_F)`` search grid (a subset of
        the location grid).
    refine : bool
        Re-search a neighbourhood of the best coarse endpoint pair on a finer
        sub-grid.
    quadrature_panels : int
        Simpson panels used for legs whose end points are off the grid and
        for independent re-evaluation of solutions.
    ellipsoid_tol : float
        Stop when ``sqrt(g^T A g)`` drops below this value.
    ellipsoid_iter_factor : int
        Iteration cap is ``factor * n^2`` for an ``n``-dimensional dual.
    feas_tol : float
        Dual feasibility tolerance of the ellipsoid iterates.
    tie_tol : float
        Relative tolerance for grouping equal dual weights (NOMA orders).
    near_tie_tol : float
        Absolute tolerance of :func:`~uavmac.numerics.grid_search_1d`
        maximiser lists.
    candidate_tol : float
        Relative tolerance used to pick hover candidates for the primal
        time-sharing LP.
    candidate_merge : int
        Hover candidates closer than this many grid steps are merged.
    history : int
        Number of late ellipsoid iterates whose strategies are offered to the
        primal LP in addition to those at the final dual point.
    gap_tol : float
        Target duality gap in bps/Hz.
    all_permutations : bool
        Enumerate every order compatible with dual ties instead of the cyclic
        rotations within each tie group.
    hover_time_tol : float
        Dwell times below ``hover_time_tol * T`` are not counted as hovers.
    """

    location_intervals: int = 400
    endpoint_points: int = 41
    refine: bool = True
    quadrature_panels: int = 256
    ellipsoid_tol: float = 1e-5
    ellipsoid_iter_factor: int = 500
    feas_tol: float = 1e-6
    tie_tol: float = 1e-4
    near_tie_tol: float = 1e-6
    candidate_tol: float = 1e-3
    candidate_merge: int = 2
    history: int = 8
    gap_tol: float = 1e-3
    all_permutations: bool = False
    hover_time_tol: float = 1e-6

    def __post_init__(self):
        if self.location_intervals < 2:
            raise ValueError("location_intervals must be >= 2")
        if self.endpoint_points < 2:
            raise ValueError("endpoint_points must be >= 2")
        for name in ("ellipsoid_tol", "feas_tol", "tie_tol", "near_tie_tol",
                     "candidate_tol", "gap_tol", "hover_time_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.quadrature_panels < 1:
            raise ValueError("quadrature_panels must be >= 1")


@dataclass(frozen=True)
class Scenario:
    """A complete problem instance.

    Parameters
    ----------
    layout : UserLayout
        User positions and UAV altitude.
    channel : ChannelParams
        Channel model parameters.
    v_max : float
        Maximum UAV speed in m/s.
    horizon : float
        Mission duration ``T`` in seconds.
    settings : SolverSettings
        Discretisation and tolerances.
    """

    layout: UserLayout
    channel: ChannelParams = field(default_factory=ChannelParams)
    v_max: float = 20.0
    horizon: float = 100.0
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.v_max < 0:
            raise ValueError("v_max must be nonnegative")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def n_users(self) -> int:
        return self.layout.n_users

    def replace(self, **changes) -> "Scenario":
        """Copy with some fields changed (tables are recomputed lazily)."""
        return dataclasses.replace(self, **changes)

    def with_settings(self, **changes) -> "Scenario":
        return self.replace(settings=dataclasses.replace(self.settings, **changes))

    def flight_time(self, x_i: float, x_f: float) -> float:
        """Time to fly from ``x_i`` to ``x_f`` at maximum speed."""
        if x_f == x_i:
            return 0.0
        if self.v_max == 0:
            return float("inf")
        return abs(x_f - x_i) / self.v_max

    @cached_property
    def grid(self) -> "LocationGrid":
        """Lazily built location tables."""
        return LocationGrid(self)

    def snr(self, xs) -> np.ndarray:
        """SNR matrix ``(len(xs), K)``."""
        return snr_matrix(np.atleast_1d(xs), self.layout, self.channel)

    @cached_property
    def overhead_capacity(self) -> np.ndarray:
        """Single-user capacity of each user with the UAV directly above it."""
        w = self.layout.w
        return np.asarray(single_user_capacity(w, w, self.layout, self.channel))


class LocationGrid:
    """Uniform location grid over ``[w_1, w_K]`` with integral tables.

    Attributes
    ----------
    xs : numpy.ndarray
        Grid nodes.
    step : float
        Node spacing (0 when all users share one position).
    snr : numpy.ndarray
        ``(n, K)`` SNR of each user at each node.
    cap : numpy.ndarray
        ``(n, K)`` single-user capacities ``log2(1 + snr)``.
    cum : numpy.ndarray
        ``(n, K)`` cumulative Simpson integrals of ``cap`` over position.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        w1, wk = scenario.layout.span
        n = scenario.settings.location_intervals if wk > w1 else 0
        self.xs = np.linspace(w1, wk, n + 1)
        self.step = (wk - w1) / n if n else 0.0
        self.snr = scenario.snr(self.xs)
        self.cap = np.log2(1.0 + self.snr)
        self.cum = self._cumulative(self.cap)

    @property
    def n_nodes(self) -> int:
        return self.xs.size

    def _cumulative(self, values: np.ndarray) -> np.ndarray:
        if self.xs.size < 2:
            return np.zeros_like(values)
        if self.xs.size == 2:
            half = 0.5 * self.step * (values[0] + values[1])
            return np.stack([np.zeros_like(half), half])
        return cumulative_simpson(values, dx=self.step, axis=0, initial=0.0)

    @cached_property
    def subset_cap(self) -> np.ndarray:
        """``(2^K, n)`` capacities ``log2(1 + sum_{k in S} snr_k)``; row = bitmask."""
        return subset_capacity_table(self.snr)

    @cached_property
    def subset_cum(self) -> np.ndarray:
        """``(2^K, n)`` cumulative position integrals of :attr:`subset_cap`."""
        return self._cumulative(self.subset_cap.T).T

    def endpoint_indices(self) -> np.ndarray:
        """Grid indices of the coarse endpoint search axis."""
        n = self.xs.size - 1
        if n == 0:
            return np.array([0])
        pts = min(self.scenario.settings.endpoint_points, n + 1)
        return np.unique(np.round(np.linspace(0, n, pts)).astype(int))

    def endpoint_stride(self) -> int:
        idx = self.endpoint_indices()
        return int(np.max(np.diff(idx))) if idx.size > 1 else 1

    def feasible(self, i0: int, i1: int) -> bool:
        """Whether the pair of nodes is a unidirectional, flyable leg."""
        if i1 < i0:
            return False
        if i1 == i0:
            return True
        sc = self.scenario
        return sc.flight_time(self.xs[i0], self.xs[i1]) <= sc.horizon * (1.0 + 1e-12)

    def leg_time_integral(self, cum: np.ndarray, i0: int, i1: int) -> np.ndarray:
        """Time integral over the leg ``xs[i0] -> xs[i1]`` from a cumulative table.

        ``cum`` holds position integrals with the grid along axis 0; the
        result is divided by the flight speed to integrate over time.
        """
        if i1 == i0:
            return np.zeros(cum.shape[1:])
        return (cum[i1] - cum[i0]) / self.scenario.v_max
