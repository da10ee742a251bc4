"""One-dimensional UAV trajectories.

Three representations are used:

* :class:`PiecewiseLinearTrajectory` -- a speed-constrained path given by
  ``(time, position)`` breakpoints;
* :class:`MaxSpeedLeg` plus a speed-free part -- the decomposition of any
  unidirectional path into a flight at maximum speed and a "teleporting"
  schedule that visits the same places for the remaining time;
* :class:`ShfTrajectory` -- the successive hover-and-fly structure: fly at
  maximum speed from ``x_initial`` to ``x_final`` and hover at a finite set of
  points on the way.

All three expose ``segments()``, a list of ``(duration, x_start, x_end)``
triples traversed at constant speed, which is what occupation measures and
path integrals need.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = [
    "MaxSpeedLeg",
    "SpeedFreeSchedule",
    "SpeedFreePath",
    "PiecewiseLinearTrajectory",
    "ShfTrajectory",
    "TrajectoryError",
    "decompose",
    "assemble_shf",
    "shf_from_piecewise",
    "occupation_histogram",
    "sample_positions",
]

SPEED_TOL = 1e-9


class TrajectoryError(ValueError):
    """Raised for infeasible or malformed trajectories."""


Segment = tuple[float, float, float]


@dataclass(frozen=True)
class MaxSpeedLeg:
    """Flight from ``x_start`` to ``x_end`` at constant speed ``v_max``.

    Parameters
    ----------
    x_start, x_end : float
        End points in meters, ``x_start <= x_end``.
    v_max : float
        Flight speed in m/s. Zero is allowed only for a degenerate leg.
    """

    x_start: float
    x_end: float
    v_max: float

    def __post_init__(self):
        if self.x_end < self.x_start:
            raise TrajectoryError("leg must satisfy x_start <= x_end")
        if self.v_max < 0:
            raise TrajectoryError("v_max must be nonnegative")
        if self.v_max == 0 and self.x_end != self.x_start:
            raise TrajectoryError("a UAV with v_max = 0 cannot fly a leg")

    @property
    def duration(self) -> float:
        """Flight time ``(x_end - x_start) / v_max``."""
        if self.x_end == self.x_start:
            return 0.0
        return (self.x_end - self.x_start) / self.v_max

    def position(self, t):
        """Position at time ``t`` in ``[0, duration]``."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        return self.x_start + self.v_max * t

    def segments(self) -> list[Segment]:
        if self.duration == 0.0:
            return []
        return [(self.duration, self.x_start, self.x_end)]


@dataclass(frozen=True)
class SpeedFreeSchedule:
    """Hover points and dwell times of a speed-free trajectory.

    Parameters
    ----------
    hover_points : sequence of float
        Strictly increasing hover coordinates.
    hover_durations : sequence of float
        Nonnegative dwell times, one per point.
    """

    hover_points: tuple
    hover_durations: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.hover_points)
        durs = tuple(float(d) for d in self.hover_durations)
        object.__setattr__(self, "hover_points", pts)
        object.__setattr__(self, "hover_durations", durs)
        if len(pts) != len(durs):
            raise TrajectoryError("one duration per hover point is required")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise TrajectoryError("hover points must be strictly increasing")
        if any(d < 0 for d in durs):
            raise TrajectoryError("hover durations must be nonnegative")

    @property
    def total(self) -> float:
        """Total speed-free time ``T_hat``."""
        return float(sum(self.hover_durations))

    def segments(self) -> list[Segment]:
        return [(d, p, p) for p, d in zip(self.hover_points, self.hover_durations) if d > 0]


@dataclass(frozen=True)
class SpeedFreePath:
    """General speed-free trajectory: constant-speed pieces without continuity.

    Produced by :func:`decompose`; pieces may have any speed and consecutive
    pieces need not join (the UAV "teleports").
    """

    pieces: tuple

    @property
    def total(self) -> float:
        return float(sum(p[0] for p in self.pieces))

    def segments(self) -> list[Segment]:
        return [tuple(map(float, p)) for p in self.pieces if p[0] > 0]


@dataclass(frozen=True)
class PiecewiseLinearTrajectory:
    """Continuous trajectory defined by ``(time, position)`` breakpoints.

    Parameters
    ----------
    breakpoints : sequence of (float, float)
        Times strictly increasing from 0.
    """

    breakpoints: tuple

    def __post_init__(self):
        bp = tuple((float(t), float(x)) for t, x in self.breakpoints)
        object.__setattr__(self, "breakpoints", bp)
        if len(bp) < 2:
            raise TrajectoryError("at least two breakpoints are required")
        if bp[0][0] != 0.0:
            raise TrajectoryError("trajectories start at t = 0")
        if any(b[0] <= a[0] for a, b in zip(bp, bp[1:])):
            raise TrajectoryError("breakpoint times must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.breakpoints])

    @property
    def positions(self) -> np.ndarray:
        return np.array([x for _, x in self.breakpoints])

    @property
    def horizon(self) -> float:
        return self.breakpoints[-1][0]

    def position(self, t):
        """Linear interpolation of the position at time(s) ``t``."""
        return np.interp(t, self.times, self.positions)

    def speeds(self) -> np.ndarray:
        """Per-segment signed speed."""
        return np.diff(self.positions) / np.diff(self.times)

    def segments(self) -> list[Segment]:
        return [
            (t1 - t0, x0, x1)
            for (t0, x0), (t1, x1) in zip(self.breakpoints, self.breakpoints[1:])
        ]

    def is_speed_feasible(self, v_max: float) -> bool:
        return bool(np.all(np.abs(self.speeds()) <= v_max * (1.0 + SPEED_TOL)))


@dataclass(frozen=True)
class ShfTrajectory:
    """Successive hover-and-fly trajectory.

    The UAV hovers at ``hover_points[0]`` for ``hover_durations[0]``, flies at
    ``v_max`` to the next point, and so on, starting at ``x_initial`` and
    ending at ``x_final``.
    """

    x_initial: float
    x_final: float
    hover_points: tuple
    hover_durations: tuple
    v_max: float
    horizon: float

    def __post_init__(self):
        pts = tuple(float(p) for p in self.hover_points)
        durs = tuple(float(d) for d in self.hover_durations)
        object.__setattr__(self, "hover_points", pts)
        object.__setattr__(self, "hover_durations", durs)
        if len(pts) != len(durs):
            raise TrajectoryError("one duration per hover point is required")
        if self.x_final < self.x_initial:
            raise TrajectoryError("SHF trajectories are unidirectional (x_initial <= x_final)")
        seq = (self.x_initial,) + pts + (self.x_final,)
        if any(b < a for a, b in zip(seq, seq[1:])):
            raise TrajectoryError("hover points must be sorted within [x_initial, x_final]")
        if any(d < 0 for d in durs):
            raise TrajectoryError("hover durations must be nonnegative")
        flight = self.flight_time
        if abs(sum(durs) + flight - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise TrajectoryError(
                f"hover time {sum(durs)!r} plus flight time {flight!r} "
                f"does not match the horizon {self.horizon!r}"
            )

    @property
    def flight_time(self) -> float:
        return MaxSpeedLeg(self.x_initial, self.x_final, self.v_max).duration

    @property
    def leg(self) -> MaxSpeedLeg:
        """The maximum-speed part of the trajectory."""
        return MaxSpeedLeg(self.x_initial, self.x_final, self.v_max)

    @property
    def speed_free(self) -> SpeedFreeSchedule:
        """The hovering part, with coincident points merged."""
        merged: dict[float, float] = {}
        for p, d in zip(self.hover_points, self.hover_durations):
            merged[p] = merged.get(p, 0.0) + d
        pts = sorted(merged)
        return SpeedFreeSchedule(tuple(pts), tuple(merged[p] for p in pts))

    @property
    def n_hover(self) -> int:
        """Number of distinct hover points with positive dwell time."""
        return len({p for p, d in zip(self.hover_points, self.hover_durations) if d > 0})

    def to_piecewise(self) -> PiecewiseLinearTrajectory:
        """Breakpoint form; zero-duration hovers are omitted."""
        bps = [(0.0, self.x_initial)]
        t, x = 0.0, self.x_initial
        # flights shorter than the float resolution of the track are jumps
        tiny = 1e-9 * max(1.0, abs(self.x_initial), abs(self.x_final))

        def fly_to(p):
            nonlocal t, x
            if p - x <= tiny:
                bps[-1] = (bps[-1][0], p)
            else:
                t += (p - x) / self.v_max
                bps.append((t, p))
            x = p

        for p, d in zip(self.hover_points, self.hover_durations):
            if d <= 0:
                continue
            if p > x:
                fly_to(p)
            t += d
            bps.append((t, x))
        if self.x_final > x:
            fly_to(self.x_final)
        # absorb float drift so the path ends exactly at the horizon
        if len(bps) == 1:
            bps.append((self.horizon, self.x_initial))
        else:
            bps[-1] = (self.horizon, bps[-1][1])
        return PiecewiseLinearTrajectory(tuple(bps))

    def segments(self) -> list[Segment]:
        return self.to_piecewise().segments()

    def position(self, t):
        return self.to_piecewise().position(t)


def assemble_shf(
    x_i: float,
    x_f: float,
    hover_points: Sequence[float],
    hover_durations: Sequence[float],
    v_max: float,
    horizon: float,
    tol: float = 1e-9,
) -> ShfTrajectory:
    """Build a successive hover-and-fly trajectory.

    Parameters
    ----------
    x_i, x_f : float
        Initial and final locations, ``x_i <= x_f``.
    hover_points, hover_durations : sequence of float
        Hover locations inside ``[x_i, x_f]`` and their dwell times; they are
        sorted, and points closer than ``1e-9`` times the track scale are
        merged.
    v_max : float
        Maximum speed.
    horizon : float
        Total time ``T``.
    tol : float, optional
        Relative tolerance on ``sum(durations) + flight time == horizon``.

    Returns
    -------
    ShfTrajectory

    Raises
    ------
    TrajectoryError
        If the horizon is shorter than the flight time or the durations do
        not fill the remaining time.
    """
    if x_f < x_i:
        raise TrajectoryError("x_i must not exceed x_f")
    if v_max == 0 and x_f != x_i:
        raise TrajectoryError("a UAV with v_max = 0 cannot move")
    flight = 0.0 if x_f == x_i else (x_f - x_i) / v_max
    if horizon < flight * (1.0 - tol):
        raise TrajectoryError(f"horizon {horizon!r} shorter than flight time {flight!r}")
    pts = np.asarray(hover_points, dtype=float)
    durs = np.asarray(hover_durations, dtype=float)
    if pts.shape != durs.shape:
        raise TrajectoryError("one duration per hover point is required")
    if np.any(pts < x_i - 1e-12) or np.any(pts > x_f + 1e-12):
        raise TrajectoryError("hover points must lie inside [x_i, x_f]")
    pts = np.clip(pts, x_i, x_f)
    order = np.argsort(pts, kind="stable")
    # points closer than float resolution of the track length are one point
    merge_tol = 1e-9 * max(1.0, abs(x_i), abs(x_f))
    merged: dict[float, float] = {}
    last = None
    for p, d in zip(pts[order], durs[order]):
        p = float(p)
        if last is not None and p - last <= merge_tol:
            p = last
        merged[p] = merged.get(p, 0.0) + float(d)
        last = p
    keys = sorted(merged)
    return ShfTrajectory(x_i, x_f, tuple(keys), tuple(merged[k] for k in keys),
                         v_max, horizon)


def shf_from_piecewise(traj: PiecewiseLinearTrajectory, v_max: float) -> ShfTrajectory:
    """Recover the SHF description of a hover-and-fly breakpoint path."""
    pts, durs = [], []
    xs = traj.positions
    tiny = 1e-9 * max(1.0, float(np.max(np.abs(xs))))
    for dur, x0, x1 in traj.segments():
        if abs(x1 - x0) <= tiny:
            pts.append(x1)
            durs.append(dur)
        elif abs(abs(x1 - x0) / dur - v_max) > SPEED_TOL * v_max:
            raise TrajectoryError("not a hover-and-fly path: speed strictly between 0 and v_max")
    return assemble_shf(float(xs[0]), float(xs[-1]), pts, durs, v_max, traj.horizon)


def _check_unidirectional(traj: PiecewiseLinearTrajectory, v_max: float) -> None:
    xs = traj.positions
    if np.any(np.diff(xs) < 0):
        raise TrajectoryError("trajectory is not unidirectional (positions must be nondecreasing)")
    if not traj.is_speed_feasible(v_max):
        raise TrajectoryError("trajectory violates the maximum speed")


def decompose(
    traj: PiecewiseLinearTrajectory,
    v_max: float,
    n_subperiods: int | None = None,
) -> tuple[MaxSpeedLeg, SpeedFreePath]:
    """Split a unidirectional path into a max-speed leg and a speed-free part.

    Each constant-speed piece of duration ``delta`` covering ``[a, b]`` is
    split into ``(b - a) / v_max`` seconds of maximum-speed flight (these
    concatenate into one leg from ``x_initial`` to ``x_final``) and the
    remaining time spent sweeping ``[a, b]`` at the lower speed that fills it.
    Both parts visit every location for the same total time as the original,
    so any time integral of a function of position is preserved.

    Parameters
    ----------
    traj : PiecewiseLinearTrajectory
        Nondecreasing, speed-feasible trajectory.
    v_max : float
        Maximum speed.
    n_subperiods : int, optional
        Number of equal sub-periods; pieces are split at their boundaries.
        Defaults to the number of breakpoint segments (no extra splitting,
        which is already exact for piecewise-linear paths).

    Returns
    -------
    leg : MaxSpeedLeg
    speed_free : SpeedFreePath
        Its total equals ``T - leg.duration``.
    """
    _check_unidirectional(traj, v_max)
    times = traj.times
    if n_subperiods is not None and n_subperiods > len(times) - 1:
        grid = np.linspace(0.0, traj.horizon, n_subperiods + 1)
        times = np.union1d(times, grid)
    xs = traj.position(times)
    xs = np.maximum.accumulate(xs)
    pieces = []
    for t0, t1, a, b in zip(times[:-1], times[1:], xs[:-1], xs[1:]):
        delta = Fraction(float(t1)) - Fraction(float(t0))
        if b > a:
            if v_max <= 0:
                raise TrajectoryError("trajectory moves but v_max = 0")
            flight = Fraction(float(b)) - Fraction(float(a))
            dbar = flight / Fraction(float(v_max))
        else:
            dbar = Fraction(0)
        dhat = delta - dbar
        if dhat < 0:
            if float(-dhat) > SPEED_TOL * float(delta):
                raise TrajectoryError("trajectory violates the maximum speed")
            dhat = Fraction(0)
        if dhat > 0:
            pieces.append((float(dhat), float(a), float(b)))
    x0, x1 = float(xs[0]), float(xs[-1])
    leg = MaxSpeedLeg(x0, x1, float(v_max) if x1 > x0 else max(float(v_max), 0.0))
    return leg, SpeedFreePath(tuple(pieces))


def occupation_histogram(
    traj,
    bin_width: float,
    origin: float | None = None,
    n_bins: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Time spent by a trajectory in each position bin.

    Parameters
    ----------
    traj : object with ``segments()``
        Any trajectory representation of this module (or a list of such,
        whose occupations are added).
    bin_width : float
        Bin width in meters.
    origin : float, optional
        Left edge of the first bin; defaults to the minimum position.
    n_bins : int, optional
        Number of bins; defaults to covering the maximum position.

    Returns
    -------
    edges : numpy.ndarray
        ``n_bins + 1`` bin edges.
    mass : numpy.ndarray
        Seconds spent in each bin; sums to the total duration.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    parts = traj if isinstance(traj, (list, tuple)) else [traj]
    segs = [s for p in parts for s in p.segments()]
    if not segs:
        return np.array([0.0, bin_width]) + (origin or 0.0), np.zeros(1)
    lo = min(min(a, b) for _, a, b in segs)
    hi = max(max(a, b) for _, a, b in segs)
    if origin is None:
        origin = lo
    if n_bins is None:
        n_bins = max(1, int(np.ceil((hi - origin) / bin_width - 1e-12)))
        if origin + n_bins * bin_width <= hi:
            n_bins += 1
    edges = origin + bin_width * np.arange(n_bins + 1)
    mass = np.zeros(n_bins)
    for dur, a, b in segs:
        if a == b:
            k = int(np.clip(np.searchsorted(edges, a, side="right") - 1, 0, n_bins - 1))
            mass[k] += dur
            continue
        lo_s, hi_s = min(a, b), max(a, b)
        overlap = np.clip(np.minimum(edges[1:], hi_s) - np.maximum(edges[:-1], lo_s), 0.0, None)
        mass += dur * overlap / (hi_s - lo_s)
    return edges, mass


def sample_positions(traj, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``(t, x)`` on a uniform time grid that includes the horizon."""
    if step <= 0:
        raise ValueError("step must be positive")
    pw = traj.to_piecewise() if hasattr(traj, "to_piecewise") else traj
    horizon = pw.horizon
    n = int(np.floor(horizon / step + 1e-9))
    t = step * np.arange(n + 1)
    if t[-1] < horizon - 1e-9 * max(1.0, horizon):
        t = np.append(t, horizon)
    return t, pw.position(t)

