"""Deterministic JSON / CSV emission and re-validation of emitted solutions.

Every float is written with 12 significant digits.  A solution document holds
the trajectory (end points, hover points, dwell times) and the scheme's
resource schedule; :func:`rates_from_document` re-evaluates the average rates
from those numbers alone, by direct quadrature, so an emitted file can be
checked without the solver.

CSV column contracts
--------------------
trajectory CSV
    ``t, x``: time in seconds and UAV position in meters.  Rows are a uniform
    time grid merged with every trajectory breakpoint.
schedule CSV
    ``t, x, phase, u1..uK`` where ``phase`` is ``hover`` or ``fly``.  The
    per-user columns are the scheme's resource at that instant: the
    instantaneous rate in bps/Hz under the time-shared decoding orders
    (NOMA), the bandwidth fraction (FDMA), or the transmit-slot indicator
    (TDMA).  While several strategies are time-shared at one location the
    shares are averaged (for TDMA: each user's share of the hover time
    there).
region CSV
    ``alpha1..alphaK, r1..rK, R``: one boundary point per rate profile.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from types import SimpleNamespace
from typing import Any

import numpy as np

from .experiments import hover_location_count
from .fdma import FdmaSolution, allocate_bandwidth, validate_fdma_solution
from .noma import NomaSolution, _vertex_from_table, validate_noma_solution
from .scenario import Scenario, subset_capacity_table
from .tdma import TdmaSolution, validate_tdma_solution
from .trajectory import MaxSpeedLeg, ShfTrajectory, sample_positions

__all__ = [
    "SIG_DIGITS",
    "fmt",
    "round_sig",
    "solution_to_document",
    "rates_from_document",
    "check_document",
    "write_json",
    "write_csv",
    "trajectory_rows",
    "schedule_rows",
    "region_rows",
]

#: Significant digits of every emitted float.
SIG_DIGITS = 12


def fmt(v: float) -> str:
    """Format a float with :data:`SIG_DIGITS` significant digits."""
    return f"{float(v):.{SIG_DIGITS}g}"


def round_sig(obj: Any) -> Any:
    """Recursively round floats (and numpy scalars/arrays) for emission."""
    if isinstance(obj, dict):
        return {k: round_sig(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return round_sig(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if not math.isfinite(v) else float(fmt(v))
    return obj


def _trajectory_doc(shf: ShfTrajectory) -> dict:
    return {
        "x_initial": shf.x_initial,
        "x_final": shf.x_final,
        "hover_points": list(shf.hover_points),
        "hover_durations": list(shf.hover_durations),
        "v_max": shf.v_max,
        "horizon": shf.horizon,
    }


def solution_to_document(sol, scenario: Scenario) -> dict:
    """JSON-ready description of a solution.

    Parameters
    ----------
    sol : NomaSolution, FdmaSolution or TdmaSolution
    scenario : Scenario

    Returns
    -------
    dict
        Keys ``scheme, alpha, R, rates, dual, dual_value, duality_gap,
        n_hover, n_hover_locations, trajectory, schedule``, floats rounded to
        12 digits.  ``n_hover_locations`` counts near-tie clusters of hover
        points (:func:`~uavmac.experiments.hover_location_groups`).
    """
    doc = {
        "scheme": sol.scheme,
        "alpha": sol.alpha,
        "R": sol.sum_rate,
        "rates": sol.rates,
        "dual": np.asarray(sol.dual.weights),
        "dual_value": sol.dual_value,
        "duality_gap": sol.duality_gap,
        "n_hover": sol.n_hover,
        "n_hover_locations": hover_location_count(sol, scenario),
        "trajectory": _trajectory_doc(sol.shf),
    }
    if isinstance(sol, NomaSolution):
        hs = sol.hover_set
        doc["schedule"] = {
            "orders": [list(o) for o in hs.orders],
            "leg_shares": hs.leg_shares,
            "hover_points": list(hs.hover_points),
            "shares": hs.shares,
        }
    elif isinstance(sol, FdmaSolution):
        doc["schedule"] = {
            "leg_weights": [np.asarray(w) for w in sol.leg_weights],
            "leg_shares": sol.leg_shares,
            "hover_points": list(sol.hover_points),
            "kappa": sol.kappa,
            "allocation_weights": [np.asarray(w) for w in sol.allocation_weights],
            "hover_bandwidth": sol.hover_allocations(scenario),
        }
    elif isinstance(sol, TdmaSolution):
        doc["schedule"] = {
            "segments": [[t0, t1, int(k)] for t0, t1, k in sol.schedule.segments],
            "hover_durations": sol.schedule.hover_durations,
            "hover_locations": (scenario.layout.w if sol.schedule.hover_locations is None
                                else sol.schedule.hover_locations),
        }
    else:
        raise TypeError(f"unsupported solution type {type(sol).__name__}")
    return round_sig(doc)


def _shf_of(doc: dict) -> SimpleNamespace:
    tr = doc["trajectory"]
    return SimpleNamespace(leg=MaxSpeedLeg(tr["x_initial"], tr["x_final"], tr["v_max"]))


def rates_from_document(doc: dict, scenario: Scenario) -> np.ndarray:
    """Re-evaluate average rates from an emitted solution document."""
    sch = doc["schedule"]
    shf = _shf_of(doc)
    if doc["scheme"] == "noma":
        hs = SimpleNamespace(
            hover_points=sch["hover_points"],
            orders=[tuple(o) for o in sch["orders"]],
            shares=np.asarray(sch["shares"], dtype=float).reshape(len(sch["hover_points"]),
                                                                  len(sch["orders"])),
            leg_shares=np.asarray(sch["leg_shares"], dtype=float),
        )
        return validate_noma_solution(SimpleNamespace(shf=shf, hover_set=hs), scenario)
    if doc["scheme"] == "fdma":
        sol = SimpleNamespace(
            shf=shf,
            leg_shares=sch["leg_shares"],
            leg_weights=[np.asarray(w, dtype=float) for w in sch["leg_weights"]],
            hover_points=sch["hover_points"],
            kappa=sch["kappa"],
            allocation_weights=[np.asarray(w, dtype=float) for w in sch["allocation_weights"]],
        )
        return validate_fdma_solution(sol, scenario)
    if doc["scheme"] == "tdma":
        sched = SimpleNamespace(segments=[(a, b, int(k)) for a, b, k in sch["segments"]],
                                hover_durations=np.asarray(sch["hover_durations"], dtype=float),
                                hover_locations=np.asarray(sch["hover_locations"], dtype=float))
        return validate_tdma_solution(SimpleNamespace(shf=shf, schedule=sched), scenario)
    raise ValueError(f"unknown scheme {doc['scheme']!r}")


def check_document(doc: dict, scenario: Scenario, tol: float = 1e-6) -> tuple[bool, float]:
    """Check that an emitted document reproduces its claimed ``R``.

    Returns
    -------
    ok : bool
        Whether the recomputed common rate ``min_k r_k / alpha_k`` matches
        ``doc["R"]`` within ``tol``.
    recomputed : float
    """
    r = rates_from_document(doc, scenario)
    alpha = np.asarray(doc["alpha"], dtype=float)
    pos = alpha > 0
    value = float(np.min(r[pos] / alpha[pos]))
    return abs(value - doc["R"]) <= tol, value


def write_json(path, obj) -> None:
    """Write ``obj`` (rounded) as pretty, key-sorted JSON."""
    Path(path).write_text(json.dumps(round_sig(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header: list[str], rows) -> None:
    """Write rows, formatting floats with :func:`fmt`."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _times(shf: ShfTrajectory, step: float) -> np.ndarray:
    t, _ = sample_positions(shf, step)
    bps = [b[0] for b in shf.to_piecewise().breakpoints]
    return np.unique(np.concatenate([t, bps]))


def trajectory_rows(shf: ShfTrajectory, step: float = 0.5) -> list[list[float]]:
    """``(t, x)`` rows of the trajectory CSV."""
    t = _times(shf, step)
    x = shf.position(t)
    return [[float(a), float(b)] for a, b in zip(t, x)]


def _phase_at(shf: ShfTrajectory, t: float):
    """``("hover", x)`` or ``("fly", x)`` at time ``t`` (hover wins at joints)."""
    x = float(shf.position(t))
    start = 0.0
    for dur, x0, x1 in shf.segments():
        end = start + dur
        if x0 == x1 and start - 1e-9 <= t <= end + 1e-9 and dur > 0:
            return "hover", x0
        start = end
    return "fly", x


def schedule_rows(sol, scenario: Scenario, step: float = 0.5) -> list[list]:
    """Rows of the schedule CSV (see the module docstring)."""
    shf = sol.shf
    rows = []
    for t in _times(shf, step):
        phase, x = _phase_at(shf, float(t))
        rows.append([float(t), float(x), phase] + list(_resource(sol, scenario, phase, x)))
    return rows


def _resource(sol, scenario: Scenario, phase: str, x: float) -> np.ndarray:
    k = scenario.n_users
    if isinstance(sol, TdmaSolution):
        u = np.zeros(k)
        if phase == "hover":
            sched = sol.schedule
            spots = scenario.layout.w if sched.hover_locations is None else sched.hover_locations
            here = (np.abs(np.asarray(spots) - x) <= 1e-9 * max(1.0, abs(x))) & (sched.hover_durations > 0)
            if here.any():
                u[here] = sched.hover_durations[here] / sched.hover_durations[here].sum()
        else:
            leg = sol.shf.leg
            lt = (x - leg.x_start) / leg.v_max if leg.v_max > 0 else 0.0
            for t0, t1, user in sol.schedule.segments:
                if t0 - 1e-12 <= lt <= t1 + 1e-12:
                    u[user] = 1.0
                    break
        return u
    if isinstance(sol, FdmaSolution):
        snr = scenario.snr([x])
        if phase == "hover":
            idx = [i for i, p in enumerate(sol.hover_points) if abs(p - x) <= 1e-9 * max(1.0, abs(x))]
            if idx:
                wts = np.array([sol.kappa[i] for i in idx])
                bs = [allocate_bandwidth(snr, sol.allocation_weights[i], scenario.horizon)[0][0]
                      for i in idx]
                return np.average(bs, axis=0, weights=wts)
        shares = np.asarray(sol.leg_shares, dtype=float)
        bs = [allocate_bandwidth(snr, w, scenario.horizon)[0][0] for w in sol.leg_weights]
        return np.average(bs, axis=0, weights=shares)
    if isinstance(sol, NomaSolution):
        hs = sol.hover_set
        caps = subset_capacity_table(scenario.snr([x]))[:, 0]
        if phase == "hover":
            g = int(np.argmin(np.abs(np.asarray(hs.hover_points) - x)))
            shares = np.asarray(hs.shares[g], dtype=float)
        else:
            shares = np.asarray(hs.leg_shares, dtype=float)
        shares = shares / shares.sum()
        return sum(s * _vertex_from_table(o, caps) for s, o in zip(shares, hs.orders))
    raise TypeError(f"unsupported solution type {type(sol).__name__}")


def region_rows(boundary) -> list[list[float]]:
    """Rows of the region CSV for a :class:`~uavmac.experiments.RegionBoundary`."""
    return boundary.rows()
