"""One-dimensional exhaustive search with near-tie clustering."""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["cluster_maxima", "grid_search_1d"]


def cluster_maxima(values: np.ndarray, tol: float) -> list[int]:
    """Indices of clustered near-maximisers of sampled values.

    Every sample within ``tol`` of the maximum is selected; runs of
    consecutive selected samples are merged into a single representative
    (the best sample of the run, earliest on ties).

    Parameters
    ----------
    values : numpy.ndarray
        Samples on an ordered grid.
    tol : float
        Near-tie tolerance (absolute, same units as ``values``).

    Returns
    -------
    list of int
        Representative indices in ascending order.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    vmax = values.max()
    sel = values >= vmax - tol
    idx = np.flatnonzero(sel)
    # split into runs of consecutive indices
    breaks = np.flatnonzero(np.diff(idx) > 1) + 1
    reps = []
    for run in np.split(idx, breaks):
        reps.append(int(run[np.argmax(values[run])]))
    return reps


def grid_search_1d(
    f: Callable,
    lo: float,
    hi: float,
    step: float,
    near_tie_tol: float = 1e-6,
) -> tuple[float, list[float]]:
    """Exhaustive search of ``f`` on a uniform grid over ``[lo, hi]``.

    Parameters
    ----------
    f : callable
        Scalar or vectorised objective.
    lo, hi : float
        Search interval, ``lo <= hi``.
    step : float
        Grid spacing; the grid always contains both end points.
    near_tie_tol : float, optional
        Grid values within this distance of the maximum are maximisers.

    Returns
    -------
    max_value : float
        Best sampled value.
    maximizers : list of float
        Clustered maximiser locations, sorted ascending.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    n = max(int(np.ceil((hi - lo) / step - 1e-12)), 0)
    xs = np.linspace(lo, hi, n + 1) if n > 0 else np.array([lo])
    try:
        vals = np.asarray(f(xs), dtype=float)
        if vals.shape != xs.shape:
            raise ValueError
    except Exception:
        vals = np.array([float(f(x)) for x in xs])
    reps = cluster_maxima(vals, near_tie_tol)
    return float(vals.max()), [float(xs[i]) for i in reps]
