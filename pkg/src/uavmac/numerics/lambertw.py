"""Principal branch of the Lambert W function."""

from __future__ import annotations

import numpy as np

__all__ = ["lambert_w0", "BRANCH_POINT"]

#: The branch point ``-1/e`` where ``W0`` equals ``-1``.
BRANCH_POINT = -np.exp(-1.0)

_E = np.e

_SERIES_RADIUS = 1e-3
# coefficients of x^1 .. x^8 in the Taylor series of W0 at the origin
_SERIES = tuple(
    float((-n) ** (n - 1)) / float(np.prod(np.arange(1, n + 1))) for n in range(1, 9)
)


def _series(x: np.ndarray) -> np.ndarray:
    """Horner evaluation of the truncated Taylor series at the origin."""
    acc = np.full(x.shape, _SERIES[-1])
    for c in _SERIES[-2::-1]:
        acc = acc * x + c
    return acc * x


def _initial_guess(x: np.ndarray) -> np.ndarray:
    """Piecewise starting point for Halley's iteration."""
    w = np.empty_like(x)
    near = x < -0.25
    small = (~near) & (x <= 3.0)
    large = x > 3.0

    # series in p = sqrt(2(e x + 1)) around the branch point
    p = np.sqrt(np.maximum(2.0 * (_E * x[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3

    # rational approximation of log1p-type growth near the origin
    xs = x[small]
    w[small] = xs / (1.0 + xs / (2.0 + 0.5 * np.abs(xs))) if xs.size else xs

    lx = np.log(x[large])
    llx = np.log(lx)
    w[large] = lx - llx + llx / lx
    return w


def lambert_w0(x, tol: float = 1e-15, max_iter: int = 64):
    """Evaluate the principal branch ``W0`` of the Lambert W function.

    ``W0(x)`` is the unique ``w >= -1`` with ``w * exp(w) == x``.

    Parameters
    ----------
    x : float or array_like
        Argument(s), each ``>= -1/e``. Values below the branch point by no
        more than ``1e-15`` (float round-off) are clamped onto it.
    tol : float, optional
        Relative step size at which Halley's iteration stops.
    max_iter : int, optional
        Iteration cap.

    Returns
    -------
    float or numpy.ndarray
        ``W0(x)`` with the same shape as ``x``.

    Raises
    ------
    ValueError
        If any argument lies below ``-1/e``.

    Examples
    --------
    >>> float(lambert_w0(np.e))
    1.0
    """
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float)).ravel().copy()
    lowest = xa.min() if xa.size else 0.0
    if np.isnan(lowest):
        raise ValueError("lambert_w0 is undefined for NaN")
    if lowest < BRANCH_POINT - 1e-15:
        raise ValueError("lambert_w0 requires x >= -1/e")
    xa = np.maximum(xa, BRANCH_POINT)

    if np.abs(xa).max(initial=0.0) < _SERIES_RADIUS:
        w = _series(xa)
        return float(w[0]) if scalar else w.reshape(np.shape(x))

    w = _initial_guess(xa)
    # small |x|: the Taylor series sum (-n)^(n-1) x^n / n! truncated after
    # x^8 has relative error below 1e-20 for |x| < 1e-3
    tiny = np.abs(xa) < _SERIES_RADIUS
    w[tiny] = _series(xa[tiny])

    at_branch = xa == BRANCH_POINT
    w[at_branch] = -1.0
    w[xa == 0.0] = 0.0
    frozen = tiny | at_branch | (xa == 0.0)

    # whole-array Halley iterations (cheaper than masking for moderate sizes);
    # an entry is frozen once its step is below ``tol`` or stops shrinking,
    # which happens near the branch point where rounding dominates the step
    prev = np.full(xa.shape, np.inf)
    for _ in range(0 if frozen.all() else max_iter):
        ew = np.exp(w)
        f = w * ew - xa
        wp1 = w + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
            step = np.where((denom != 0.0) & ~frozen, f / denom, 0.0)
        step = np.where(np.isfinite(step), step, 0.0)
        w_new = np.maximum(w - step, -1.0)
        moved = np.abs(w_new - w)
        stalled = moved >= 0.5 * prev
        w = np.where(stalled, w, w_new)
        frozen |= stalled | (moved <= tol * (1.0 + np.abs(w)))
        prev = moved
        if frozen.all():
            break

    return float(w[0]) if scalar else w.reshape(np.shape(x))
