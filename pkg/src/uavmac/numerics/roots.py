"""Bracketed root finding."""

from __future__ import annotations

from typing import Callable

__all__ = ["bisect", "NoSignChangeError"]


class NoSignChangeError(ValueError):
    """Raised when a bracket does not enclose a sign change."""


def bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Find a root of a monotone function by bisection.

    Parameters
    ----------
    f : callable
        Scalar function with a sign change on ``[lo, hi]``.
    lo, hi : float
        Bracket end points.
    tol : float, optional
        Width of the final bracket (absolute, on the argument).
    max_iter : int, optional
        Iteration cap; reached only for ``tol`` below float resolution.

    Returns
    -------
    float
        Midpoint of the final bracket.

    Raises
    ------
    NoSignChangeError
        If ``f(lo)`` and ``f(hi)`` share a strict sign.
    """
    if lo > hi:
        lo, hi = hi, lo
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise NoSignChangeError(
            f"no sign change on [{lo!r}, {hi!r}]: f(lo)={flo!r}, f(hi)={fhi!r}"
        )
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0.0) == (flo > 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)
