"""Composite Simpson quadrature helpers."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import integrate

__all__ = ["quadrature", "simpson_rule", "simpson_weights", "sampled_integral"]


def quadrature(f: Callable, a: float, b: float, panels: int = 256) -> float:
    """Integrate ``f`` over ``[a, b]`` with the composite Simpson rule.

    Parameters
    ----------
    f : callable
        Vectorised integrand accepting a 1D array of abscissae.
    a, b : float
        Integration limits; ``a == b`` yields 0.
    panels : int, optional
        Number of Simpson panels (each panel spans two sub-intervals).

    Returns
    -------
    float
        Approximation of the integral; exact for cubic polynomials.
    """
    if panels < 1:
        raise ValueError("panels must be >= 1")
    if a == b:
        return 0.0
    n = 2 * panels
    t = np.linspace(a, b, n + 1)
    y = np.asarray(f(t), dtype=float)
    if y.ndim == 0:
        y = np.full_like(t, float(y))
    h = (b - a) / n
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def simpson_rule(a: float, b: float, panels: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite Simpson rule on ``[a, b]``.

    ``weights @ f(nodes)`` equals :func:`quadrature` ``(f, a, b, panels)``.
    """
    if panels < 1:
        raise ValueError("panels must be >= 1")
    n = 2 * panels
    nodes = np.linspace(a, b, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return nodes, w * (b - a) / (3.0 * n)


def simpson_weights(n_points: int, dx: float) -> np.ndarray:
    """Weights ``w`` such that ``w @ y`` is Simpson's rule on uniform samples.

    Odd interval counts are handled the same way as
    :func:`scipy.integrate.simpson`, which keeps both code paths consistent.
    """
    if n_points <= 1:
        return np.zeros(max(n_points, 0))
    if n_points == 2:
        return np.array([0.5 * dx, 0.5 * dx])
    return integrate.simpson(np.eye(n_points), dx=dx, axis=0)


def sampled_integral(y: np.ndarray, x: np.ndarray) -> float | np.ndarray:
    """Simpson integral of samples ``y`` on (possibly non-uniform) nodes ``x``."""
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        return np.zeros(y.shape[1:]) if y.ndim > 1 else 0.0
    if len(x) == 2:
        return 0.5 * (x[1] - x[0]) * (y[0] + y[1])
    return integrate.simpson(y, x=x, axis=0)
