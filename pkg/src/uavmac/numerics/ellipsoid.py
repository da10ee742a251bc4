"""Ellipsoid method for nonsmooth convex minimisation with subgradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = ["DualVector", "EllipsoidState", "EllipsoidResult", "ellipsoid_minimize"]

Oracle = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class DualVector:
    """Nonnegative Lagrange multipliers, one per user.

    Parameters
    ----------
    weights : array_like
        Entries ``>= 0``.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("dual weights must be finite and nonnegative")
        object.__setattr__(self, "weights", w)

    def normalized(self, alpha: np.ndarray) -> "DualVector":
        """Rescale so that ``weights @ alpha == 1``."""
        s = float(self.weights @ np.asarray(alpha, dtype=float))
        if s <= 0:
            raise ValueError("weights @ alpha must be positive to normalise")
        return DualVector(self.weights / s)

    def __len__(self) -> int:
        return self.weights.size


@dataclass
class EllipsoidState:
    """Ellipsoid ``{x : (x - c)^T A^{-1} (x - c) <= 1}`` at some iteration."""

    center: np.ndarray
    shape_matrix: np.ndarray
    iteration: int = 0


@dataclass
class EllipsoidResult:
    """Outcome of :func:`ellipsoid_minimize`.

    Attributes
    ----------
    x : numpy.ndarray
        Best feasible iterate found.
    value : float
        Objective at ``x``.
    converged : bool
        ``True`` when the certified optimality bound reached the tolerance.
    stopped_early : bool
        ``True`` when the callback requested termination.
    iterations : int
        Number of ellipsoid updates performed.
    bound : float
        Final certificate ``sqrt(g^T A g)`` at the last objective cut
        (upper bound on ``value - min``).
    state : EllipsoidState
        Final ellipsoid.
    """

    x: np.ndarray
    value: float
    converged: bool
    stopped_early: bool
    iterations: int
    bound: float
    state: EllipsoidState
    log_volumes: list = field(default_factory=list)


def _cut(center, shape, g, depth):
    """Apply a (possibly deep) cut ``g^T (x - c) + depth <= 0``.

    Returns the updated center and shape, or ``None`` when the cut empties the
    ellipsoid.
    """
    n = center.size
    ag = shape @ g
    gag = float(g @ ag)
    if gag <= 0.0:
        return None
    s = np.sqrt(gag)
    a = depth / s
    if a >= 1.0:
        return None
    a = max(a, -1.0 / n)
    b = ag / s
    if n == 1:
        new_center = center - 0.5 * (1.0 + a) * b
        new_shape = shape * (0.5 * (1.0 - a)) ** 2
        return new_center, new_shape
    new_center = center - (1.0 + n * a) / (n + 1.0) * b
    coef = n * n * (1.0 - a * a) / (n * n - 1.0)
    new_shape = coef * (shape - 2.0 * (1.0 + n * a) / ((n + 1.0) * (1.0 + a)) * np.outer(b, b))
    new_shape = 0.5 * (new_shape + new_shape.T)
    return new_center, new_shape


def ellipsoid_minimize(
    value_and_subgradient: Oracle,
    constraint_subgradients: Sequence[Oracle],
    x0: np.ndarray,
    radius: float,
    tol: float = 1e-5,
    max_iter: int | None = None,
    feas_tol: float = 1e-6,
    callback: Callable[[np.ndarray, float, np.ndarray], bool] | None = None,
) -> EllipsoidResult:
    """Minimise a convex function subject to convex constraints ``h_j(x) <= 0``.

    Each iteration either cuts with the subgradient of the most violated
    constraint (deep cut) or, when all constraints hold within ``feas_tol``,
    with the objective subgradient (central cut).

    Parameters
    ----------
    value_and_subgradient : callable
        ``x -> (f(x), g)`` with ``g`` a subgradient of ``f`` at ``x``.
    constraint_subgradients : sequence of callable
        ``x -> (h(x), g_h)`` for each constraint ``h(x) <= 0``.
    x0 : numpy.ndarray
        Initial centre.
    radius : float
        Radius of the initial ball; must contain the minimiser.
    tol : float, optional
        Stop once ``sqrt(g^T A g) <= tol`` at a feasible centre.
    max_iter : int, optional
        Iteration cap, ``500 n^2`` by default.
    feas_tol : float, optional
        Constraint violation tolerated for a feasible centre.
    callback : callable, optional
        ``callback(x, f, g)`` is invoked at every feasible centre; returning
        ``True`` stops the iteration.

    Returns
    -------
    EllipsoidResult
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    if max_iter is None:
        max_iter = 500 * n * n
    shape = np.eye(n) * radius**2
    best_x, best_f = None, np.inf
    bound = np.inf
    converged = stopped = False
    log_vol = [float(np.linalg.slogdet(shape)[1])]
    it = 0
    while it < max_iter:
        worst, worst_g = feas_tol, None
        for h in constraint_subgradients:
            hv, hg = h(x)
            if hv > worst:
                worst, worst_g = hv, np.asarray(hg, dtype=float)
        if worst_g is not None:
            # cut against the relaxed set h <= feas_tol, which contains every
            # centre accepted as feasible, so equality constraints (two
            # opposite cuts) never empty the ellipsoid
            cut = _cut(x, shape, worst_g, worst - feas_tol)
            if cut is None:
                break
        else:
            fv, g = value_and_subgradient(x)
            g = np.asarray(g, dtype=float)
            if fv < best_f:
                best_x, best_f = x.copy(), float(fv)
            if callback is not None and callback(x, fv, g):
                stopped = True
                break
            gag = float(g @ shape @ g)
            bound = np.sqrt(max(gag, 0.0))
            if bound <= tol:
                converged = True
                break
            cut = _cut(x, shape, g, 0.0)
            if cut is None:
                converged = True
                break
        x, shape = cut
        it += 1
        log_vol.append(float(np.linalg.slogdet(shape)[1]))
    if best_x is None:
        best_x = x
        best_f = float(value_and_subgradient(x)[0])
    return EllipsoidResult(
        x=best_x,
        value=best_f,
        converged=converged,
        stopped_early=stopped,
        iterations=it,
        bound=float(bound),
        state=EllipsoidState(center=x, shape_matrix=shape, iteration=it),
        log_volumes=log_vol,
    )
