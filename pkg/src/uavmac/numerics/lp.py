"""Dense two-phase simplex method for small linear programs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LpProblem", "LpSolution", "solve_lp"]

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-10


@dataclass(frozen=True)
class LpProblem:
    """``maximize c @ x`` subject to ``a_ub @ x <= b_ub``, ``a_eq @ x == b_eq``
    and ``x >= lower``.

    Parameters
    ----------
    c : array_like
        Objective coefficients, length ``n``.
    a_ub, b_ub : array_like, optional
        Inequality rows.
    a_eq, b_eq : array_like, optional
        Equality rows.
    lower : array_like, optional
        Variable lower bounds; ``-inf`` marks a free variable. Defaults to 0.
    """

    c: np.ndarray
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None


@dataclass(frozen=True)
class LpSolution:
    """Result of :func:`solve_lp`.

    Attributes
    ----------
    status : str
        ``"optimal"``, ``"infeasible"`` or ``"unbounded"``.
    x : numpy.ndarray or None
        Optimal basic solution.
    value : float
        Optimal objective value (``nan`` unless optimal).
    duals_ub, duals_eq : numpy.ndarray
        Row multipliers of the terminal basis (``duals_ub >= 0``).
    dual_value : float
        Objective of the dual program at the multipliers above.
    iterations : int
        Total number of pivots over both phases.
    """

    status: str
    x: np.ndarray | None
    value: float
    duals_ub: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_value: float = float("nan")
    iterations: int = 0


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    colv = tab[:, col].copy()
    colv[row] = 0.0
    tab -= np.outer(colv, tab[row])


def _run_simplex(tab, basis, n_allowed, max_iter):
    """Bland's-rule simplex on a tableau whose row 0 holds reduced costs.

    Returns ``(status, pivots)`` with status ``"optimal"`` or ``"unbounded"``.
    """
    m = tab.shape[0] - 1
    pivots = 0
    while pivots < max_iter:
        costs = tab[0, :n_allowed]
        candidates = np.flatnonzero(costs < -_COST_TOL)
        if candidates.size == 0:
            return "optimal", pivots
        col = int(candidates[0])
        colv = tab[1:, col]
        pos = np.flatnonzero(colv > _PIVOT_TOL)
        if pos.size == 0:
            return "unbounded", pivots
        ratios = tab[1:, -1][pos] / colv[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * (1.0 + abs(best))]
        row = int(min(ties, key=lambda i: basis[i])) + 1
        _pivot(tab, row, col)
        basis[row - 1] = col
        pivots += 1
    raise RuntimeError(f"simplex exceeded {max_iter} pivots on {m} rows")


def solve_lp(p: LpProblem, max_iter: int = 10_000) -> LpSolution:
    """Solve a small dense LP with the two-phase simplex method.

    Bland's rule (lowest-index entering and leaving variables) rules out
    cycling. The terminal basis is re-solved directly for accuracy, and its
    row multipliers are returned so callers can check strong duality.

    Parameters
    ----------
    p : LpProblem
        Problem data.
    max_iter : int, optional
        Pivot cap per phase.

    Returns
    -------
    LpSolution
    """
    c = np.asarray(p.c, dtype=float).ravel()
    n = c.size
    a_ub = np.zeros((0, n)) if p.a_ub is None else np.atleast_2d(np.asarray(p.a_ub, float))
    b_ub = np.zeros(0) if p.b_ub is None else np.asarray(p.b_ub, float).ravel()
    a_eq = np.zeros((0, n)) if p.a_eq is None else np.atleast_2d(np.asarray(p.a_eq, float))
    b_eq = np.zeros(0) if p.b_eq is None else np.asarray(p.b_eq, float).ravel()
    lower = np.zeros(n) if p.lower is None else np.asarray(p.lower, float).ravel()
    if a_ub.shape != (b_ub.size, n) or a_eq.shape != (b_eq.size, n) or lower.size != n:
        raise ValueError("inconsistent LP dimensions")

    # x = shift + M @ z with z >= 0 (free variables are split in two)
    free = ~np.isfinite(lower)
    shift = np.where(free, 0.0, lower)
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        cols.append(e)
        if free[j]:
            cols.append(-e)
    mmap = np.array(cols).T  # n x nz
    nz = mmap.shape[1]

    m_ub, m_eq = b_ub.size, b_eq.size
    m = m_ub + m_eq
    n_std = nz + m_ub
    a_std = np.zeros((m, n_std))
    a_std[:m_ub, :nz] = a_ub @ mmap
    a_std[:m_ub, nz:] = np.eye(m_ub)
    a_std[m_ub:, :nz] = a_eq @ mmap
    b_std = np.concatenate([b_ub - a_ub @ shift, b_eq - a_eq @ shift])
    c_std = np.concatenate([c @ mmap, np.zeros(m_ub)])
    sign = np.where(b_std < 0.0, -1.0, 1.0)
    a_std *= sign[:, None]
    b_std = b_std * sign

    # phase 1 tableau with one artificial per row
    n_tot = n_std + m
    tab = np.zeros((m + 1, n_tot + 1))
    tab[1:, :n_std] = a_std
    tab[1:, n_std:n_tot] = np.eye(m)
    tab[1:, -1] = b_std
    tab[0, n_std:n_tot] = 1.0
    tab[0] -= tab[1:].sum(axis=0)
    basis = list(range(n_std, n_tot))
    _, it1 = _run_simplex(tab, basis, n_tot, max_iter)
    infeas = -tab[0, -1]
    if infeas > 1e-9 * (1.0 + np.abs(b_std).sum()):
        return LpSolution("infeasible", None, float("nan"), iterations=it1)

    # drive remaining artificials out of the basis; drop redundant rows
    keep = np.ones(m + 1, dtype=bool)
    for i in range(m):
        if basis[i] >= n_std:
            row = tab[i + 1, :n_std]
            nzc = np.flatnonzero(np.abs(row) > 1e-9)
            if nzc.size:
                _pivot(tab, i + 1, int(nzc[0]))
                basis[i] = int(nzc[0])
            else:
                keep[i + 1] = False
    rows_kept = np.flatnonzero(keep[1:])
    basis = [basis[i] for i in rows_kept]
    tab = np.delete(tab[keep], np.s_[n_std:n_tot], axis=1)

    # phase 2
    tab[0, :] = 0.0
    tab[0, :n_std] = -c_std
    for i, bj in enumerate(basis):
        if tab[0, bj] != 0.0:
            tab[0] -= tab[0, bj] * tab[i + 1]
    status, it2 = _run_simplex(tab, basis, n_std, max_iter)
    if status == "unbounded":
        return LpSolution("unbounded", None, float("nan"), iterations=it1 + it2)

    # re-solve the terminal basis from the original data
    bmat = a_std[rows_kept][:, basis]
    xb = np.linalg.solve(bmat, b_std[rows_kept])
    z = np.zeros(n_std)
    z[basis] = np.maximum(xb, 0.0)
    x = shift + mmap @ z[:nz]

    y_kept = np.linalg.solve(bmat.T, c_std[basis])
    y = np.zeros(m)
    y[rows_kept] = y_kept
    y *= sign  # multipliers for the rows as originally posed
    duals_ub, duals_eq = y[:m_ub], y[m_ub:]
    dual_value = float(b_ub @ duals_ub + b_eq @ duals_eq
                       + (c - a_ub.T @ duals_ub - a_eq.T @ duals_eq) @ shift)
    return LpSolution(
        "optimal",
        x,
        float(c @ x),
        duals_ub=duals_ub,
        duals_eq=duals_eq,
        dual_value=dual_value,
        iterations=it1 + it2,
    )
