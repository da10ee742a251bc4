"""Scheme-independent dual decomposition driver.

Every multiple-access scheme reduces, for fixed trajectory end points
``(x_I, x_F)``, to the same pattern:

* a dual function ``f(lam) = max_strategy sum_k lam_k r_k(strategy)``,
  evaluated by a per-scheme *cell* object that also returns the maximising
  rate tuple (a subgradient);
* minimisation of ``f`` over ``{lam >= 0, alpha @ lam = 1}`` by the
  ellipsoid method;
* recovery of a primal solution by time-sharing among strategies that are
  optimal (or nearly so) at the final multipliers.

Because ``f`` is positively homogeneous, ``f(lam) / (alpha @ lam)`` bounds
the optimal common rate of a cell from above for *any* ``lam >= 0`` with
``alpha @ lam > 0``.  The endpoint search uses this to discard cells that
cannot beat the incumbent without solving them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from .numerics import LpProblem, ellipsoid_minimize, solve_lp
from .scenario import Scenario, SolverSettings

__all__ = [
    "DualEval",
    "DualRun",
    "CellProblem",
    "CellSolution",
    "SolverError",
    "minimize_dual",
    "timeshare_lp",
    "endpoint_search",
    "validate_alpha",
]


class SolverError(RuntimeError):
    """Raised when a solver cannot produce a valid solution."""


def validate_alpha(alpha: Sequence[float], n_users: int) -> np.ndarray:
    """Check a rate profile: ``n_users`` nonnegative entries summing to one."""
    a = np.asarray(alpha, dtype=float).ravel()
    if a.size != n_users:
        raise ValueError(f"rate profile needs {n_users} entries, got {a.size}")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("rate profile entries must be finite and nonnegative")
    if abs(a.sum() - 1.0) > 1e-9:
        raise ValueError("rate profile must sum to one")
    return a / a.sum()


@dataclass
class DualEval:
    """Dual function value at one multiplier vector.

    Attributes
    ----------
    value : float
        ``f(lam)``.
    subgradient : numpy.ndarray
        Rate tuple achieved by the maximising strategy.
    argmax : int
        Index of the maximising hover candidate.
    info : Any
        Scheme-specific extras (decoding order, allocation, ...).
    """

    value: float
    subgradient: np.ndarray
    argmax: int
    info: Any = None


class CellProblem(Protocol):
    """Dual oracle and primal recovery for fixed end points."""

    x_i: float
    x_f: float
    t_leg: float
    t_hover: float

    def evaluate(self, lam: np.ndarray) -> DualEval: ...

    def recover(self, run: "DualRun", alpha: np.ndarray, settings: SolverSettings): ...


@dataclass
class DualRun:
    """Outcome of :func:`minimize_dual` on one cell.

    Attributes
    ----------
    lam : numpy.ndarray
        Best multipliers, normalised to ``alpha @ lam == 1``.
    value : float
        Certified upper bound ``f(lam)`` on the cell's common rate.
    best_eval : DualEval
        Oracle output at ``lam``.
    history : list of (numpy.ndarray, DualEval)
        Late iterates (normalised multipliers and their oracle output).
    iterations : int
    converged : bool
    pruned : bool
        ``True`` when the run stopped because the bound fell below the
        cutoff; the cell cannot beat the incumbent.
    """

    lam: np.ndarray
    value: float
    best_eval: DualEval
    history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    pruned: bool = False


def minimize_dual(
    cell: CellProblem,
    alpha: np.ndarray,
    settings: SolverSettings,
    cutoff: float = -np.inf,
) -> DualRun:
    """Minimise a cell's dual function over ``{lam >= 0, alpha @ lam = 1}``.

    Users with ``alpha_k = 0`` get ``lam_k = 0`` (the dual function is
    nondecreasing in every multiplier and the constraint does not involve
    them), so the ellipsoid runs in the subspace of users with positive
    profile entries.

    Parameters
    ----------
    cell : CellProblem
        Dual oracle.
    alpha : numpy.ndarray
        Rate profile.
    settings : SolverSettings
        Tolerances.
    cutoff : float, optional
        Stop as soon as the certified bound drops to ``cutoff`` or below.

    Returns
    -------
    DualRun
    """
    k = alpha.size
    active = np.flatnonzero(alpha > 0)
    n = active.size
    best: dict[str, Any] = {"ub": np.inf, "lam": None, "ev": None}
    history: deque = deque(maxlen=max(settings.history, 1))

    def embed(z: np.ndarray) -> np.ndarray:
        lam = np.zeros(k)
        lam[active] = np.maximum(z, 0.0)
        return lam

    def oracle(z: np.ndarray):
        lam = embed(z)
        ev = cell.evaluate(lam)
        s = float(alpha @ lam)
        if s > 0:
            ub = ev.value / s
            lam_n = lam / s
            history.append((lam_n, ev))
            if ub < best["ub"]:
                best.update(ub=ub, lam=lam_n, ev=ev)
        return ev.value, ev.subgradient[active]

    if n == 1:
        z = np.array([1.0 / alpha[active[0]]])
        oracle(z)
        return DualRun(best["lam"], best["ub"], best["ev"], list(history), 0, True,
                       best["ub"] <= cutoff)

    a_act = alpha[active]
    center = 1.0 / (n * a_act)
    vertices = np.diag(1.0 / a_act)
    radius = 1.01 * float(np.max(np.linalg.norm(vertices - center, axis=1)))

    constraints = [
        lambda z: (float(a_act @ z - 1.0), a_act),
        lambda z: (float(1.0 - a_act @ z), -a_act),
    ]
    for j in range(n):
        e = np.zeros(n)
        e[j] = -1.0
        constraints.append(lambda z, j=j, e=e: (float(-z[j]), e))

    def stop(z, fv, g):
        return best["ub"] <= cutoff

    res = ellipsoid_minimize(
        oracle,
        constraints,
        center,
        radius,
        tol=settings.ellipsoid_tol,
        max_iter=settings.ellipsoid_iter_factor * n * n,
        feas_tol=settings.feas_tol,
        callback=stop,
    )
    return DualRun(
        lam=best["lam"],
        value=best["ub"],
        best_eval=best["ev"],
        history=list(history),
        iterations=res.iterations,
        converged=res.converged,
        pruned=res.stopped_early,
    )


def timeshare_lp(columns: np.ndarray, alpha: np.ndarray) -> tuple[np.ndarray, float, Any]:
    """Best time-sharing of rate tuples for a rate profile.

    Solves ``max R`` subject to ``sum_j tau_j r_j >= alpha R``,
    ``sum_j tau_j = 1`` and ``tau >= 0``.

    Parameters
    ----------
    columns : numpy.ndarray
        ``(K, J)`` rate tuples, one per column.
    alpha : numpy.ndarray
        Rate profile.

    Returns
    -------
    tau : numpy.ndarray
        Time-sharing fractions.
    R : float
        Optimal common rate.
    lp : LpSolution
        Raw LP output (for duality checks).
    """
    columns = np.atleast_2d(np.asarray(columns, dtype=float))
    k, j = columns.shape
    if j == 0:
        raise SolverError("time-sharing LP needs at least one rate tuple")
    c = np.zeros(j + 1)
    c[-1] = 1.0
    a_ub = np.hstack([-columns, alpha.reshape(-1, 1)])
    b_ub = np.zeros(k)
    a_eq = np.zeros((1, j + 1))
    a_eq[0, :j] = 1.0
    lp = solve_lp(LpProblem(c, a_ub, b_ub, a_eq, np.array([1.0])))
    if lp.status != "optimal":
        raise SolverError(f"time-sharing LP is {lp.status}")
    tau = np.maximum(lp.x[:j], 0.0)
    tau /= tau.sum()
    achieved = columns @ tau
    pos = alpha > 0
    r_val = float(np.min(achieved[pos] / alpha[pos])) if np.any(pos) else float(lp.value)
    return tau, r_val, lp


@dataclass
class CellSolution:
    """Solved cell: dual run plus recovered primal."""

    cell: Any
    run: DualRun
    primal: Any

    @property
    def rate(self) -> float:
        return float(self.primal.common_rate)

    @property
    def gap(self) -> float:
        return float(self.run.value - self.primal.common_rate)


@dataclass
class SearchStats:
    """Book-keeping of an endpoint search."""

    cells_total: int = 0
    cells_solved: int = 0
    cells_pruned: int = 0
    ellipsoid_iterations: int = 0


def solve_cell(cell: CellProblem, alpha: np.ndarray, settings: SolverSettings,
               cutoff: float = -np.inf) -> CellSolution | None:
    """Run the dual minimisation and primal recovery for one cell.

    Returns ``None`` when the cell was pruned against ``cutoff``.
    """
    run = minimize_dual(cell, alpha, settings, cutoff)
    if run.pruned:
        return None
    primal = cell.recover(run, alpha, settings)
    return CellSolution(cell, run, primal)


def endpoint_search(
    scenario: Scenario,
    alpha: np.ndarray,
    make_cell: Callable[[int, int], CellProblem | None],
) -> tuple[CellSolution, SearchStats]:
    """Exhaustive search over grid end points with bound-based pruning.

    Parameters
    ----------
    scenario : Scenario
        Problem instance (provides the location grid).
    alpha : numpy.ndarray
        Rate profile.
    make_cell : callable
        ``(i0, i1) -> cell`` for grid node indices, or ``None`` when the pair
        is infeasible for the scheme.

    Returns
    -------
    best : CellSolution
        Cell with the largest recovered common rate.
    stats : SearchStats

    Raises
    ------
    SolverError
        If no pair is feasible, or the best cell's duality gap exceeds
        ``settings.gap_tol`` (the dual search did not converge).
    """
    grid = scenario.grid
    settings = scenario.settings
    idx = grid.endpoint_indices()
    stats = SearchStats()
    cells: dict[tuple[int, int], CellProblem] = {}
    done: set[tuple[int, int]] = set()
    probes: list[np.ndarray] = []
    state: dict[str, Any] = {"best": None}

    n_active = int(np.count_nonzero(alpha > 0))
    lam0 = np.where(alpha > 0, 1.0 / (n_active * np.where(alpha > 0, alpha, 1.0)), 0.0)

    def get(pair):
        if pair not in cells:
            cells[pair] = make_cell(*pair)
        return cells[pair]

    def process(pairs):
        # best-first branch and bound: every solved cell contributes its
        # multipliers as a probe, and each pending cell keeps the smallest
        # homogeneous bound f(lam) / (alpha @ lam) seen over all probes
        keys, pend = [], []
        for pair in pairs:
            if pair in done or not grid.feasible(*pair):
                continue
            cell = get(pair)
            done.add(pair)
            if cell is None:
                continue
            stats.cells_total += 1
            keys.append(pair)
            pend.append(cell)
        if not pend:
            return
        ub = np.array([c.evaluate(lam0).value for c in pend])
        for p in probes:
            ub = np.minimum(ub, [c.evaluate(p).value for c in pend])
        open_ = np.ones(len(pend), dtype=bool)
        while open_.any():
            best = state["best"]
            cutoff = -np.inf if best is None else best.rate
            cand = np.flatnonzero(open_)
            # most promising first; ties broken by grid order for determinism
            j = cand[np.lexsort((np.arange(cand.size), -ub[cand]))[0]]
            if ub[j] <= cutoff:
                stats.cells_pruned += int(cand.size)
                break
            open_[j] = False
            sol = solve_cell(pend[j], alpha, settings, cutoff)
            if sol is None:
                stats.cells_pruned += 1
                continue
            stats.cells_solved += 1
            stats.ellipsoid_iterations += sol.run.iterations
            probes.append(sol.run.lam)
            if best is None or sol.rate > best.rate + 1e-12:
                state["best"] = sol
            rest = np.flatnonzero(open_)
            ub[rest] = np.minimum(ub[rest], [pend[i].evaluate(sol.run.lam).value for i in rest])

    process([(int(a), int(b)) for a in idx for b in idx if a <= b])
    best = state["best"]
    if best is None:
        raise SolverError("no feasible end-point pair for this scenario")

    if settings.refine and grid.n_nodes > 1:
        stride = grid.endpoint_stride()
        fine = max(1, stride // 4)
        i_b, j_b = best.cell.i0, best.cell.i1
        span = np.arange(-stride, stride + 1, fine)
        n_last = grid.n_nodes - 1
        ii = np.unique(np.clip(i_b + span, 0, n_last))
        jj = np.unique(np.clip(j_b + span, 0, n_last))
        process([(int(a), int(b)) for a in ii for b in jj if a <= b])

    best = state["best"]
    gap = best.run.value - best.rate
    if gap > settings.gap_tol:
        raise SolverError(f"duality gap {gap:.3g} exceeds gap_tol={settings.gap_tol:g} "
                          f"(dual {best.run.value:.9g}, primal {best.rate:.9g})")
    return best, stats
