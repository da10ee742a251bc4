"""Numerical kernels shared by the multiple-access solvers."""

from .ellipsoid import DualVector, EllipsoidResult, EllipsoidState, ellipsoid_minimize
from .lambertw import lambert_w0
from .lp import LpProblem, LpSolution, solve_lp
from .quadrature import quadrature, sampled_integral, simpson_rule, simpson_weights
from .roots import NoSignChangeError, bisect
from .search import cluster_maxima, grid_search_1d

__all__ = [
    "DualVector",
    "EllipsoidResult",
    "EllipsoidState",
    "LpProblem",
    "LpSolution",
    "NoSignChangeError",
    "bisect",
    "cluster_maxima",
    "ellipsoid_minimize",
    "grid_search_1d",
    "lambert_w0",
    "quadrature",
    "sampled_integral",
    "simpson_rule",
    "simpson_weights",
    "solve_lp",
]
