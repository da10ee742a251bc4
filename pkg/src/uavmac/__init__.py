"""Rate regions of a UAV-enabled multiple access channel.

Users sit on a line; a UAV at fixed altitude flies above that line and
receives their uplink messages.  For a rate profile ``alpha`` the package
finds the largest ``R`` such that every user ``k`` obtains ``alpha_k R``,
jointly over the 1D trajectory and the multiple-access resources, for

* NOMA with successive interference cancellation (:func:`solve_p1`),
* FDMA with per-location bandwidth splits (:func:`solve_p2`),
* TDMA with per-location time slots (:func:`solve_p3`).

All three use a Lagrange dual decomposition whose optimal trajectories have
the successive hover-and-fly structure.
"""

from .channel import ChannelParams, UserLayout, channel_gain, los_probability, snr_matrix
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .dual import SolverError
from .experiments import (
    SCHEMES,
    RateProfile,
    RegionBoundary,
    benchmark_static_hover,
    benchmark_successive_hover,
    default_profiles,
    hover_location_count,
    hover_location_groups,
    oracle_two_user_hfh,
    pareto_sweep,
    region_nesting_report,
    solve,
)
from .fdma import FdmaSolution, allocate_bandwidth, solve_p2, solve_p2_fixed_endpoints
from .noma import NomaSolution, solve_p1, solve_p1_fixed_endpoints
from .numerics import DualVector, lambert_w0
from .scenario import Scenario, SolverSettings
from .tdma import TdmaSolution, solve_p3, solve_p3_fixed_endpoints
from .trajectory import MaxSpeedLeg, ShfTrajectory, TrajectoryError, assemble_shf, decompose

__version__ = "0.1.0"

__all__ = [
    "SCHEMES",
    "ChannelParams",
    "ConfigError",
    "DualVector",
    "FdmaSolution",
    "MaxSpeedLeg",
    "NomaSolution",
    "RateProfile",
    "RegionBoundary",
    "Scenario",
    "ScenarioConfig",
    "ShfTrajectory",
    "SolverError",
    "SolverSettings",
    "TdmaSolution",
    "TrajectoryError",
    "UserLayout",
    "allocate_bandwidth",
    "assemble_shf",
    "benchmark_static_hover",
    "benchmark_successive_hover",
    "channel_gain",
    "decompose",
    "default_profiles",
    "hover_location_count",
    "hover_location_groups",
    "lambert_w0",
    "load_config",
    "los_probability",
    "oracle_two_user_hfh",
    "pareto_sweep",
    "parse_config",
    "region_nesting_report",
    "snr_matrix",
    "solve",
    "solve_p1",
    "solve_p1_fixed_endpoints",
    "solve_p2",
    "solve_p2_fixed_endpoints",
    "solve_p3",
    "solve_p3_fixed_endpoints",
    "__version__",
]
