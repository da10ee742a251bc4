"""Probabilistic line-of-sight air-to-ground channel.

The UAV flies at altitude ``H`` above a straight line on which the users sit.
For a UAV at horizontal coordinate ``x`` and a user at ``w`` the distance is
``d = sqrt((x - w)^2 + H^2)``, the elevation angle (degrees) is
``theta = (180 / pi) asin(H / d)`` and the line-of-sight probability follows
the logistic model ``1 / (1 + C exp(-D (theta - C)))``.  The average power
gain mixes the LoS and attenuated NLoS path losses::

    h = (P_LoS + xi (1 - P_LoS)) * beta0 * d ** (-epsilon)

All quantities are linear (watts, dimensionless gains); conversions from
decibels happen at configuration time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "ChannelParams",
    "UserLayout",
    "db_to_linear",
    "dbm_to_watts",
    "elevation_angle",
    "los_probability",
    "channel_gain",
    "snr",
    "snr_matrix",
    "single_user_capacity",
]


def db_to_linear(value_db: float) -> float:
    """Convert a power ratio in dB to linear scale."""
    return float(10.0 ** (value_db / 10.0))


def dbm_to_watts(value_dbm: float) -> float:
    """Convert a power in dBm to watts."""
    return float(10.0 ** ((value_dbm - 30.0) / 10.0))


@dataclass(frozen=True)
class ChannelParams:
    """Parameters of the air-to-ground channel.

    Parameters
    ----------
    beta0 : float
        Reference power gain at 1 m (linear).
    epsilon : float
        Path-loss exponent.
    xi : float
        Extra attenuation factor of NLoS links, in ``(0, 1)``.
    c_env, d_env : float
        Environment-dependent logistic parameters ``C`` and ``D`` (1/degree).
    noise_power : float
        Receiver noise power in watts.
    tx_power : float
        Transmit power of every user in watts.
    los_override : float, optional
        When set, the LoS probability is pinned to this value instead of the
        logistic model (``1.0`` gives free-space path loss).
    """

    beta0: float = 1e-3
    epsilon: float = 2.0
    xi: float = 0.2
    c_env: float = 10.0
    d_env: float = 0.6
    noise_power: float = 1e-13
    tx_power: float = 1.0
    los_override: float | None = None

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.xi < 1:
            raise ValueError("xi must lie in (0, 1)")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        if not self.tx_power > 0:
            raise ValueError("tx_power must be positive")
        if self.los_override is not None and not 0 <= self.los_override <= 1:
            raise ValueError("los_override must lie in [0, 1]")


@dataclass(frozen=True)
class UserLayout:
    """Users on a line and the UAV altitude.

    Parameters
    ----------
    positions : sequence of float
        Nondecreasing user coordinates ``w_1 <= ... <= w_K`` in meters.
    altitude : float
        UAV altitude ``H`` in meters.
    """

    positions: tuple
    altitude: float = 250.0

    def __post_init__(self):
        pos = tuple(float(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if len(pos) < 1:
            raise ValueError("at least one user position is required")
        if any(b < a for a, b in zip(pos, pos[1:])):
            raise ValueError("user positions must be nondecreasing")
        if not all(np.isfinite(pos)):
            raise ValueError("user positions must be finite")
        if not self.altitude > 0:
            raise ValueError("altitude must be positive")

    @property
    def n_users(self) -> int:
        """Number of users ``K``."""
        return len(self.positions)

    @property
    def w(self) -> np.ndarray:
        """User coordinates as an array."""
        return np.asarray(self.positions, dtype=float)

    @property
    def span(self) -> tuple[float, float]:
        """``(w_1, w_K)``."""
        return self.positions[0], self.positions[-1]


def elevation_angle(uav_x, user_w, h: float):
    """Elevation angle in degrees of the UAV seen from a user.

    Parameters
    ----------
    uav_x, user_w : float or array_like
        Horizontal coordinates of UAV and user (broadcast together).
    h : float
        Altitude, ``> 0``.

    Returns
    -------
    float or numpy.ndarray
        Angle in ``(0, 90]``; exactly 90 when the UAV is overhead.
    """
    if not h > 0:
        raise ValueError("altitude must be positive")
    dx = np.asarray(uav_x, dtype=float) - np.asarray(user_w, dtype=float)
    # atan2 of (H, |dx|) equals asin(H/d) and is exactly 90 degrees at dx = 0
    theta = np.degrees(np.arctan2(h, np.abs(dx)))
    return float(theta) if np.ndim(theta) == 0 else theta


def los_probability(elev_deg, params: ChannelParams):
    """Logistic LoS probability ``1 / (1 + C exp(-D (theta - C)))``."""
    theta = np.asarray(elev_deg, dtype=float)
    if params.los_override is not None:
        p = np.full_like(theta, params.los_override)
    else:
        p = 1.0 / (1.0 + params.c_env * np.exp(-params.d_env * (theta - params.c_env)))
    return float(p) if np.ndim(p) == 0 else p


def channel_gain(uav_x, user_w, layout: UserLayout, params: ChannelParams):
    """Average channel power gain between the UAV and a user.

    Parameters
    ----------
    uav_x, user_w : float or array_like
        Horizontal coordinates (broadcast together).
    layout : UserLayout
        Supplies the altitude.
    params : ChannelParams
        Channel parameters.

    Returns
    -------
    float or numpy.ndarray
        Linear power gain ``(P_LoS + xi (1 - P_LoS)) beta0 d^-epsilon``.
    """
    h = layout.altitude
    dx = np.asarray(uav_x, dtype=float) - np.asarray(user_w, dtype=float)
    d2 = dx * dx + h * h
    p_los = np.asarray(los_probability(elevation_angle(uav_x, user_w, h), params))
    gain = (p_los + params.xi * (1.0 - p_los)) * params.beta0 * d2 ** (-0.5 * params.epsilon)
    return float(gain) if np.ndim(gain) == 0 else gain


def snr(uav_x, user_w, layout: UserLayout, params: ChannelParams):
    """Receive SNR ``P h / sigma^2`` of a user."""
    return channel_gain(uav_x, user_w, layout, params) * (params.tx_power / params.noise_power)


def snr_matrix(xs: Sequence[float], layout: UserLayout, params: ChannelParams) -> np.ndarray:
    """SNR of every user at every UAV location.

    Returns
    -------
    numpy.ndarray
        Array of shape ``(len(xs), K)``.
    """
    xs = np.asarray(xs, dtype=float).reshape(-1, 1)
    return np.asarray(snr(xs, layout.w.reshape(1, -1), layout, params)).reshape(xs.shape[0], -1)


def single_user_capacity(uav_x, user_w, layout: UserLayout, params: ChannelParams):
    """Full-band capacity ``log2(1 + P h / sigma^2)`` in bps/Hz."""
    return np.log2(1.0 + np.asarray(snr(uav_x, user_w, layout, params)))
