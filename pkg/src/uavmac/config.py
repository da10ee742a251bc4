"""Scenario configuration files.

A configuration is a YAML mapping.  Only ``users.positions`` is required;
every other field falls back to the defaults below::

    users:
      positions: [0, 100]      # m, nondecreasing
      altitude: 250            # m
    channel:
      beta0: -30 dB            # plain numbers are linear ratios
      epsilon: 2
      xi: 0.2                  # linear, or e.g. "-7 dB"
      c_env: 10
      d_env: 0.6
      noise_power: -100 dBm    # plain numbers are watts; dBm / dBW accepted
      tx_power: 30 dBm
    v_max: 20                  # m/s
    horizon: 100               # s
    scheme: noma               # noma | fdma | tdma
    profiles: 21               # points of the default sweep, or explicit list
    solver:                    # any SolverSettings field
      location_intervals: 400
    output:
      dir: out

Field errors are reported with their dotted path.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .channel import ChannelParams, UserLayout
from .scenario import Scenario, SolverSettings

__all__ = ["ConfigError", "ScenarioConfig", "load_config", "parse_config", "parse_quantity"]


class ConfigError(ValueError):
    """Invalid configuration file or value."""


_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)\s*$")


def parse_quantity(value, kind: str) -> float:
    """Convert a number or a string with a decibel suffix to linear scale.

    Parameters
    ----------
    value : float or str
        ``3.5``, ``"3.5"``, ``"-30 dB"``, ``"30 dBm"`` or ``"0 dBW"``.
    kind : {"ratio", "power"}
        Ratios accept ``dB``; powers accept ``dBm`` and ``dBW`` and are
        returned in watts.

    Returns
    -------
    float
    """
    if isinstance(value, bool):
        raise ValueError("expected a number or a string with a unit suffix")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError("expected a number or a string with a unit suffix")
    m = _QUANTITY.match(value)
    if m is None:
        raise ValueError(f"cannot parse quantity {value!r}")
    number, unit = float(m.group(1)), m.group(2).lower()
    if unit == "":
        return number
    if kind == "ratio" and unit == "db":
        return 10.0 ** (number / 10.0)
    if kind == "power" and unit == "dbm":
        return 10.0 ** ((number - 30.0) / 10.0)
    if kind == "power" and unit == "dbw":
        return 10.0 ** (number / 10.0)
    allowed = "dB" if kind == "ratio" else "dBm or dBW"
    raise ValueError(f"unit {m.group(2)!r} not allowed here (use {allowed})")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class UsersSection(_Strict):
    positions: Optional[list[float]] = None
    altitude: float = 250.0

    @field_validator("altitude")
    @classmethod
    def _positive_altitude(cls, v):
        if not v > 0:
            raise ValueError("altitude must be positive")
        return v

    @field_validator("positions")
    @classmethod
    def _sorted(cls, v):
        if v is not None:
            if len(v) == 0:
                raise ValueError("at least one position is required")
            if any(b < a for a, b in zip(v, v[1:])):
                raise ValueError("positions must be nondecreasing")
        return v


class ChannelSection(_Strict):
    beta0: float = 1e-3
    epsilon: float = 2.0
    xi: float = 0.2
    c_env: float = 10.0
    d_env: float = 0.6
    noise_power: float = 1e-13
    tx_power: float = 1.0

    @field_validator("beta0", "xi", mode="before")
    @classmethod
    def _ratio(cls, v):
        return parse_quantity(v, "ratio")

    @field_validator("noise_power", "tx_power", mode="before")
    @classmethod
    def _power(cls, v):
        return parse_quantity(v, "power")

    @field_validator("beta0", "epsilon", "noise_power", "tx_power", "d_env")
    @classmethod
    def _positive(cls, v):
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("xi")
    @classmethod
    def _xi_range(cls, v):
        if not 0 < v <= 1:
            raise ValueError("must lie in (0, 1]")
        return v


class SolverSection(_Strict):
    location_intervals: int = 400
    endpoint_points: int = 41
    refine: bool = True
    quadrature_panels: int = 256
    ellipsoid_tol: float = Field(1e-5, gt=0)
    ellipsoid_iter_factor: int = Field(500, ge=1)
    feas_tol: float = Field(1e-6, gt=0)
    tie_tol: float = Field(1e-4, gt=0)
    near_tie_tol: float = Field(1e-6, gt=0)
    candidate_tol: float = Field(1e-3, gt=0)
    candidate_merge: int = Field(2, ge=0)
    history: int = Field(8, ge=0)
    gap_tol: float = Field(1e-3, gt=0)
    all_permutations: bool = False
    hover_time_tol: float = Field(1e-6, gt=0)


class OutputSection(_Strict):
    dir: str = "out"
    trajectory_step: float = Field(0.5, gt=0)


class ScenarioConfig(_Strict):
    """Validated configuration document."""

    users: UsersSection = Field(default_factory=UsersSection)
    channel: ChannelSection = Field(default_factory=ChannelSection)
    v_max: float = Field(20.0, ge=0)
    horizon: float = Field(100.0, gt=0)
    scheme: Literal["noma", "fdma", "tdma"] = "noma"
    profiles: Union[int, list[list[float]]] = 21
    solver: SolverSection = Field(default_factory=SolverSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _check(self):
        if self.users.positions is None:
            raise ValueError("users.positions required")
        k = len(self.users.positions)
        if isinstance(self.profiles, int):
            if self.profiles < 2:
                raise ValueError("profiles must be >= 2 points or an explicit list")
        else:
            for a in self.profiles:
                if len(a) != k or any(x < 0 for x in a) or abs(sum(a) - 1.0) > 1e-9:
                    raise ValueError(
                        f"profiles: each needs {k} nonnegative entries summing to 1, got {a}")
        return self

    def scenario(self) -> Scenario:
        """Build the :class:`~uavmac.scenario.Scenario` this file describes."""
        ch = self.channel
        return Scenario(
            UserLayout(tuple(self.users.positions), self.users.altitude),
            ChannelParams(beta0=ch.beta0, epsilon=ch.epsilon, xi=ch.xi, c_env=ch.c_env,
                          d_env=ch.d_env, noise_power=ch.noise_power, tx_power=ch.tx_power),
            v_max=self.v_max,
            horizon=self.horizon,
            settings=SolverSettings(**self.solver.model_dump()),
        )


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"].removeprefix("Value error, ")
        lines.append(f"{path}: {msg}")
    return "; ".join(lines)


def parse_config(text: str) -> ScenarioConfig:
    """Validate a configuration given as YAML text.

    Raises
    ------
    ConfigError
        On YAML syntax errors, schema violations (with field paths) and
        invariant violations.
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    try:
        cfg = ScenarioConfig.model_validate(data)
        cfg.scenario()
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> ScenarioConfig:
    """Read and validate a configuration file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    return parse_config(text)
