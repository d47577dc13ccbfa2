"""Scenario parameters for the two-tier NOMA HetNet."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np


class ConfigError(ValueError):
    """Raised for invalid or infeasible scenario parameters."""


@dataclass(frozen=True)
class PathLoss:
    """Log-distance law: PL(d) = intercept_db + slope_db * log10(d / 1 km)."""

    intercept_db: float
    slope_db: float

    def loss_db(self, d_m):
        return self.intercept_db + self.slope_db * _log10_km(d_m)


def _log10_km(d_m):
    return np.log10(np.maximum(d_m, MIN_DISTANCE_M) / 1000.0)


# Distances below this are clamped before evaluating path loss.
MIN_DISTANCE_M = 1.0


@dataclass(frozen=True)
class NetworkConfig:
    n_small_cells: int = 4
    n_mues: int = 8
    sues_per_cell: int = 2
    bandwidth_hz: float = 10e6
    total_power_w: float = 20.0
    circuit_power_per_band_w: float = 0.1
    macro_radius_m: float = 500.0
    small_radius_m: float = 30.0
    pathloss_macro: PathLoss = field(default_factory=lambda: PathLoss(128.1, 37.6))
    pathloss_small: PathLoss = field(default_factory=lambda: PathLoss(140.7, 36.7))
    wall_loss_db: float = 20.0
    noise_psd_dbm_hz: float = -174.0
    csi_error_var: float = 0.0
    max_mues_per_band: int = 2
    ftpa_alpha: float = 0.4
    rate_min_bps: float = 1e5
    outage_eps: float = 0.1
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.n_small_cells >= 1, "n_small_cells must be >= 1"),
            (self.n_mues >= 0, "n_mues must be >= 0"),
            (self.sues_per_cell >= 1, "sues_per_cell must be >= 1"),
            (self.bandwidth_hz > 0, "bandwidth_hz must be > 0"),
            (self.total_power_w > 0, "total_power_w must be > 0"),
            (self.circuit_power_per_band_w >= 0, "circuit_power_per_band_w must be >= 0"),
            (self.macro_radius_m > 0, "macro_radius_m must be > 0"),
            (self.small_radius_m > 0, "small_radius_m must be > 0"),
            (self.wall_loss_db >= 0, "wall_loss_db must be >= 0"),
            (0 <= self.csi_error_var < 1, "csi_error_var must lie in [0, 1)"),
            (self.max_mues_per_band >= 1, "max_mues_per_band must be >= 1"),
            (0 <= self.ftpa_alpha <= 1, "ftpa_alpha must lie in [0, 1]"),
            (self.rate_min_bps >= 0, "rate_min_bps must be >= 0"),
            (0 < self.outage_eps < 1, "outage_eps must lie in (0, 1)"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        for name in ("bandwidth_hz", "total_power_w", "noise_psd_dbm_hz"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    @property
    def n_bands(self) -> int:
        return self.n_small_cells

    @property
    def n_sues(self) -> int:
        return self.n_small_cells * self.sues_per_cell

    @property
    def n_users(self) -> int:
        return self.n_sues + self.n_mues

    @property
    def band_bandwidth_hz(self) -> float:
        return self.bandwidth_hz / self.n_small_cells

    @property
    def band_budget_w(self) -> float:
        """Per-band budget of the MBS and of each SBS, P_s / (2K)."""
        return self.total_power_w / (2 * self.n_small_cells)

    @property
    def noise_power_w(self) -> float:
        return 10 ** ((self.noise_psd_dbm_hz - 30) / 10) * self.band_bandwidth_hz

    @property
    def circuit_power_w(self) -> float:
        return self.n_small_cells * self.circuit_power_per_band_w

    def replace(self, **changes: Any) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("pathloss_macro", "pathloss_small"):
            if key in kwargs:
                kwargs[key] = _parse_pathloss(key, kwargs[key])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _parse_pathloss(key: str, value) -> PathLoss:
    if isinstance(value, PathLoss):
        return value
    if isinstance(value, dict):
        try:
            return PathLoss(float(value["intercept_db"]), float(value["slope_db"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{key} needs numeric intercept_db and slope_db") from exc
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return PathLoss(float(value[0]), float(value[1]))
    raise ConfigError(f"cannot parse {key}: {value!r}")


def load_json(path: str | Path) -> dict:
    """Read a JSON config document. OSError propagates to the caller."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc
