"""Node placement, block-fading channels and noisy CSI.

User indexing is global and shared by every module: SUEs come first in
cell-major order (cell ``c`` owns users ``c*F .. c*F+F-1``), MUEs follow.
Transmitter 0 is the MBS, transmitter ``c+1`` is the SBS of cell ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .config import ConfigError, NetworkConfig

MBS = 0
PLACEMENT_ATTEMPTS = 2000


class InfeasibleConfigError(ConfigError):
    """Small cells cannot be placed under the separation constraint."""


@dataclass(frozen=True)
class Topology:
    mbs_pos: np.ndarray  # (2,)
    sbs_pos: np.ndarray  # (K, 2)
    mue_pos: np.ndarray  # (M, 2)
    sue_pos: np.ndarray  # (K, F, 2)

    def user_positions(self) -> np.ndarray:
        """All user coordinates in global user order, shape (U, 2)."""
        return np.concatenate([self.sue_pos.reshape(-1, 2), self.mue_pos.reshape(-1, 2)])

    def tx_positions(self) -> np.ndarray:
        return np.concatenate([self.mbs_pos[None, :], self.sbs_pos])


@dataclass(frozen=True)
class ChannelRealization:
    """Per-(tx, user, band) gains; the large-scale part is shared across bands.

    ``fading`` and ``fading_est`` hold the small-scale complex coefficients,
    ``large_scale`` the linear path-loss/wall attenuation per (tx, user).
    """

    fading: np.ndarray  # (K+1, U, K) complex
    fading_est: np.ndarray  # (K+1, U, K) complex
    large_scale: np.ndarray  # (K+1, U)
    noise_power_w: float
    csi_error_var: float = 0.0

    @cached_property
    def gain_true(self) -> np.ndarray:
        return _power_gain(self.fading, self.large_scale)

    @cached_property
    def gain_est(self) -> np.ndarray:
        return _power_gain(self.fading_est, self.large_scale)

    def gains(self, use_estimated: bool) -> np.ndarray:
        return self.gain_est if use_estimated else self.gain_true


def _power_gain(coef: np.ndarray, large_scale: np.ndarray) -> np.ndarray:
    return (coef.real**2 + coef.imag**2) * large_scale[:, :, None]


def serving_tx(cfg: NetworkConfig) -> np.ndarray:
    """Serving transmitter index of every user."""
    sue_tx = np.repeat(np.arange(1, cfg.n_small_cells + 1), cfg.sues_per_cell)
    return np.concatenate([sue_tx, np.full(cfg.n_mues, MBS)]).astype(int)


def sues_of_cell(cfg: NetworkConfig, cell: int) -> list[int]:
    f = cfg.sues_per_cell
    return list(range(cell * f, (cell + 1) * f))


def mue_index(cfg: NetworkConfig, m: int) -> int:
    """Global user index of the m-th MUE."""
    return cfg.n_sues + m


def _uniform_disk(rng: np.random.Generator, radius: float, n: int) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    phi = 2 * np.pi * rng.random(n)
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


def generate_topology(cfg: NetworkConfig, rng: np.random.Generator) -> Topology:
    """Drop the MBS at the origin, SBSs uniformly in the macro disk, users in their disks.

    SBSs keep a pairwise separation of at least two small-cell radii. Raises
    InfeasibleConfigError when the sampler gives up.
    """
    cfg.validate()
    k = cfg.n_small_cells
    min_sep = 2 * cfg.small_radius_m
    sbs = np.empty((k, 2))
    placed = 0
    attempts = 0
    while placed < k:
        if attempts >= PLACEMENT_ATTEMPTS * k:
            raise InfeasibleConfigError(
                f"could not place {k} small cells of radius {cfg.small_radius_m} m "
                f"in a {cfg.macro_radius_m} m macrocell"
            )
        attempts += 1
        cand = _uniform_disk(rng, cfg.macro_radius_m, 1)[0]
        if placed and np.min(np.hypot(*(sbs[:placed] - cand).T)) < min_sep:
            continue
        sbs[placed] = cand
        placed += 1

    sue = sbs[:, None, :] + _uniform_disk(rng, cfg.small_radius_m, k * cfg.sues_per_cell).reshape(
        k, cfg.sues_per_cell, 2
    )
    mue = _uniform_disk(rng, cfg.macro_radius_m, cfg.n_mues)
    return Topology(mbs_pos=np.zeros(2), sbs_pos=sbs, mue_pos=mue, sue_pos=sue)


def large_scale_gain(cfg: NetworkConfig, topo: Topology) -> np.ndarray:
    """Linear path-loss and wall attenuation for every (tx, user) pair."""
    tx = topo.tx_positions()
    users = topo.user_positions()
    d = np.linalg.norm(tx[:, None, :] - users[None, :, :], axis=-1)
    loss_db = np.empty_like(d)
    loss_db[0] = cfg.pathloss_macro.loss_db(d[0])
    loss_db[1:] = cfg.pathloss_small.loss_db(d[1:])
    # Cross-tier links: MBS -> SUE and SBS -> MUE.
    n_sue = cfg.n_sues
    loss_db[0, :n_sue] += cfg.wall_loss_db
    loss_db[1:, n_sue:] += cfg.wall_loss_db
    return 10 ** (-loss_db / 10)


def sample_channels(cfg: NetworkConfig, topo: Topology, rng: np.random.Generator) -> ChannelRealization:
    """Draw unit-variance Rayleigh coefficients per (tx, user, band).

    The estimate starts out equal to the truth; see estimate_csi.
    """
    shape = (cfg.n_small_cells + 1, cfg.n_users, cfg.n_small_cells)
    fading = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return ChannelRealization(
        fading=fading,
        fading_est=fading,
        large_scale=large_scale_gain(cfg, topo),
        noise_power_w=cfg.noise_power_w,
    )


def estimate_csi(real: ChannelRealization, error_var: float, rng: np.random.Generator) -> ChannelRealization:
    """Return a copy whose estimate is h + e with e ~ CN(0, error_var)."""
    if not 0 <= error_var < 1:
        raise ConfigError("csi error variance must lie in [0, 1)")
    if error_var == 0:
        return replace(real, fading_est=real.fading, csi_error_var=0.0)
    shape = real.fading.shape
    err = np.sqrt(error_var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return replace(real, fading_est=real.fading + err, csi_error_var=float(error_var))
