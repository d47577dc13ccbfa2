"""Orthogonal baseline: every sub-band has exactly one owner, no cross-tier sharing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig
from .noma import BUDGET_RTOL, BudgetError, PowerAllocation, TrialReport, make_report
from .scheduling import cell_band_gains
from .topology import MBS, ChannelRealization, sues_of_cell

CELL = "cell"
MUE = "mue"


@dataclass
class OfdmaAssignment:
    """owner_of_band[k] is (CELL, cell index) or (MUE, global user index)."""

    owner_of_band: list[tuple[str, int]]
    sues_per_cell: int

    def users_of_band(self, band: int) -> list[int]:
        kind, idx = self.owner_of_band[band]
        if kind == CELL:
            f = self.sues_per_cell
            return list(range(idx * f, (idx + 1) * f))
        return [idx]


def ofdma_schedule(cfg: NetworkConfig, chan: ChannelRealization) -> OfdmaAssignment:
    """Greedy exclusive ownership over estimated gains.

    Candidate owners are the K small cells (mean SUE serving gain) and the M
    MUEs (MBS gain). Ties go to the lower owner index (cells first), then
    the lower band.
    """
    k_bands = cfg.n_small_cells
    scores = np.vstack([cell_band_gains(cfg, chan), chan.gain_est[MBS, cfg.n_sues :, :]])
    pairs = sorted((-scores[o, k], o, k) for o in range(scores.shape[0]) for k in range(k_bands))
    owner_of_band: list[tuple[str, int] | None] = [None] * k_bands
    used: set[int] = set()
    filled = 0
    for _, o, k in pairs:
        if o in used or owner_of_band[k] is not None:
            continue
        owner_of_band[k] = (CELL, o) if o < k_bands else (MUE, cfg.n_sues + o - k_bands)
        used.add(o)
        filled += 1
        if filled == k_bands:
            break
    return OfdmaAssignment(owner_of_band, cfg.sues_per_cell)


def ofdma_band_budget(cfg: NetworkConfig) -> float:
    """Power carried by one orthogonal sub-band, P_s/K.

    A NOMA band carries P_s/(2K) from the MBS plus P_s/(2K) from its SBS; the
    single OFDMA owner gets the same total so both schemes radiate P_s.
    """
    return cfg.total_power_w / cfg.n_small_cells


def ofdma_equal_power(cfg: NetworkConfig, assign: OfdmaAssignment) -> PowerAllocation:
    """Each owner spends the band's P_s/K; a cell splits it equally over its SUEs."""
    p = np.zeros((cfg.n_users, cfg.n_small_cells))
    budget = ofdma_band_budget(cfg)
    for k in range(cfg.n_small_cells):
        users = assign.users_of_band(k)
        p[users, k] = budget / len(users)
    return PowerAllocation(p)


def check_ofdma_budgets(cfg: NetworkConfig, assign: OfdmaAssignment, power: PowerAllocation) -> None:
    if np.any(power.p < 0):
        raise BudgetError("powers must be non-negative")
    cap = ofdma_band_budget(cfg) * (1 + BUDGET_RTOL)
    for k in range(cfg.n_small_cells):
        if power.p[assign.users_of_band(k), k].sum() > cap:
            raise BudgetError(f"band {k} exceeds its per-band budget")
    if power.total() > cfg.total_power_w * (1 + BUDGET_RTOL):
        raise BudgetError("system power P_s exceeded")


def ofdma_link_terms(
    cfg: NetworkConfig, assign: OfdmaAssignment, power: PowerAllocation, chan: ChannelRealization, use_estimated: bool = False
) -> dict[int, tuple[float, float, float, float]]:
    """(signal, interference, noise, bandwidth) for each served user.

    SUEs of an owning cell get B/(K*F) each with proportionally less noise.
    Interference is zero by construction.
    """
    g = chan.gains(use_estimated)
    out = {}
    for k, (kind, idx) in enumerate(assign.owner_of_band):
        if kind == CELL:
            f = cfg.sues_per_cell
            for u in sues_of_cell(cfg, idx):
                out[u] = (power.p[u, k] * g[idx + 1, u, k], 0.0, chan.noise_power_w / f, cfg.band_bandwidth_hz / f)
        else:
            out[idx] = (power.p[idx, k] * g[MBS, idx, k], 0.0, chan.noise_power_w, cfg.band_bandwidth_hz)
    return out


def ofdma_rates(
    cfg: NetworkConfig, assign: OfdmaAssignment, power: PowerAllocation, chan: ChannelRealization, use_estimated: bool = False
) -> TrialReport:
    check_ofdma_budgets(cfg, assign, power)
    rates = np.zeros(cfg.n_users)
    scheduled = np.zeros(cfg.n_users, dtype=bool)
    for u, (s, i, n, bw) in ofdma_link_terms(cfg, assign, power, chan, use_estimated).items():
        rates[u] = bw * math.log2(1 + s / (n + i))
        scheduled[u] = True
    return make_report(cfg, rates, scheduled, power.total())
