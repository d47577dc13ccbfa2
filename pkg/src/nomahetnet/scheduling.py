"""Two-stage user scheduling and an exhaustive reference search.

All decisions use estimated CSI and the equal-power assumption: each SBS
splits P_s/(2K) over its SUEs and the MBS splits the same per-band amount
over the MUEs it places on a band.
"""

from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np

from .config import NetworkConfig
from .noma import Assignment, order_users, sinr_in_order
from .topology import MBS, ChannelRealization

EXHAUSTIVE_LIMITS = {"n_small_cells": 4, "n_mues": 6, "sues_per_cell": 2}

_AGGREGATORS = {"mean": np.mean, "min": np.min, "max": np.max}


class InstanceTooLargeError(ValueError):
    pass


def cell_band_gains(cfg: NetworkConfig, chan: ChannelRealization, aggregate: str = "mean") -> np.ndarray:
    """Representative (cell, band) gain: aggregate of the cell's SUE serving gains."""
    g = chan.gain_est
    f = cfg.sues_per_cell
    reduce = _AGGREGATORS[aggregate]
    out = np.empty((cfg.n_small_cells, cfg.n_small_cells))
    for c in range(cfg.n_small_cells):
        out[c] = reduce(g[c + 1, c * f : (c + 1) * f, :], axis=0)
    return out


def greedy_bijection(score: np.ndarray) -> list[int]:
    """Repeatedly take the highest unmatched (row, col) pair.

    Returns row_of_col. Ties go to the lower (row, col) index.
    """
    n = score.shape[0]
    pairs = sorted(((-score[r, c], r, c) for r in range(n) for c in range(n)))
    row_of_col = [-1] * n
    used_rows: set[int] = set()
    for _, r, c in pairs:
        if r in used_rows or row_of_col[c] >= 0:
            continue
        row_of_col[c] = r
        used_rows.add(r)
        if len(used_rows) == n:
            break
    return row_of_col


def schedule_small_cells(cfg: NetworkConfig, chan: ChannelRealization, aggregate: str = "mean") -> Assignment:
    cell_of_band = greedy_bijection(cell_band_gains(cfg, chan, aggregate))
    assign = Assignment(cell_of_band, [[] for _ in range(cfg.n_small_cells)], cfg.sues_per_cell)
    refresh_sic_order(assign, chan)
    return assign


def refresh_sic_order(assign: Assignment, chan: ChannelRealization) -> None:
    g = chan.gain_est
    assign.sic_order = [
        order_users(assign.users_of_band(k), g[:, :, k], assign.serving_tx) for k in range(assign.n_bands)
    ]


def band_rate_and_power(
    cfg: NetworkConfig, chan: ChannelRealization, band: int, cell: int, mues
) -> tuple[float, float]:
    """Sum rate and transmit power of one band under equal power, estimated CSI."""
    f = cfg.sues_per_cell
    budget = cfg.band_budget_w
    g = chan.gain_est[:, :, band]
    sues = range(cell * f, (cell + 1) * f)
    n_sue = cfg.n_sues

    def tx_of(u):
        return u // f + 1 if u < n_sue else MBS

    users = list(sues) + list(mues)
    order = order_users(users, g, tx_of)
    p_mue = budget / len(mues) if mues else 0.0
    powers = [budget / f if u < n_sue else p_mue for u in order]
    sinrs = sinr_in_order(order, powers, g, chan.noise_power_w, tx_of)
    rate = cfg.band_bandwidth_hz * sum(math.log2(1 + s) for s in sinrs)
    return rate, budget * (2 if mues else 1)


def band_ee(cfg: NetworkConfig, chan: ChannelRealization, band: int, cell: int, mues) -> float:
    rate, tx = band_rate_and_power(cfg, chan, band, cell, mues)
    return rate / (tx + cfg.circuit_power_per_band_w)


def system_ee(cfg: NetworkConfig, chan: ChannelRealization, assign: Assignment) -> float:
    """Scheduling objective: system EE under equal power on estimated CSI."""
    rate = 0.0
    tx = 0.0
    for k, cell in enumerate(assign.cell_of_band):
        r, p = band_rate_and_power(cfg, chan, k, cell, assign.mues_of_band[k])
        rate += r
        tx += p
    return rate / (tx + cfg.circuit_power_w)


def mue_preferences(cfg: NetworkConfig, chan: ChannelRealization) -> dict[int, list[int]]:
    """Bands in decreasing MBS gain for every MUE (global index), ties to the lower band."""
    g = chan.gain_est[MBS]
    prefs = {}
    for u in range(cfg.n_sues, cfg.n_users):
        prefs[u] = sorted(range(cfg.n_small_cells), key=lambda k: (-g[u, k], k))
    return prefs


def schedule_mues(
    cfg: NetworkConfig, chan: ChannelRealization, partial: Assignment, stats: dict | None = None
) -> Assignment:
    """Place MUEs on the occupied bands by deferred acceptance.

    A full band takes a proposer only if swapping it for one incumbent raises
    the band EE; the displaced MUE moves on down its own list. Every MUE
    proposes to each band at most once, so there are at most M*K proposals.
    MUEs that run out of bands stay unscheduled.
    """
    assign = partial.copy()
    prefs = mue_preferences(cfg, chan)
    nxt = {u: 0 for u in prefs}
    queue = deque(u for u in prefs if not any(u in m for m in assign.mues_of_band))
    cap = cfg.max_mues_per_band
    proposals = 0
    while queue:
        u = queue.popleft()
        while nxt[u] < cfg.n_small_cells:
            k = prefs[u][nxt[u]]
            nxt[u] += 1
            proposals += 1
            on_band = assign.mues_of_band[k]
            if len(on_band) < cap:
                on_band.append(u)
                break
            cell = assign.cell_of_band[k]
            best_ee = band_ee(cfg, chan, k, cell, on_band)
            best_slot = None
            for slot in range(len(on_band)):
                trial = on_band[:slot] + [u] + on_band[slot + 1 :]
                ee = band_ee(cfg, chan, k, cell, trial)
                if ee > best_ee:
                    best_ee, best_slot = ee, slot
            if best_slot is not None:
                displaced = on_band[best_slot]
                on_band[best_slot] = u
                queue.appendleft(displaced)
                break
    refresh_sic_order(assign, chan)
    if stats is not None:
        stats["proposals"] = proposals
    return assign


def schedule(cfg: NetworkConfig, chan: ChannelRealization, stats: dict | None = None) -> Assignment:
    return schedule_mues(cfg, chan, schedule_small_cells(cfg, chan), stats)


def _check_small(cfg: NetworkConfig) -> None:
    for name, limit in EXHAUSTIVE_LIMITS.items():
        if getattr(cfg, name) > limit:
            raise InstanceTooLargeError(f"exhaustive search needs {name} <= {limit}")


def enumerate_candidates(n_cells: int, n_mues: int, cap: int):
    """Yield (cell_of_band, band_of_mue) in lexicographic order.

    band_of_mue uses ``n_cells`` to mean "not scheduled".
    """
    for perm in itertools.permutations(range(n_cells)):
        for mapping in itertools.product(range(n_cells + 1), repeat=n_mues):
            if all(mapping.count(k) <= cap for k in range(n_cells)):
                yield perm, mapping


def exhaustive_schedule(cfg: NetworkConfig, chan: ChannelRealization, stats: dict | None = None) -> Assignment:
    """Best equal-power system EE over every feasible assignment (small instances only)."""
    _check_small(cfg)
    k_bands = cfg.n_small_cells
    cache: dict = {}

    def band_terms(k, cell, mues):
        key = (k, cell, mues)
        if key not in cache:
            cache[key] = band_rate_and_power(cfg, chan, k, cell, mues)
        return cache[key]

    best = None
    best_ee = -np.inf
    count = 0
    for perm, mapping in enumerate_candidates(k_bands, cfg.n_mues, cfg.max_mues_per_band):
        count += 1
        rate = 0.0
        tx = 0.0
        for k in range(k_bands):
            mues = tuple(cfg.n_sues + m for m, b in enumerate(mapping) if b == k)
            r, p = band_terms(k, perm[k], mues)
            rate += r
            tx += p
        ee = rate / (tx + cfg.circuit_power_w)
        if ee > best_ee:
            best_ee, best = ee, (perm, mapping)
    perm, mapping = best
    mues_of_band = [[cfg.n_sues + m for m, b in enumerate(mapping) if b == k] for k in range(k_bands)]
    assign = Assignment(list(perm), mues_of_band, cfg.sues_per_cell)
    refresh_sic_order(assign, chan)
    if stats is not None:
        stats["candidates"] = count
    return assign
