"""SIC ordering, SINR, Shannon rates and energy efficiency on shared sub-bands."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig
from .topology import MBS, ChannelRealization

BUDGET_RTOL = 1e-12


class BudgetError(ValueError):
    """A power allocation exceeds a transmitter budget."""


@dataclass
class Assignment:
    """Which small cell and which MUEs share each sub-band.

    ``mues_of_band`` holds global user indices. ``sic_order`` is the decoding
    order the scheduler saw (estimated CSI); evaluation recomputes it from
    whichever gains it is given.
    """

    cell_of_band: list[int]
    mues_of_band: list[list[int]]
    sues_per_cell: int
    sic_order: list[list[int]] = field(default_factory=list)

    @property
    def n_bands(self) -> int:
        return len(self.cell_of_band)

    def sues_of_band(self, band: int) -> list[int]:
        f = self.sues_per_cell
        c = self.cell_of_band[band]
        return list(range(c * f, (c + 1) * f))

    def users_of_band(self, band: int) -> list[int]:
        return self.sues_of_band(band) + list(self.mues_of_band[band])

    def serving_tx(self, user: int) -> int:
        n_sue = self.n_bands * self.sues_per_cell
        return user // self.sues_per_cell + 1 if user < n_sue else MBS

    def band_of_user(self) -> dict[int, int]:
        out = {}
        for k in range(self.n_bands):
            for u in self.users_of_band(k):
                out[u] = k
        return out

    def validate(self, cfg: NetworkConfig) -> None:
        k = cfg.n_small_cells
        if sorted(self.cell_of_band) != list(range(k)):
            raise ValueError("cell_of_band must be a permutation of the small cells")
        if len(self.mues_of_band) != k:
            raise ValueError("mues_of_band needs one entry per band")
        seen: set[int] = set()
        for band, mues in enumerate(self.mues_of_band):
            if len(mues) > cfg.max_mues_per_band:
                raise ValueError(f"band {band} exceeds the MUE cap")
            for u in mues:
                if not cfg.n_sues <= u < cfg.n_users:
                    raise ValueError(f"user {u} is not an MUE")
                if u in seen:
                    raise ValueError(f"MUE {u} scheduled twice")
                seen.add(u)

    def copy(self) -> "Assignment":
        return Assignment(
            list(self.cell_of_band),
            [list(m) for m in self.mues_of_band],
            self.sues_per_cell,
            [list(o) for o in self.sic_order],
        )


@dataclass
class PowerAllocation:
    """Transmit power p[user, band] in watts from the user's serving BS."""

    p: np.ndarray

    def total(self) -> float:
        return float(self.p.sum())

    def check_budgets(self, cfg: NetworkConfig, assign: Assignment) -> None:
        """Raise BudgetError when any per-band or per-tier budget is exceeded."""
        if np.any(self.p < 0) or not np.all(np.isfinite(self.p)):
            raise BudgetError("powers must be finite and non-negative")
        cap = cfg.band_budget_w * (1 + BUDGET_RTOL)
        mbs_total = 0.0
        sbs_total = 0.0
        for k in range(assign.n_bands):
            sue = float(self.p[assign.sues_of_band(k), k].sum())
            mue = float(self.p[assign.mues_of_band[k], k].sum()) if assign.mues_of_band[k] else 0.0
            if sue > cap or mue > cap:
                raise BudgetError(f"band {k} exceeds its per-band budget")
            mbs_total += mue
            sbs_total += sue
        tier_cap = cfg.total_power_w / 2 * (1 + BUDGET_RTOL)
        if mbs_total > tier_cap or sbs_total > tier_cap:
            raise BudgetError("tier budget P_s/2 exceeded")
        if self.total() > (mbs_total + sbs_total) * (1 + BUDGET_RTOL) + 1e-300:
            raise BudgetError("power placed on users outside their band")


@dataclass
class TrialReport:
    rate_bps: np.ndarray
    sum_rate_bps: float
    tx_power_w: float
    circuit_power_w: float
    ee_bits_per_joule: float
    outage_flags: np.ndarray
    scheduled: np.ndarray
    infeasible: bool = False
    error: str = ""
    assignment: object = None

    @property
    def outage_frac(self) -> float:
        n = int(self.scheduled.sum())
        return float(self.outage_flags.sum()) / n if n else 0.0


def shannon_rate(sinr: float, bandwidth_hz: float) -> float:
    return bandwidth_hz * math.log2(1.0 + sinr)


def order_users(users, gains_band: np.ndarray, tx_of) -> list[int]:
    """Sort users by descending serving-link gain, ties to the lower index.

    Noise is common to every user of a band, so ordering on raw gain gives
    the same result as ordering on gain over noise.
    """
    return sorted(users, key=lambda u: (-gains_band[tx_of(u), u], u))


def sic_order(band: int, assign: Assignment, chan: ChannelRealization, use_estimated: bool = False) -> list[int]:
    g = chan.gains(use_estimated)[:, :, band]
    return order_users(assign.users_of_band(band), g, assign.serving_tx)


def sinr_in_order(order, powers, gains_band: np.ndarray, noise: float, tx_of) -> list[float]:
    """SINR of each user in a decoding order.

    ``powers`` is aligned with ``order``. User i sees every earlier (stronger)
    user's signal as interference; later ones are cancelled by SIC.
    """
    txs = [tx_of(u) for u in order]
    out = []
    for i, u in enumerate(order):
        interference = 0.0
        for j in range(i):
            interference += powers[j] * gains_band[txs[j], u]
        out.append(powers[i] * gains_band[txs[i], u] / (noise + interference))
    return out


def band_sinrs(
    band: int, assign: Assignment, power: PowerAllocation, chan: ChannelRealization, use_estimated: bool = False
) -> dict[int, float]:
    g = chan.gains(use_estimated)[:, :, band]
    order = order_users(assign.users_of_band(band), g, assign.serving_tx)
    powers = [float(power.p[u, band]) for u in order]
    return dict(zip(order, sinr_in_order(order, powers, g, chan.noise_power_w, assign.serving_tx)))


def sinr(
    user: int,
    band: int,
    assign: Assignment,
    power: PowerAllocation,
    chan: ChannelRealization,
    use_estimated: bool = False,
) -> float:
    sinrs = band_sinrs(band, assign, power, chan, use_estimated)
    if user not in sinrs:
        raise KeyError(f"user {user} is not scheduled on band {band}")
    return sinrs[user]


def user_rate(
    user: int,
    band: int | None,
    cfg: NetworkConfig,
    assign: Assignment,
    power: PowerAllocation,
    chan: ChannelRealization,
    use_estimated: bool = False,
) -> float:
    """Shannon rate over B/K; zero for a user that is not scheduled."""
    if band is None or user not in assign.users_of_band(band):
        return 0.0
    return shannon_rate(sinr(user, band, assign, power, chan, use_estimated), cfg.band_bandwidth_hz)


def user_rates(
    cfg: NetworkConfig,
    assign: Assignment,
    power: PowerAllocation,
    chan: ChannelRealization,
    use_estimated: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Rates of all users and the scheduled mask."""
    rates = np.zeros(cfg.n_users)
    scheduled = np.zeros(cfg.n_users, dtype=bool)
    bw = cfg.band_bandwidth_hz
    for k in range(assign.n_bands):
        for u, s in band_sinrs(k, assign, power, chan, use_estimated).items():
            rates[u] = shannon_rate(s, bw)
            scheduled[u] = True
    return rates, scheduled


def energy_efficiency(
    cfg: NetworkConfig,
    assign: Assignment,
    power: PowerAllocation,
    chan: ChannelRealization,
    use_estimated: bool = False,
) -> TrialReport:
    """Evaluate rates, power and bits-per-Joule for one allocation.

    Realized performance is measured on the true gains unless
    ``use_estimated`` is set. Budgets are checked on every call.
    """
    power.check_budgets(cfg, assign)
    rates, scheduled = user_rates(cfg, assign, power, chan, use_estimated)
    return make_report(cfg, rates, scheduled, power.total())


def make_report(cfg: NetworkConfig, rates: np.ndarray, scheduled: np.ndarray, tx_power: float) -> TrialReport:
    sum_rate = float(rates.sum())
    circuit = cfg.circuit_power_w
    denom = tx_power + circuit
    ee = sum_rate / denom if denom > 0 else 0.0
    outage = scheduled & (rates < cfg.rate_min_bps)
    return TrialReport(
        rate_bps=rates,
        sum_rate_bps=sum_rate,
        tx_power_w=float(tx_power),
        circuit_power_w=circuit,
        ee_bits_per_joule=ee,
        outage_flags=outage,
        scheduled=scheduled,
    )
