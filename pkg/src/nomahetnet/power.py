"""Power policies: equal split, FTPA, outage floors and EE bisection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import chndtr

from .config import NetworkConfig
from .noma import Assignment, PowerAllocation, order_users
from .topology import ChannelRealization

QUANTILE_TOL = 1e-9
BISECT_TOL = 1e-6
FD_REL_STEP = 1e-6


class OutageInfeasibleError(RuntimeError):
    """The outage floors cannot be met within the transmit budgets."""


def _groups(assign: Assignment):
    """Yield (band, users) for each transmitter's user set on each band."""
    for k in range(assign.n_bands):
        yield k, assign.sues_of_band(k)
        if assign.mues_of_band[k]:
            yield k, list(assign.mues_of_band[k])


def equal_power(cfg: NetworkConfig, assign: Assignment) -> PowerAllocation:
    p = np.zeros((cfg.n_users, cfg.n_small_cells))
    budget = cfg.band_budget_w
    for k, users in _groups(assign):
        p[users, k] = budget / len(users)
    return PowerAllocation(p)


def ftpa_fractions(gains: np.ndarray, alpha: float) -> np.ndarray:
    """Normalized g^-alpha weights; weaker users get the larger share."""
    w = np.asarray(gains, dtype=float) ** (-alpha)
    return w / w.sum()


def ftpa(cfg: NetworkConfig, assign: Assignment, chan: ChannelRealization, use_estimated: bool = True) -> PowerAllocation:
    """Fractional transmit power allocation inside every per-band budget."""
    g = chan.gains(use_estimated)
    noise = chan.noise_power_w
    p = np.zeros((cfg.n_users, cfg.n_small_cells))
    budget = cfg.band_budget_w
    for k, users in _groups(assign):
        tx = assign.serving_tx(users[0])
        p[users, k] = budget * ftpa_fractions(g[tx, users, k] / noise, cfg.ftpa_alpha)
    return PowerAllocation(p)


def gain_quantile(gain_est, large_scale, error_var: float, eps: float) -> np.ndarray:
    """eps-quantile of the true gain given its estimate.

    The true coefficient is modeled as h = h_est - e with e ~ CN(0, error_var),
    so |h|^2 / (error_var/2) is noncentral chi-square with 2 degrees of
    freedom and noncentrality |h_est|^2 / (error_var/2). The quantile is
    bracketed and bisected on the CDF, vectorized over all entries.
    """
    gain_est = np.asarray(gain_est, dtype=float)
    if error_var == 0:
        return gain_est.copy()
    large_scale = np.broadcast_to(np.asarray(large_scale, dtype=float), gain_est.shape)
    half = error_var / 2
    nc = gain_est / large_scale / half
    lo = np.zeros_like(nc)
    hi = 2 + nc + 20 * np.sqrt(4 + 4 * nc) + 10
    while np.any(hi - lo > QUANTILE_TOL * np.maximum(1.0, hi)):
        mid = 0.5 * (lo + hi)
        below = chndtr(mid, 2, nc) < eps
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi) * half * large_scale


def sinr_target(cfg: NetworkConfig) -> float:
    return 2 ** (cfg.rate_min_bps / cfg.band_bandwidth_hz) - 1


def post_sic_interference(
    cfg: NetworkConfig, assign: Assignment, chan: ChannelRealization, power: PowerAllocation, use_estimated: bool = True
) -> np.ndarray:
    """Interference left after SIC for every scheduled user, shape (U,)."""
    g_all = chan.gains(use_estimated)
    out = np.zeros(cfg.n_users)
    for k in range(assign.n_bands):
        g = g_all[:, :, k]
        order = order_users(assign.users_of_band(k), g, assign.serving_tx)
        acc = []
        for u in order:
            out[u] = sum(pv * g[tv, u] for pv, tv in acc)
            acc.append((power.p[u, k], assign.serving_tx(u)))
    return out


def outage_min_power(
    cfg: NetworkConfig, assign: Assignment, chan: ChannelRealization, tentative: PowerAllocation
) -> np.ndarray:
    """Per-user power floors (U,) that keep Pr(rate < R_min | estimate) <= eps.

    Interference is frozen at its level under ``tentative``; this is a single
    pass, not a fixed point. Raises OutageInfeasibleError when the floors of
    one transmitter on one band do not fit in its budget.
    """
    floors = np.zeros(cfg.n_users)
    gamma = sinr_target(cfg)
    if gamma == 0:
        return floors
    interference = post_sic_interference(cfg, assign, chan, tentative)
    groups = list(_groups(assign))
    users = [u for _, us in groups for u in us]
    bands = [k for k, us in groups for _ in us]
    txs = [assign.serving_tx(u) for u in users]
    q = gain_quantile(chan.gain_est[txs, users, bands], chan.large_scale[txs, users], chan.csi_error_var, cfg.outage_eps)
    with np.errstate(divide="ignore"):
        floors[users] = gamma * (chan.noise_power_w + interference[users]) / q
    for k, us in groups:
        total = floors[us].sum()
        if not total <= cfg.band_budget_w * (1 + 1e-12):
            raise OutageInfeasibleError(f"outage floors on band {k} need {total:.4g} W")
    return floors


@dataclass
class EECurve:
    """EE of a frozen allocation scaled by theta, evaluated on one CSI view."""

    signal: np.ndarray
    interference: np.ndarray
    noise: float
    bandwidth_hz: float
    circuit_w: float
    spent_w: float

    def rate(self, theta):
        theta = np.asarray(theta, dtype=float)[..., None]
        sinr = theta * self.signal / (self.noise + theta * self.interference)
        return self.bandwidth_hz * np.log2(1 + sinr).sum(axis=-1)

    def __call__(self, theta):
        return self.rate(theta) / (self.circuit_w + np.asarray(theta, dtype=float) * self.spent_w)

    def slope(self, theta: float) -> float:
        h = FD_REL_STEP * max(theta, 1e-6)
        return float((self(theta + h) - self(theta - h)) / (2 * h))


def ee_curve(cfg: NetworkConfig, assign: Assignment, chan: ChannelRealization, base: PowerAllocation) -> EECurve:
    """Build EE(theta) for powers theta * base, using estimated gains."""
    g = chan.gain_est
    interference = post_sic_interference(cfg, assign, chan, base)
    band = assign.band_of_user()
    users = sorted(band)
    signal = np.array([base.p[u, band[u]] * g[assign.serving_tx(u), u, band[u]] for u in users])
    return EECurve(
        signal=signal,
        interference=interference[users],
        noise=chan.noise_power_w,
        bandwidth_hz=cfg.band_bandwidth_hz,
        circuit_w=cfg.circuit_power_w,
        spent_w=base.total(),
    )


def min_scale(base: PowerAllocation, floors: np.ndarray) -> float:
    """Smallest theta with theta * base >= floors for every user."""
    base_u = base.p.sum(axis=1)
    need = floors > 0
    if np.any(need & (base_u <= 0)):
        return np.inf
    if not np.any(need):
        return 0.0
    return float(np.max(floors[need] / base_u[need]))


def bisect_scale(curve: Callable[[float], float], slope: Callable[[float], float], lo: float, hi: float = 1.0) -> float:
    """Maximize a quasi-concave EE(theta) on [lo, hi] by bisecting the sign of its slope."""
    if slope(hi) >= 0:
        best = hi
    elif slope(lo) <= 0:
        best = lo
    else:
        a, b = lo, hi
        while b - a > BISECT_TOL:
            mid = 0.5 * (a + b)
            if slope(mid) > 0:
                a = mid
            else:
                b = mid
        best = 0.5 * (a + b)
    # Guard the boundary values against finite-difference noise.
    return max((best, lo, hi), key=lambda t: float(curve(t)))


def ee_power_bisection(
    cfg: NetworkConfig,
    assign: Assignment,
    chan: ChannelRealization,
    floors: np.ndarray | None = None,
    base: PowerAllocation | None = None,
) -> PowerAllocation:
    """Scale the full-budget FTPA allocation to the EE-maximizing level.

    The search runs over theta in [theta_min, 1] where theta_min is the
    smallest scale meeting the per-user floors.
    """
    if base is None:
        base = ftpa(cfg, assign, chan)
    if floors is None:
        floors = np.zeros(cfg.n_users)
    lo = min_scale(base, floors)
    if lo > 1 + 1e-12:
        raise OutageInfeasibleError(f"floors need theta_min = {lo:.4g} > 1")
    lo = min(lo, 1.0)
    curve = ee_curve(cfg, assign, chan, base)
    theta = bisect_scale(curve, curve.slope, lo, 1.0)
    return PowerAllocation(theta * base.p)
