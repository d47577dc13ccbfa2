import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ncx2

from nomahetnet.config import NetworkConfig
from nomahetnet.harness import draw_channels
from nomahetnet.noma import Assignment
from nomahetnet.power import (
    EECurve,
    OutageInfeasibleError,
    bisect_scale,
    ee_curve,
    ee_power_bisection,
    equal_power,
    ftpa,
    ftpa_fractions,
    gain_quantile,
    min_scale,
    outage_min_power,
    post_sic_interference,
    sinr_target,
)
from nomahetnet.scheduling import schedule


def test_equal_power_two_mues():
    cfg = NetworkConfig(n_small_cells=10, n_mues=2, total_power_w=20.0)
    mues = [[] for _ in range(10)]
    mues[3] = [cfg.n_sues, cfg.n_sues + 1]
    assign = Assignment(list(range(10)), mues, cfg.sues_per_cell)
    p = equal_power(cfg, assign).p
    assert p[cfg.n_sues :, 3].tolist() == [0.5, 0.5]
    assert p[cfg.n_sues :, :3].sum() == 0.0  # bands without MUEs: no MBS power
    assert p.sum() == pytest.approx(cfg.total_power_w / 2 + cfg.band_budget_w, rel=1e-12)


def random_instance(seed, k=3, m=5, var=0.0, f=2):
    cfg = NetworkConfig(n_small_cells=k, n_mues=m, sues_per_cell=f, csi_error_var=var)
    _, chan = draw_channels(cfg, seed)
    return cfg, chan, schedule(cfg, chan)


def test_ftpa_alpha_zero_is_equal_power():
    cfg, chan, assign = random_instance(0)
    cfg = cfg.replace(ftpa_alpha=0.0)
    np.testing.assert_allclose(ftpa(cfg, assign, chan).p, equal_power(cfg, assign).p, rtol=1e-15)


def test_ftpa_two_users_closed_form():
    np.testing.assert_allclose(ftpa_fractions(np.array([1.0, 4.0]), 1.0), [0.8, 0.2], rtol=1e-15)


@settings(max_examples=1000, deadline=None)
@given(
    gains=st.lists(st.floats(1e-3, 1e6), min_size=2, max_size=6),
    alpha=st.sampled_from([0.2, 0.4, 0.6, 0.8, 1.0]),
)
def test_ftpa_weaker_gets_more(gains, alpha):
    w = ftpa_fractions(np.array(gains), alpha)
    assert abs(w.sum() - 1.0) <= 1e-12
    for i in range(len(gains)):
        for j in range(len(gains)):
            if gains[i] < gains[j]:
                assert w[i] >= w[j]


def _budget_sums(cfg, assign, p):
    for k in range(cfg.n_small_cells):
        yield p[assign.sues_of_band(k), k].sum()
        if assign.mues_of_band[k]:
            yield p[assign.mues_of_band[k], k].sum()


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(1, 6), m=st.integers(0, 14), alpha=st.floats(0.0, 1.0))
def test_policies_saturate_budgets(seed, k, m, alpha):
    cfg, chan, assign = random_instance(seed, k, m)
    cfg = cfg.replace(ftpa_alpha=alpha)
    for policy in (equal_power, lambda c, a: ftpa(c, a, chan)):
        power = policy(cfg, assign)
        power.check_budgets(cfg, assign)
        for s in _budget_sums(cfg, assign, power.p):
            assert s == pytest.approx(cfg.band_budget_w, rel=1e-12)


@pytest.mark.parametrize("var", [0.01, 0.05, 0.1])
@pytest.mark.parametrize("eps", [0.01, 0.1, 0.5])
def test_quantile_matches_scipy(var, eps):
    rng = np.random.default_rng(1)
    ls = 10 ** rng.uniform(-12, -6, 50)
    est = ls * rng.exponential(1.0, 50)
    q = gain_quantile(est, ls, var, eps)
    ref = ncx2.ppf(eps, 2, est / ls / (var / 2)) * (var / 2) * ls
    np.testing.assert_allclose(q, ref, rtol=1e-7)


def test_zero_error_floors_exact():
    cfg, chan, assign = random_instance(2)
    tent = equal_power(cfg, assign)
    floors = outage_min_power(cfg, assign, chan, tent)
    interference = post_sic_interference(cfg, assign, chan, tent)
    band = assign.band_of_user()
    for u, k in band.items():
        g = chan.gain_est[assign.serving_tx(u), u, k]
        expected = (2 ** (cfg.rate_min_bps * cfg.n_small_cells / cfg.bandwidth_hz) - 1) * (chan.noise_power_w + interference[u]) / g
        assert floors[u] == pytest.approx(expected, rel=1e-12)


def test_floors_sound_by_monte_carlo():
    cfg, chan, assign = random_instance(3, k=2, m=4, var=0.05)
    tent = equal_power(cfg, assign)
    floors = outage_min_power(cfg, assign, chan, tent)
    interference = post_sic_interference(cfg, assign, chan, tent)
    rng = np.random.default_rng(0)
    n = 200_000
    for u, k in assign.band_of_user().items():
        tx = assign.serving_tx(u)
        e = rng.normal(scale=np.sqrt(0.025), size=(n, 2)) @ np.array([1, 1j])
        gain = np.abs(chan.fading_est[tx, u, k] - e) ** 2 * chan.large_scale[tx, u]
        sinr = floors[u] * gain / (chan.noise_power_w + interference[u])
        outage = np.mean(sinr < sinr_target(cfg))
        se = np.sqrt(cfg.outage_eps * (1 - cfg.outage_eps) / n)
        assert outage <= cfg.outage_eps + 3 * se


def test_floors_non_increasing_in_eps():
    cfg, chan, assign = random_instance(4, var=0.05)
    tent = equal_power(cfg, assign)
    prev = None
    for eps in [0.01, 0.05, 0.1, 0.2, 0.4, 0.8]:
        f = outage_min_power(cfg.replace(outage_eps=eps), assign, chan, tent)
        if prev is not None:
            assert np.all(f <= prev * (1 + 1e-9))
        prev = f


def test_infeasible_floors():
    cfg, chan, assign = random_instance(5)
    cfg = cfg.replace(rate_min_bps=5e7)
    with pytest.raises(OutageInfeasibleError):
        outage_min_power(cfg, assign, chan, equal_power(cfg, assign))


def test_theta_above_one_raises():
    cfg, chan, assign = random_instance(6)
    base = ftpa(cfg, assign, chan)
    floors = base.p.sum(axis=1) * 1.5
    with pytest.raises(OutageInfeasibleError):
        ee_power_bisection(cfg, assign, chan, floors, base)


def _curve(rng, circuit=1.0, n=6):
    return EECurve(
        signal=10 ** rng.uniform(-2, 6, n),
        interference=10 ** rng.uniform(-4, 2, n) * (rng.random(n) < 0.6),
        noise=1.0,
        bandwidth_hz=1e6,
        circuit_w=circuit,
        spent_w=float(rng.uniform(1, 20)),
    )


def test_large_circuit_spends_full_budget():
    c = _curve(np.random.default_rng(0), circuit=1e9)
    assert c.slope(0.5) > 0
    assert bisect_scale(c, c.slope, 0.01, 1.0) == 1.0


def test_binding_floor_returns_theta_min():
    c = EECurve(np.array([1e8]), np.array([0.0]), 1.0, 1e6, 0.01, 10.0)
    assert c.slope(0.3) < 0
    assert bisect_scale(c, c.slope, 0.3, 1.0) == 0.3


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6), circuit=st.floats(0.01, 10.0), lo=st.floats(0.0, 0.9))
def test_bisection_beats_grid_and_samples(seed, circuit, lo):
    rng = np.random.default_rng(seed)
    c = _curve(rng, circuit)
    theta = bisect_scale(c, c.slope, lo, 1.0)
    grid = np.linspace(lo, 1.0, 10_000)
    vals = c(grid)
    assert abs(theta - grid[np.argmax(vals)]) <= 1e-3
    assert c(theta) >= vals.max() * (1 - 1e-6)
    samples = rng.uniform(lo, 1.0, 200)
    assert c(theta) >= c(samples).max() * (1 - 1e-12)
    assert c(theta) >= max(c(lo), c(1.0)) - 1e-9


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_ee_curve_single_sign_change(seed):
    cfg, chan, assign = random_instance(seed % 1000, k=4, m=8, var=0.05)
    c = ee_curve(cfg, assign, chan, ftpa(cfg, assign, chan))
    signs = np.sign([c.slope(t) for t in np.linspace(0.01, 1.0, 200)])
    signs = signs[signs != 0]
    assert np.count_nonzero(np.diff(signs)) <= 1


def test_bisection_output_respects_budgets_and_floors():
    cfg, chan, assign = random_instance(7, k=4, m=8, var=0.05)
    floors = outage_min_power(cfg, assign, chan, equal_power(cfg, assign))
    base = ftpa(cfg, assign, chan)
    power = ee_power_bisection(cfg, assign, chan, floors, base)
    power.check_budgets(cfg, assign)
    assert np.all(power.p.sum(axis=1) >= floors * (1 - 1e-9))
    theta = power.total() / base.total()
    assert min_scale(base, floors) <= theta * (1 + 1e-12)
