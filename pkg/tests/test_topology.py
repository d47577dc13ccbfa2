import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nomahetnet.config import ConfigError, NetworkConfig, PathLoss
from nomahetnet.harness import draw_channels
from nomahetnet.topology import (
    InfeasibleConfigError,
    Topology,
    estimate_csi,
    generate_topology,
    large_scale_gain,
    sample_channels,
)


def test_zero_small_cells_rejected():
    with pytest.raises(ConfigError):
        NetworkConfig(n_small_cells=0)


def test_degenerate_single_cell(rng):
    cfg = NetworkConfig(n_small_cells=1, n_mues=0, sues_per_cell=1)
    topo = generate_topology(cfg, rng)
    assert topo.sbs_pos.shape == (1, 2)
    assert topo.mue_pos.shape == (0, 2)
    assert topo.sue_pos.shape == (1, 1, 2)
    assert np.linalg.norm(topo.sue_pos[0, 0] - topo.sbs_pos[0]) <= cfg.small_radius_m


def test_sbs_separation_over_many_seeds():
    cfg = NetworkConfig(n_small_cells=4, macro_radius_m=500.0, small_radius_m=30.0)
    for seed in range(1000):
        sbs = generate_topology(cfg, np.random.default_rng(seed)).sbs_pos
        d = np.linalg.norm(sbs[:, None] - sbs[None], axis=-1)
        assert d[np.triu_indices(4, 1)].min() >= 60.0


def test_placement_inside_disks(rng):
    cfg = NetworkConfig(n_small_cells=8, n_mues=30, sues_per_cell=3)
    for _ in range(50):
        topo = generate_topology(cfg, rng)
        assert np.all(np.linalg.norm(topo.mue_pos, axis=1) <= cfg.macro_radius_m)
        assert np.all(np.linalg.norm(topo.sbs_pos, axis=1) <= cfg.macro_radius_m)
        d = np.linalg.norm(topo.sue_pos - topo.sbs_pos[:, None, :], axis=-1)
        assert np.all(d <= cfg.small_radius_m)
        assert np.array_equal(topo.mbs_pos, [0.0, 0.0])


def test_infeasible_packing():
    cfg = NetworkConfig(n_small_cells=20, macro_radius_m=100.0, small_radius_m=50.0)
    with pytest.raises(InfeasibleConfigError):
        generate_topology(cfg, np.random.default_rng(0))


def _colocated(n_sue_cells, n_mues):
    return Topology(
        mbs_pos=np.zeros(2),
        sbs_pos=np.zeros((n_sue_cells, 2)),
        mue_pos=np.zeros((n_mues, 2)),
        sue_pos=np.zeros((n_sue_cells, 1, 2)),
    )


def test_unit_variance_fading():
    flat = PathLoss(0.0, 0.0)
    cfg = NetworkConfig(
        n_small_cells=1, sues_per_cell=1, n_mues=49_999, pathloss_macro=flat, pathloss_small=flat, wall_loss_db=0.0
    )
    chan = sample_channels(cfg, _colocated(1, cfg.n_mues), np.random.default_rng(1))
    g = chan.gain_true
    assert g.size == 100_000
    assert np.allclose(chan.large_scale, 1.0)
    assert g.mean() == pytest.approx(1.0, rel=0.02)


def test_distance_doubling_mean_gain():
    # Monte Carlo mean-gain ratio against the closed-form log-distance slope.
    n = 100_000
    cfg = NetworkConfig(n_small_cells=1, sues_per_cell=1, n_mues=n, wall_loss_db=0.0)
    mue = np.zeros((n, 2))
    mue[: n // 2, 0] = 100.0
    mue[n // 2 :, 0] = 200.0
    topo = Topology(np.zeros(2), np.array([[0.0, 300.0]]), mue, np.array([[[0.0, 310.0]]]))
    chan = sample_channels(cfg, topo, np.random.default_rng(2))
    g = chan.gain_true[0, cfg.n_sues :, 0]
    ratio_db = 10 * np.log10(g[: n // 2].mean() / g[n // 2 :].mean())
    assert ratio_db == pytest.approx(37.6 * np.log10(2), abs=0.1)


def test_wall_loss_on_cross_tier_links():
    cfg = NetworkConfig(n_small_cells=1, sues_per_cell=1, n_mues=1, wall_loss_db=20.0)
    # SUE and MUE share a position, so only the wall separates their links.
    topo = Topology(np.zeros(2), np.array([[100.0, 0.0]]), np.array([[150.0, 0.0]]), np.array([[[150.0, 0.0]]]))
    ls = large_scale_gain(cfg, topo)
    sue, mue = 0, 1
    assert ls[0, mue] / ls[0, sue] == pytest.approx(100.0, rel=1e-12)  # MBS: MUE co-tier, SUE cross-tier
    assert ls[1, sue] / ls[1, mue] == pytest.approx(100.0, rel=1e-12)  # SBS: SUE co-tier, MUE cross-tier


def test_zero_error_estimate_is_exact(rng):
    cfg = NetworkConfig()
    chan = sample_channels(cfg, generate_topology(cfg, rng), rng)
    est = estimate_csi(chan, 0.0, rng)
    assert np.array_equal(est.gain_est, est.gain_true)


def test_error_variance_and_second_moment():
    n = 100_000
    flat = PathLoss(0.0, 0.0)
    cfg = NetworkConfig(
        n_small_cells=1, sues_per_cell=1, n_mues=n // 2 - 1, pathloss_macro=flat, pathloss_small=flat, wall_loss_db=0.0
    )
    chan = sample_channels(cfg, _colocated(1, cfg.n_mues), np.random.default_rng(3))
    est = estimate_csi(chan, 0.05, np.random.default_rng(4))
    err = (est.fading_est - est.fading).ravel()
    assert err.size == n
    assert np.mean(np.abs(err - err.mean()) ** 2) == pytest.approx(0.05, rel=0.05)
    lhs = np.mean(np.abs(est.fading_est) ** 2)
    rhs = np.mean(np.abs(est.fading) ** 2) + 0.05
    assert lhs == pytest.approx(rhs, rel=0.02)
    assert np.array_equal(est.fading, chan.fading)


def test_block_fading_uncorrelated_across_bands():
    # Large-scale gain is shared by all bands of a link, so compare the fading part.
    cfg = NetworkConfig(n_small_cells=2, n_mues=2, sues_per_cell=1)
    f2 = np.array([np.abs(draw_channels(cfg, seed)[1].fading) ** 2 for seed in range(10_000)])
    assert abs(np.corrcoef(f2[..., 0].ravel(), f2[..., 1].ravel())[0, 1]) < 0.02


def test_gain_constant_within_band():
    cfg = NetworkConfig(n_small_cells=3, n_mues=4)
    _, chan = draw_channels(cfg, 7)
    first = chan.gain_true.copy()
    assert np.array_equal(chan.gain_true, first)
    assert np.array_equal(chan.gains(False), first)


def test_determinism():
    cfg = NetworkConfig(n_small_cells=5, n_mues=10, csi_error_var=0.05)
    t1, c1 = draw_channels(cfg, 99)
    t2, c2 = draw_channels(cfg, 99)
    assert np.array_equal(t1.sue_pos, t2.sue_pos)
    assert np.array_equal(c1.gain_true, c2.gain_true)
    assert np.array_equal(c1.gain_est, c2.gain_est)


@settings(max_examples=60, deadline=None)
@given(
    k=st.integers(1, 8),
    m=st.integers(0, 12),
    f=st.integers(1, 3),
    var=st.sampled_from([0.0, 0.01, 0.05, 0.5]),
    seed=st.integers(0, 2**32 - 1),
)
def test_gains_positive_and_finite(k, m, f, var, seed):
    cfg = NetworkConfig(n_small_cells=k, n_mues=m, sues_per_cell=f, csi_error_var=var)
    _, chan = draw_channels(cfg, seed)
    assert chan.gain_true.shape == (k + 1, cfg.n_users, k)
    for g in (chan.gain_true, chan.gain_est):
        assert np.all(np.isfinite(g)) and np.all(g > 0)
