import numpy as np
import pytest

from nomahetnet.config import NetworkConfig
from nomahetnet.topology import ChannelRealization


def make_channel(gains, noise=1e-10, gains_est=None, large_scale=None):
    """ChannelRealization whose |h|^2 * large_scale equals the given gains exactly."""
    gains = np.asarray(gains, dtype=float)
    if large_scale is None:
        large_scale = np.ones(gains.shape[:2])
    fading = np.sqrt(gains / large_scale[:, :, None]).astype(complex)
    if gains_est is None:
        fading_est = fading
    else:
        fading_est = np.sqrt(np.asarray(gains_est, dtype=float) / large_scale[:, :, None]).astype(complex)
    return ChannelRealization(fading=fading, fading_est=fading_est, large_scale=large_scale, noise_power_w=noise)


@pytest.fixture
def small_cfg():
    return NetworkConfig(n_small_cells=3, n_mues=5, sues_per_cell=2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record(number, title: str, passed: bool, detail: str = "") -> bool:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
