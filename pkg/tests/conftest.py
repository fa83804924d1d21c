import numpy as np
import pytest

from ofdm_rsma.ltv_channel import ChannelScenario, build_time_channel, effective_coupling, sample_paths
from ofdm_rsma.ofdm_frame import OfdmConfig


def random_couplings(rng, n_users=2, n=2, cp=1, delta_d=0.5, taps=2):
    """Physical coupling matrices: random multipath with Doppler on a small grid."""
    cfg = OfdmConfig(n, cp, 60e3)
    scn = ChannelScenario("doubly_selective", taps, 0.5, delta_d)
    return [
        effective_coupling(build_time_channel(sample_paths(scn, cfg, int(rng.integers(2**31))), cfg), cfg, user_id=k)
        for k in range(n_users)
    ]


def dense_couplings(rng, n_users=2, n=2):
    """i.i.d. complex Gaussian matrices; not a physical channel, just dense."""
    return [(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2) for _ in range(n_users)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
