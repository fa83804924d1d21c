import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ofdm_rsma.ltv_channel import (
    ChannelKind,
    ChannelScenario,
    PropagationPath,
    build_time_channel,
    cyclic_shift_matrix,
    doppler_matrix,
    effective_coupling,
    sample_paths,
    scale_paths,
)
from ofdm_rsma.ofdm_frame import OfdmConfig, build_cp_matrices, build_dft_matrix


def loop_time_channel(paths, size, fs):
    """Entry-by-entry construction: sample m of path l reads input m - d (mod size)."""
    h = np.zeros((size, size), dtype=complex)
    for p in paths:
        for m in range(size):
            src = (m - p.delay_samples) % size
            h[m, src] += p.gain * np.exp(2j * np.pi * p.doppler_hz * (src + 1) / fs)
    return h


CFG = OfdmConfig(8, 3, 15e3)


class TestTimeChannel:
    def test_identity_path(self):
        ch = build_time_channel([PropagationPath(1.0, 0)], CFG)
        assert np.array_equal(ch.h_time, np.eye(11))

    def test_unit_delay_is_cyclic_shift(self):
        ch = build_time_channel([PropagationPath(1.0, 1)], CFG)
        assert np.array_equal(ch.h_time, cyclic_shift_matrix(11, 1))
        x = np.arange(11.0)
        assert np.array_equal(ch.h_time @ x, np.roll(x, 1))

    def test_two_paths_against_loop(self):
        paths = [PropagationPath(1.0, 0), PropagationPath(0.5j, 2)]
        h = build_time_channel(paths, CFG).h_time
        assert np.allclose(h, np.eye(11) + 0.5j * cyclic_shift_matrix(11, 2), atol=0)
        assert np.max(np.abs(h - loop_time_channel(paths, 11, CFG.fs_hz))) < 1e-12

    @settings(max_examples=25)
    @given(st.integers(0, 2**31 - 1))
    def test_reconstruction_from_paths(self, seed):
        paths = sample_paths(ChannelScenario("doubly_selective", 4, 0.5, 0.4), CFG, seed)
        h = build_time_channel(paths, CFG).h_time
        direct = sum(p.gain * cyclic_shift_matrix(11, p.delay_samples) @ doppler_matrix(11, p.doppler_hz, CFG.fs_hz)
                     for p in paths)
        assert np.max(np.abs(h - direct)) < 1e-12
        assert np.max(np.abs(h - loop_time_channel(paths, 11, CFG.fs_hz))) < 1e-12

    def test_doppler_ramp_starts_at_one(self):
        d = np.diagonal(doppler_matrix(4, 1.0, 8.0))
        assert d[0] == pytest.approx(np.exp(2j * np.pi / 8))

    def test_delay_beyond_prefix_rejected(self):
        with pytest.raises(ValueError, match="cyclic prefix"):
            build_time_channel([PropagationPath(1.0, 4)], CFG)

    def test_negative_delay_rejected(self):
        with pytest.raises(ValueError):
            PropagationPath(1.0, -1)


class TestEffectiveCoupling:
    def test_identity_channel(self):
        g = effective_coupling(build_time_channel([PropagationPath(1.0, 0)], CFG), CFG).g
        assert np.allclose(g, np.eye(8), atol=1e-12)

    @pytest.mark.parametrize("delay", [0, 1, 3])
    def test_single_tap_closed_form(self, delay):
        alpha = 0.7 - 0.2j
        g = effective_coupling(build_time_channel([PropagationPath(alpha, delay)], CFG), CFG).g
        n = np.arange(8)
        expected = alpha * np.exp(-2j * np.pi * n * delay / 8)
        assert np.allclose(np.diagonal(g), expected, atol=1e-12)
        assert np.max(np.abs(g - np.diag(np.diagonal(g)))) < 1e-10

    def test_doppler_leaks_into_every_row(self):
        path = PropagationPath(1.0, 1, 0.3 * CFG.scs_hz)
        p = effective_coupling(build_time_channel([path], CFG), CFG).power
        off = p.sum(axis=1) - np.diagonal(p)
        assert np.all(off > 0)

    def test_matches_matrix_product(self, rng):
        paths = sample_paths(ChannelScenario("doubly_selective", 3, 0.5, 0.5), CFG, 5)
        ch = build_time_channel(paths, CFG)
        f = build_dft_matrix(8).matrix
        cp = build_cp_matrices(8, 3)
        g = effective_coupling(ch, CFG).g
        assert np.max(np.abs(g - f @ cp.remove @ ch.h_time @ cp.add @ f.conj().T)) < 1e-12

    @settings(max_examples=25)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 4))
    def test_zero_doppler_is_diagonal(self, seed, taps):
        paths = sample_paths(ChannelScenario("frequency_selective", taps), CFG, seed)
        g = effective_coupling(build_time_channel(paths, CFG), CFG).g
        assert np.max(np.abs(g - np.diag(np.diagonal(g)))) < 1e-10

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_off_diagonal_energy_shrinks_with_doppler(self, seed):
        energies = []
        for dd in [0.5, 0.2, 0.1, 0.05, 0.0]:
            paths = sample_paths(ChannelScenario("doubly_selective", 4, 0.5, dd), CFG, seed)
            p = effective_coupling(build_time_channel(paths, CFG), CFG).power
            energies.append(p.sum() - np.trace(p))
        assert all(b <= a + 1e-15 for a, b in zip(energies, energies[1:]))
        assert energies[-1] < 1e-20

    def test_shape_mismatch_rejected(self):
        ch = build_time_channel([PropagationPath(1.0, 0)], CFG)
        with pytest.raises(ValueError):
            effective_coupling(ch, OfdmConfig(4, 1, 15e3))


class TestSamplePaths:
    def test_flat_is_one_static_path(self):
        paths = sample_paths(ChannelScenario("flat"), CFG, 3)
        assert len(paths) == 1
        assert paths[0].delay_samples == 0 and paths[0].doppler_hz == 0

    def test_profile_normalized_in_expectation(self):
        scn = ChannelScenario("frequency_selective", 4, 0.5)
        cfg = OfdmConfig(8, 3, 15e3)
        total = np.mean([sum(abs(p.gain) ** 2 for p in sample_paths(scn, cfg, s)) for s in range(10_000)])
        assert total == pytest.approx(1.0, rel=0.02)

    def test_eight_taps_profile(self):
        scn = ChannelScenario("frequency_selective", 8, 0.5)
        assert scn.power_profile().sum() == pytest.approx(1.0)
        assert np.all(np.diff(scn.power_profile()) < 0)

    def test_doppler_bounded(self):
        cfg = OfdmConfig(35, 9, 60e3)
        for s in range(50):
            paths = sample_paths(ChannelScenario("doubly_selective", 8, 0.5, 0.5), cfg, s)
            assert all(abs(p.doppler_hz) <= 30e3 for p in paths)

    def test_seed_determinism(self):
        scn = ChannelScenario("doubly_selective", 4, 0.5, 0.3)
        assert sample_paths(scn, CFG, 9) == sample_paths(scn, CFG, 9)
        assert sample_paths(scn, CFG, 9) != sample_paths(scn, CFG, 10)

    def test_gains_shared_across_doppler(self):
        a = sample_paths(ChannelScenario("doubly_selective", 4, 0.5, 0.0), CFG, 4)
        b = sample_paths(ChannelScenario("doubly_selective", 4, 0.5, 0.5), CFG, 4)
        assert [p.gain for p in a] == [p.gain for p in b]

    def test_fixed_gain(self):
        paths = sample_paths(ChannelScenario("flat", fixed_gain=True), CFG, 0)
        assert paths[0].gain == 1.0

    def test_too_many_taps_rejected(self):
        with pytest.raises(ValueError, match="cyclic prefix"):
            sample_paths(ChannelScenario("frequency_selective", 5), CFG, 0)

    def test_scenario_validation(self):
        assert ChannelScenario("flat", num_taps=8).num_taps == 1
        assert ChannelScenario("flat").kind is ChannelKind.FLAT
        with pytest.raises(ValueError):
            ChannelScenario("frequency_selective", delta_d=0.1)
        with pytest.raises(ValueError):
            ChannelScenario("doubly_selective", delta_d=-0.1)
        with pytest.raises(ValueError):
            ChannelScenario("doubly_selective", num_taps=0)

    def test_scale_paths(self):
        paths = scale_paths([PropagationPath(1.0, 0)], -6.0)
        assert abs(paths[0].gain) ** 2 == pytest.approx(10 ** -0.6)
