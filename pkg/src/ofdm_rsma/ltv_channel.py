"""Linear time-varying multipath channels and their subcarrier coupling matrices."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ofdm_frame import CpMatrices, OfdmConfig, UnitaryDft, build_cp_matrices, build_dft_matrix

__all__ = [
    "PropagationPath",
    "LtvChannel",
    "CouplingMatrix",
    "ChannelKind",
    "ChannelScenario",
    "cyclic_shift_matrix",
    "doppler_matrix",
    "build_time_channel",
    "effective_coupling",
    "sample_paths",
    "scale_paths",
]


@dataclass(frozen=True)
class PropagationPath:
    gain: complex
    delay_samples: int
    doppler_hz: float = 0.0

    def __post_init__(self):
        if int(self.delay_samples) != self.delay_samples or self.delay_samples < 0:
            raise ValueError(f"delay_samples must be a nonnegative integer, got {self.delay_samples}")


@dataclass(frozen=True)
class LtvChannel:
    paths: tuple[PropagationPath, ...]
    h_time: np.ndarray


@dataclass(frozen=True)
class CouplingMatrix:
    """Frequency-domain channel ``G = F B H A F^H`` seen by one user.

    Entry ``(n, j)`` is the complex gain from transmit subcarrier ``j`` to
    receive subcarrier ``n``; off-diagonal entries are inter-carrier leakage.
    """

    g: np.ndarray
    user_id: int = 0

    @property
    def power(self) -> np.ndarray:
        """Elementwise squared magnitude ``|g_nj|^2``."""
        return np.abs(self.g) ** 2

    @property
    def n(self) -> int:
        return self.g.shape[0]


class ChannelKind(str, Enum):
    FLAT = "flat"
    FREQUENCY_SELECTIVE = "frequency_selective"
    DOUBLY_SELECTIVE = "doubly_selective"


@dataclass(frozen=True)
class ChannelScenario:
    """Statistical description of one channel family.

    ``delta_d`` is the maximum Doppler shift normalized by the subcarrier
    spacing. ``fixed_gain`` replaces Rayleigh tap gains by the deterministic
    square-root profile (unit gain for a flat channel).
    """

    kind: ChannelKind = ChannelKind.DOUBLY_SELECTIVE
    num_taps: int = 8
    pdp_decay: float = 0.5
    delta_d: float = 0.0
    fixed_gain: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        if self.kind is ChannelKind.FLAT:
            object.__setattr__(self, "num_taps", 1)
        if self.num_taps < 1:
            raise ValueError(f"num_taps must be >= 1, got {self.num_taps}")
        if self.delta_d < 0:
            raise ValueError(f"delta_d must be >= 0, got {self.delta_d}")
        if self.kind is not ChannelKind.DOUBLY_SELECTIVE and self.delta_d != 0:
            raise ValueError(f"delta_d must be 0 for a {self.kind.value} channel")
        if self.pdp_decay < 0:
            raise ValueError(f"pdp_decay must be >= 0, got {self.pdp_decay}")

    def power_profile(self) -> np.ndarray:
        """Exponential power-delay profile normalized to unit total power."""
        profile = np.exp(-self.pdp_decay * np.arange(self.num_taps))
        return profile / profile.sum()


def cyclic_shift_matrix(size: int, shift: int) -> np.ndarray:
    """Forward cyclic permutation ``Pi^shift``: ``(Pi^s x)[m] = x[m - s mod size]``."""
    return np.roll(np.eye(size), shift, axis=0)


def doppler_matrix(size: int, doppler_hz: float, fs_hz: float) -> np.ndarray:
    # phase ramp indexed from 1, not 0
    m = np.arange(1, size + 1)
    return np.diag(np.exp(2j * np.pi * doppler_hz * m / fs_hz))


def build_time_channel(paths, cfg: OfdmConfig) -> LtvChannel:
    """Time-domain channel matrix ``H = sum_l gain_l Pi^delay_l Delta(doppler_l)``."""
    paths = tuple(paths)
    size = cfg.symbol_len
    h = np.zeros((size, size), dtype=complex)
    m = np.arange(1, size + 1)
    for p in paths:
        if p.delay_samples > cfg.cp_len:
            raise ValueError(
                f"path delay {p.delay_samples} exceeds the cyclic prefix ({cfg.cp_len} samples)"
            )
        ramp = p.gain * np.exp(2j * np.pi * p.doppler_hz * m / cfg.fs_hz)
        # Pi^d diag(ramp) = diag(ramp) with rows rolled by d
        h += np.roll(np.diag(ramp), p.delay_samples, axis=0)
    h.setflags(write=False)
    return LtvChannel(paths=paths, h_time=h)


def effective_coupling(ch: LtvChannel, cfg: OfdmConfig, dft: UnitaryDft | None = None,
                       cp: CpMatrices | None = None, user_id: int = 0) -> CouplingMatrix:
    dft = dft or build_dft_matrix(cfg.n_subcarriers)
    cp = cp or build_cp_matrices(cfg.n_subcarriers, cfg.cp_len)
    if ch.h_time.shape != (cfg.symbol_len, cfg.symbol_len):
        raise ValueError(f"channel matrix shape {ch.h_time.shape} does not match symbol length {cfg.symbol_len}")
    if dft.n != cfg.n_subcarriers or cp.add.shape != (cfg.symbol_len, cfg.n_subcarriers):
        raise ValueError("DFT / CP matrices do not match the OFDM configuration")
    g = dft.matrix @ cp.remove @ ch.h_time @ cp.add @ dft.inverse
    g.setflags(write=False)
    return CouplingMatrix(g=g, user_id=user_id)


def sample_paths(scn: ChannelScenario, cfg: OfdmConfig, seed: int) -> list[PropagationPath]:
    """Draw one multipath realization; identical ``seed`` gives identical paths.

    Taps sit at integer delays ``0..L-1`` with ``CN(0, sigma_l^2)`` gains.
    Each tap of a doubly selective channel gets ``nu_l = f_d cos(theta_l)``
    with ``theta_l`` uniform and ``f_d = delta_d * scs``.
    """
    if scn.num_taps > cfg.cp_len + 1:
        raise ValueError(
            f"num_taps={scn.num_taps} needs delays up to {scn.num_taps - 1} samples, "
            f"but the cyclic prefix is only {cfg.cp_len}"
        )
    rng = np.random.default_rng(seed)
    sigma2 = scn.power_profile()
    n_taps = scn.num_taps
    if scn.fixed_gain:
        gains = np.sqrt(sigma2).astype(complex)
    else:
        gains = np.sqrt(sigma2 / 2) * (rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps))
    if scn.kind is ChannelKind.DOUBLY_SELECTIVE:
        theta = rng.uniform(0.0, 2 * np.pi, n_taps)
        doppler = scn.delta_d * cfg.scs_hz * np.cos(theta)
    else:
        doppler = np.zeros(n_taps)
    return [PropagationPath(complex(gains[l]), l, float(doppler[l])) for l in range(n_taps)]


def scale_paths(paths, gain_db: float) -> list[PropagationPath]:
    """Scale every path's power by ``gain_db`` decibels."""
    factor = 10.0 ** (gain_db / 20.0)
    return [PropagationPath(p.gain * factor, p.delay_samples, p.doppler_hz) for p in paths]
