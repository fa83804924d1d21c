"""OFDM framing primitives: unitary DFT, cyclic-prefix matrices, stream modulation.

All objects are dense matrices. Sizes of interest are N <= 64, so no FFT fast
path is used; the matrices are the model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "OfdmConfig",
    "UnitaryDft",
    "CpMatrices",
    "build_dft_matrix",
    "build_cp_matrices",
    "modulate_stream",
]


@dataclass(frozen=True)
class OfdmConfig:
    """Subcarrier grid of one OFDM symbol.

    The sampling rate is derived from the grid (``fs_hz = N * scs_hz``); it is
    accepted as an argument only so that configurations can state it
    explicitly, and a mismatch is rejected.
    """

    n_subcarriers: int
    cp_len: int
    scs_hz: float
    fs_hz: float | None = None

    def __post_init__(self):
        if int(self.n_subcarriers) != self.n_subcarriers or self.n_subcarriers < 1:
            raise ValueError(f"n_subcarriers must be a positive integer, got {self.n_subcarriers}")
        if int(self.cp_len) != self.cp_len or self.cp_len < 0:
            raise ValueError(f"cp_len must be a nonnegative integer, got {self.cp_len}")
        if self.cp_len >= self.n_subcarriers:
            raise ValueError(f"cp_len ({self.cp_len}) must be smaller than n_subcarriers ({self.n_subcarriers})")
        if not self.scs_hz > 0:
            raise ValueError(f"scs_hz must be positive, got {self.scs_hz}")
        expected = self.n_subcarriers * float(self.scs_hz)
        if self.fs_hz is None:
            object.__setattr__(self, "fs_hz", expected)
        elif not np.isclose(self.fs_hz, expected, rtol=1e-12, atol=0.0):
            raise ValueError(f"fs_hz ({self.fs_hz}) must equal n_subcarriers * scs_hz ({expected})")

    @property
    def symbol_len(self) -> int:
        """Samples per OFDM symbol including the cyclic prefix."""
        return self.n_subcarriers + self.cp_len


@dataclass(frozen=True)
class UnitaryDft:
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def inverse(self) -> np.ndarray:
        return self.matrix.conj().T


@dataclass(frozen=True)
class CpMatrices:
    add: np.ndarray  # (N+C) x N
    remove: np.ndarray  # N x (N+C)


def build_dft_matrix(n: int) -> UnitaryDft:
    """Unitary N-point DFT, ``F[m, k] = exp(-2j*pi*m*k/n) / sqrt(n)``."""
    idx = np.arange(n)
    f = np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)
    f.setflags(write=False)
    return UnitaryDft(f)


def build_cp_matrices(n: int, c: int) -> CpMatrices:
    """CP insertion ``A`` (copies the last ``c`` samples to the front) and removal ``B``."""
    if c < 0 or c >= n:
        raise ValueError(f"cyclic prefix length must satisfy 0 <= c < n, got c={c}, n={n}")
    add = np.zeros((n + c, n))
    add[:c, n - c:] = np.eye(c)
    add[c:, :] = np.eye(n)
    remove = np.zeros((n, n + c))
    remove[:, c:] = np.eye(n)
    add.setflags(write=False)
    remove.setflags(write=False)
    return CpMatrices(add=add, remove=remove)


def modulate_stream(cfg: OfdmConfig, amplitudes, symbols, dft: UnitaryDft | None = None,
                    cp: CpMatrices | None = None) -> np.ndarray:
    """Time-domain samples ``A F^H diag(amplitudes) symbols`` of one stream.

    ``amplitudes`` are nonnegative per-subcarrier amplitudes; the power placed
    on subcarrier ``n`` is ``amplitudes[n]**2``.
    """
    amplitudes = np.asarray(amplitudes, dtype=float)
    symbols = np.asarray(symbols, dtype=complex)
    n = cfg.n_subcarriers
    if amplitudes.shape != (n,) or symbols.shape != (n,):
        raise ValueError(
            f"expected length-{n} amplitude and symbol vectors, got {amplitudes.shape} and {symbols.shape}"
        )
    if np.any(amplitudes < 0):
        raise ValueError("amplitudes must be nonnegative")
    dft = dft or build_dft_matrix(n)
    cp = cp or build_cp_matrices(n, cfg.cp_len)
    return cp.add @ (dft.inverse @ (amplitudes * symbols))
