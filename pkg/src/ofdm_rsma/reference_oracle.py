"""Brute-force references: simplex grid search and loop-based power decompositions.

Nothing here is fast. These routines exist so that the vectorized paths in
``link_analysis`` and the WMMSE optimizers can be checked against something
that shares none of their shortcuts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from . import link_analysis as la
from .link_analysis import PowerAllocation, SinrDecomposition

__all__ = [
    "GridSpec",
    "GridResult",
    "simplex_grid",
    "grid_search_best",
    "loop_power_decomposition",
    "matrix_power_decomposition",
]

MAX_DIMS = 6
MAX_POINTS = 10**7


@dataclass(frozen=True)
class GridSpec:
    levels: int = 21
    total_power: float = 1.0

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if not self.total_power > 0:
            raise ValueError("total_power must be positive")


@dataclass(frozen=True)
class GridResult:
    alloc: PowerAllocation
    sum_rate: float
    points: int


def simplex_grid(dims: int, levels: int) -> np.ndarray:
    """Integer points ``m >= 0`` with ``sum(m) <= levels - 1``, one per row."""
    steps = levels - 1
    rows = []
    # stars and bars with one slack coordinate
    for bars in itertools.combinations(range(steps + dims), dims):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        rows.append(row)
    return np.array(rows, dtype=float).reshape(-1, dims)


def grid_search_best(couplings, scheme: str, grid: GridSpec, noise_var: float, sic_order=None,
                     sic_decodability: bool = True, assignment=None) -> GridResult:
    """Exhaustive search over the scaled power simplex ``{q >= 0, sum q <= P}``.

    ``scheme`` is ``"rsma"`` (common + private powers), ``"noma"`` (one power
    per user and subcarrier) or ``"ofdma"`` (one power per subcarrier,
    every subcarrier-to-user assignment unless ``assignment`` is given).
    """
    m = la.coupling_powers(couplings)
    k_users, n, _ = m.shape
    dims = {"rsma": n + k_users * n, "noma": k_users * n, "ofdma": n}.get(scheme)
    if dims is None:
        raise ValueError(f"unknown scheme {scheme!r}")
    points = comb(grid.levels - 1 + dims, dims)
    if dims > MAX_DIMS or points > MAX_POINTS:
        raise ValueError(f"grid too large: {dims} dimensions, {points} points")
    q = simplex_grid(dims, grid.levels) * (grid.total_power / (grid.levels - 1))

    if scheme == "rsma":
        common, private = q[:, :n], q[:, n:].reshape(-1, k_users, n)
        c_terms, p_terms = la.rsma_terms(m, common, private, noise_var)
        rates = c_terms.rate.sum(axis=-1).min(axis=-1) + p_terms.rate.sum(axis=(-2, -1))
        best = int(np.argmax(rates))
        alloc = PowerAllocation(common[best], private[best])
        return GridResult(alloc, float(rates[best]), len(q))

    if scheme == "noma":
        order = la.validate_sic_order(sic_order if sic_order is not None else _weak_first(m), k_users)
        private = q.reshape(-1, k_users, n)
        totals, _, _ = la.noma_user_rates(m, private, noise_var, order, sic_decodability)
        rates = totals.sum(axis=-1)
        best = int(np.argmax(rates))
        return GridResult(PowerAllocation.private_only(private[best]), float(rates[best]), len(q))

    candidates = [np.asarray(assignment)] if assignment is not None else [
        np.array(a) for a in itertools.product(range(k_users), repeat=n)
    ]
    best_rate, best_alloc = -np.inf, None
    for assign in candidates:
        rates = la.ofdma_terms(m, assign, q, noise_var).rate.sum(axis=-1)
        i = int(np.argmax(rates))
        if rates[i] > best_rate:
            private = np.zeros((k_users, n))
            private[assign, np.arange(n)] = q[i]
            best_rate, best_alloc = float(rates[i]), PowerAllocation.private_only(private)
    return GridResult(best_alloc, best_rate, len(q) * len(candidates))


def _weak_first(m):
    return tuple(int(k) for k in np.argsort(m.sum(axis=(1, 2)), kind="stable"))


def _gain2(g, n, j):
    return abs(complex(g[n][j])) ** 2


def _g(couplings, k):
    c = couplings[k]
    return c.g if hasattr(c, "g") else np.asarray(c)


def loop_power_decomposition(couplings, alloc: PowerAllocation, stream: str, user: int, subcarrier: int,
                             noise_var: float, sic_order=None, receiver: int | None = None) -> SinrDecomposition:
    """Term-by-term received power decomposition with explicit loops.

    ``stream`` is ``"common"`` or ``"private"`` (RSMA), or ``"noma"``; for
    NOMA the private powers of ``alloc`` are the per-user powers and
    ``receiver`` defaults to ``user``.
    """
    n_users = len(couplings)
    n_sc = len(alloc.common)
    n = subcarrier
    signal = ici = mui = 0.0
    if stream == "common":
        g = _g(couplings, user)
        for j in range(n_sc):
            term = _gain2(g, n, j) * alloc.common[j]
            if j == n:
                signal += term
            else:
                ici += term
        for u in range(n_users):
            for j in range(n_sc):
                mui += _gain2(g, n, j) * alloc.private[u][j]
    elif stream == "private":
        g = _g(couplings, user)
        for j in range(n_sc):
            term = _gain2(g, n, j) * alloc.private[user][j]
            if j == n:
                signal += term
            else:
                ici += term
        for i in range(n_users):
            if i == user:
                continue
            for j in range(n_sc):
                mui += _gain2(g, n, j) * alloc.private[i][j]
    elif stream == "noma":
        order = list(sic_order)
        rx = user if receiver is None else receiver
        g = _g(couplings, rx)
        for j in range(n_sc):
            term = _gain2(g, n, j) * alloc.private[user][j]
            if j == n:
                signal += term
            else:
                ici += term
        for i in order[order.index(user) + 1:]:
            for j in range(n_sc):
                mui += _gain2(g, n, j) * alloc.private[i][j]
    else:
        raise ValueError(f"unknown stream {stream!r}")
    return SinrDecomposition(signal, ici, mui, noise_var)


def matrix_power_decomposition(couplings, common_amp, private_amp, stream: str, user: int, subcarrier: int,
                               noise_var: float, sic_order=None, receiver: int | None = None) -> SinrDecomposition:
    """Decomposition from the explicit leakage matrices ``G diag(p)``.

    Builds the intended-signal matrix (``p_n e_n``), the ICI matrix (own
    stream with subcarrier ``n`` zeroed) and one MUI matrix per interfering
    stream, then sums squared entries of row ``n``. Amplitudes may be complex.
    """
    common_amp = np.asarray(common_amp, dtype=complex)
    private_amp = np.asarray(private_amp, dtype=complex)
    n = subcarrier
    if stream == "common":
        g = _g(couplings, user)
        own = common_amp
        others = [private_amp[u] for u in range(len(couplings))]
    elif stream == "private":
        g = _g(couplings, user)
        own = private_amp[user]
        others = [private_amp[i] for i in range(len(couplings)) if i != user]
    elif stream == "noma":
        order = list(sic_order)
        g = _g(couplings, user if receiver is None else receiver)
        own = private_amp[user]
        others = [private_amp[i] for i in order[order.index(user) + 1:]]
    else:
        raise ValueError(f"unknown stream {stream!r}")
    e_n = np.zeros(len(own))
    e_n[n] = 1.0
    intended = g @ np.diag(own[n] * e_n)
    punctured = own.copy()
    punctured[n] = 0.0
    leak = g @ np.diag(punctured)
    signal = abs(intended[n, n]) ** 2
    ici = float(np.sum(np.abs(leak[n]) ** 2))
    mui = float(sum(np.sum(np.abs((g @ np.diag(p))[n]) ** 2) for p in others))
    return SinrDecomposition(float(signal), ici, mui, noise_var)
