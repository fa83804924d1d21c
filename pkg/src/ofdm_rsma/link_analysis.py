"""Per-subcarrier power decompositions, SINRs and achievable rates.

Every quantity is a function of the squared coupling magnitudes ``|g_k,nj|^2``
and the per-subcarrier stream powers: with independent unit-power Gaussian
symbols the cross terms average out, so only ``|.|^2`` of each entry enters.

Users and subcarriers are indexed from 0. A power allocation always carries
powers (squared amplitudes), never amplitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ltv_channel import CouplingMatrix

__all__ = [
    "PowerAllocation",
    "SinrDecomposition",
    "TermArrays",
    "RateReport",
    "coupling_powers",
    "rsma_terms",
    "noma_terms",
    "rsma_common_sinr",
    "rsma_private_sinr",
    "noma_private_sinr",
    "rate_from_sinr",
    "evaluate_rsma",
    "evaluate_noma",
    "evaluate_ofdma",
    "noma_decoders",
    "validate_sic_order",
]


@dataclass(frozen=True)
class PowerAllocation:
    """Per-subcarrier powers of the common stream and of each private stream.

    ``common_shares[k]`` is user k's part of the common rate (bit/s/Hz per
    OFDM symbol).
    """

    common: np.ndarray
    private: np.ndarray
    common_shares: np.ndarray | None = None

    def __post_init__(self):
        common = np.asarray(self.common, dtype=float)
        private = np.atleast_2d(np.asarray(self.private, dtype=float))
        if common.ndim != 1 or private.shape[1] != common.shape[0]:
            raise ValueError(f"shape mismatch: common {common.shape}, private {private.shape}")
        if np.any(common < 0) or np.any(private < 0):
            raise ValueError("powers must be nonnegative")
        shares = self.common_shares
        shares = np.zeros(private.shape[0]) if shares is None else np.asarray(shares, dtype=float)
        if shares.shape != (private.shape[0],) or np.any(shares < 0):
            raise ValueError("common_shares must be a nonnegative length-K vector")
        object.__setattr__(self, "common", common)
        object.__setattr__(self, "private", private)
        object.__setattr__(self, "common_shares", shares)

    @classmethod
    def private_only(cls, private) -> "PowerAllocation":
        private = np.atleast_2d(np.asarray(private, dtype=float))
        return cls(np.zeros(private.shape[1]), private)

    @property
    def n_users(self) -> int:
        return self.private.shape[0]

    @property
    def n_subcarriers(self) -> int:
        return self.common.shape[0]

    @property
    def total_power(self) -> float:
        return float(self.common.sum() + self.private.sum())

    def within_budget(self, budget: float, tol: float = 1e-9) -> bool:
        return self.total_power <= budget + tol

    def shares_feasible(self, report: "RateReport", tol: float = 1e-9) -> bool:
        return float(self.common_shares.sum()) <= report.common_total + tol


@dataclass(frozen=True)
class SinrDecomposition:
    """Received power on one subcarrier split into its four contributions."""

    signal: float
    ici: float
    mui: float
    noise: float

    @property
    def interference(self) -> float:
        return self.ici + self.mui + self.noise

    @property
    def total(self) -> float:
        return self.signal + self.ici + self.mui + self.noise

    @property
    def sinr(self) -> float:
        return self.signal / self.interference


@dataclass(frozen=True)
class TermArrays:
    """Vectorized decompositions, one entry per (user, subcarrier)."""

    signal: np.ndarray
    ici: np.ndarray
    mui: np.ndarray
    noise: float

    @property
    def sinr(self) -> np.ndarray:
        return self.signal / (self.ici + self.mui + self.noise)

    @property
    def rate(self) -> np.ndarray:
        return np.log2(1.0 + self.sinr)

    def at(self, k: int, n: int) -> SinrDecomposition:
        return SinrDecomposition(float(self.signal[k, n]), float(self.ici[k, n]),
                                 float(self.mui[k, n]), float(self.noise))


@dataclass(frozen=True)
class RateReport:
    common_rate_per_user: np.ndarray
    private_rate: np.ndarray
    common_total: float
    sum_rate: float
    common_terms: TermArrays | None = field(default=None, repr=False)
    private_terms: TermArrays | None = field(default=None, repr=False)

    @property
    def user_private_rates(self) -> np.ndarray:
        return self.private_rate.sum(axis=1)


def coupling_powers(couplings) -> np.ndarray:
    """Stack ``|G_k|^2`` into a ``(K, N, N)`` array.

    Accepts ``CouplingMatrix`` objects, complex matrices, or an already
    squared real array of shape ``(K, N, N)``.
    """
    if isinstance(couplings, np.ndarray) and couplings.ndim == 3 and np.isrealobj(couplings):
        return couplings
    mats = [c.power if isinstance(c, CouplingMatrix) else np.abs(np.asarray(c)) ** 2 for c in couplings]
    return np.stack(mats)


def _split(m: np.ndarray):
    diag = np.diagonal(m, axis1=-2, axis2=-1)
    off = m.copy()
    idx = np.arange(m.shape[-1])
    off[..., idx, idx] = 0.0
    return diag, off


def _apply(m: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row sums ``sum_j m[n, j] q[..., j]`` for a batch of power vectors."""
    return q @ m.T


def rsma_terms(couplings, common, private, noise_var: float):
    """Decompositions of every common and private stream at every user.

    ``common`` has shape ``(..., N)`` and ``private`` ``(..., K, N)``; leading
    batch dimensions are broadcast. Returns ``(common_terms, private_terms)``.
    """
    m = coupling_powers(couplings)
    diag, off = _split(m)
    common = np.asarray(common, dtype=float)
    private = np.asarray(private, dtype=float)
    n_users = m.shape[0]
    private_sum = private.sum(axis=-2)
    c_sig, c_ici, c_mui = [], [], []
    p_sig, p_ici, p_mui = [], [], []
    for k in range(n_users):
        c_sig.append(diag[k] * common)
        c_ici.append(_apply(off[k], common))
        # every private stream, including user k's own, interferes with the common stream
        c_mui.append(_apply(m[k], private_sum))
        own = private[..., k, :]
        p_sig.append(diag[k] * own)
        p_ici.append(_apply(off[k], own))
        p_mui.append(_apply(m[k], private_sum - own))
    stack = lambda xs: np.stack(xs, axis=-2)
    return (
        TermArrays(stack(c_sig), stack(c_ici), stack(c_mui), noise_var),
        TermArrays(stack(p_sig), stack(p_ici), stack(p_mui), noise_var),
    )


def validate_sic_order(sic_order, n_users: int) -> tuple[int, ...]:
    order = tuple(int(k) for k in sic_order)
    if sorted(order) != list(range(n_users)):
        raise ValueError(f"sic_order {order} is not a permutation of users 0..{n_users - 1}")
    return order


def noma_decoders(sic_order, user: int) -> tuple[int, ...]:
    """Receivers that must decode ``user``'s message: itself and every later user."""
    pos = list(sic_order).index(user)
    return tuple(sic_order[pos:])


def noma_terms(couplings, q_noma, noise_var: float, sic_order, receiver_offset: int = 0) -> TermArrays:
    """Decompositions of each user's stream under fixed-order SIC.

    With ``receiver_offset = 0`` user k's stream is evaluated at its own
    receiver. With offset ``r`` it is evaluated at the user ``r`` positions
    later in the SIC order; pairs that run past the last user get zero
    signal. Earlier users are assumed perfectly cancelled in both cases.
    """
    m = coupling_powers(couplings)
    diag, off = _split(m)
    q = np.asarray(q_noma, dtype=float)
    n_users = m.shape[0]
    order = validate_sic_order(sic_order, n_users)
    sig = [None] * n_users
    ici = [None] * n_users
    mui = [None] * n_users
    for pos, k in enumerate(order):
        later = list(order[pos + 1:])
        own = q[..., k, :]
        rx_pos = pos + receiver_offset
        if rx_pos >= n_users:
            zero = np.zeros_like(own)
            sig[k], ici[k], mui[k] = zero, zero, zero
            continue
        rx = order[rx_pos]
        rest = q[..., later, :].sum(axis=-2) if later else np.zeros_like(own)
        sig[k] = diag[rx] * own
        ici[k] = _apply(off[rx], own)
        mui[k] = _apply(m[rx], rest)
    stack = lambda xs: np.stack(xs, axis=-2)
    return TermArrays(stack(sig), stack(ici), stack(mui), noise_var)


def rsma_common_sinr(couplings, alloc: PowerAllocation, noise_var: float, user: int,
                     subcarrier: int) -> SinrDecomposition:
    """Common stream on ``subcarrier`` as received by ``user``."""
    common, _ = rsma_terms(couplings, alloc.common, alloc.private, noise_var)
    return common.at(user, subcarrier)


def rsma_private_sinr(couplings, alloc: PowerAllocation, noise_var: float, user: int,
                      subcarrier: int) -> SinrDecomposition:
    """Private stream of ``user`` after the common stream has been cancelled."""
    _, private = rsma_terms(couplings, alloc.common, alloc.private, noise_var)
    return private.at(user, subcarrier)


def noma_private_sinr(couplings, q_noma, noise_var: float, sic_order, user: int, subcarrier: int,
                      receiver: int | None = None) -> SinrDecomposition:
    """NOMA stream of ``user``; by default at its own receiver.

    ``receiver`` may name any user decoded at or after ``user`` to get the
    decomposition that receiver sees while cancelling ``user``'s stream.
    """
    order = validate_sic_order(sic_order, len(coupling_powers(couplings)))
    receiver = user if receiver is None else receiver
    offset = order.index(receiver) - order.index(user)
    if offset < 0:
        raise ValueError(f"user {receiver} is decoded before user {user} and never sees its stream")
    return noma_terms(couplings, q_noma, noise_var, order, offset).at(user, subcarrier)


def rate_from_sinr(d: SinrDecomposition) -> float:
    return float(np.log2(1.0 + d.sinr))


def evaluate_rsma(couplings, alloc: PowerAllocation, noise_var: float) -> RateReport:
    """Rates of a rate-split allocation.

    The deliverable common rate is the smallest per-user common sum rate,
    since every user has to decode the common message.
    """
    common, private = rsma_terms(couplings, alloc.common, alloc.private, noise_var)
    r_common = common.rate
    r_private = private.rate
    common_total = float(r_common.sum(axis=1).min())
    return RateReport(
        common_rate_per_user=r_common,
        private_rate=r_private,
        common_total=common_total,
        sum_rate=common_total + float(r_private.sum()),
        common_terms=common,
        private_terms=private,
    )


def noma_user_rates(couplings, q_noma, noise_var: float, sic_order, sic_decodability: bool = True):
    """Per-user NOMA rates ``(K,)`` and the per-subcarrier rates at the binding receiver ``(K, N)``.

    With ``sic_decodability`` a user's message is limited by the worst
    receiver that has to decode it for SIC. Without it, each message is
    rated at its own receiver only.
    """
    m = coupling_powers(couplings)
    n_users = m.shape[0]
    order = validate_sic_order(sic_order, n_users)
    own = noma_terms(m, q_noma, noise_var, order, 0)
    per_carrier = own.rate
    totals = per_carrier.sum(axis=-1)
    if sic_decodability:
        for offset in range(1, n_users):
            other = noma_terms(m, q_noma, noise_var, order, offset).rate
            other_totals = other.sum(axis=-1)
            # users without a receiver at this offset carry zero signal; skip them
            valid = np.zeros(n_users, dtype=bool)
            valid[list(order[: n_users - offset])] = True
            worse = (other_totals < totals) & valid
            per_carrier = np.where(worse[..., None], other, per_carrier)
            totals = np.where(worse, other_totals, totals)
    return totals, per_carrier, own


def evaluate_noma(couplings, q_noma, noise_var: float, sic_order, sic_decodability: bool = True) -> RateReport:
    q = np.atleast_2d(np.asarray(q_noma, dtype=float))
    totals, per_carrier, own = noma_user_rates(couplings, q, noise_var, sic_order, sic_decodability)
    n_users, n = q.shape
    return RateReport(
        common_rate_per_user=np.zeros((n_users, n)),
        private_rate=per_carrier,
        common_total=0.0,
        sum_rate=float(totals.sum()),
        private_terms=own,
    )


def ofdma_terms(couplings, assignment, q_ofdma, noise_var: float) -> TermArrays:
    """Decomposition on each subcarrier at its assigned user, shape ``(N,)``.

    Without SIC all off-carrier energy (own and other users') is ICI; ``mui``
    is identically zero.
    """
    m = coupling_powers(couplings)
    n_users, n, _ = m.shape
    assignment = np.asarray(assignment, dtype=int)
    if assignment.shape != (n,):
        raise ValueError(f"assignment must name one user per subcarrier (length {n})")
    if np.any(assignment < 0) or np.any(assignment >= n_users):
        raise ValueError(f"assignment contains an unassigned subcarrier or unknown user: {assignment}")
    q = np.asarray(q_ofdma, dtype=float)
    diag, off = _split(m)
    carriers = np.arange(n)
    signal = diag[assignment, carriers] * q
    leak = np.stack([_apply(off[k], q) for k in range(n_users)], axis=-2)
    ici = leak[..., assignment, carriers]
    return TermArrays(signal, ici, np.zeros_like(signal), noise_var)


def evaluate_ofdma(couplings, assignment, q_ofdma, noise_var: float) -> RateReport:
    terms = ofdma_terms(couplings, assignment, q_ofdma, noise_var)
    assignment = np.asarray(assignment, dtype=int)
    n = assignment.shape[0]
    n_users = coupling_powers(couplings).shape[0]
    private = np.zeros((n_users, n))
    private[assignment, np.arange(n)] = terms.rate
    return RateReport(
        common_rate_per_user=np.zeros((n_users, n)),
        private_rate=private,
        common_total=0.0,
        sum_rate=float(private.sum()),
    )
