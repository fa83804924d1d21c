"""Sum-rate maximizing power allocation for OFDM-RSMA, OFDM-NOMA and OFDMA.

RSMA and NOMA are solved with the same weighted-MMSE block coordinate ascent.
Both are described by a *decoding plan*: a list of messages, each carried by
one stream (a row of the amplitude matrix) and decoded by one or more
receivers. A message's rate is the smallest rate among its decoders, which
covers the RSMA common stream (every user decodes it) and NOMA under SIC
(every later user decodes an earlier user's message).

One WMMSE iteration:

1. scalar MMSE equalizer per (stream, receiver, subcarrier);
2. MSE weight ``w = 1 / e_mmse``, so that ``-log2(e_mmse)`` is the rate;
3. amplitude update: maximize the concave rate surrogate
   ``(ln w - w e(a) + 1) / ln 2`` summed over messages (min over decoders)
   under the power budget. The min is handled in the dual: for fixed
   decoder weights the problem separates per amplitude,
   ``a = D / (2 (A + lambda))``, with ``lambda`` found by bracketed root
   search; the decoder weights minimize a convex dual over simplices.
4. the allocation is rescaled to the full budget (every SINR is
   nondecreasing under a common scaling of all powers).

Minimum-rate constraints make the amplitude step a QCQP with coupling
constraints; that case is handed to SLSQP on the primal surrogate.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize

from .link_analysis import (
    PowerAllocation,
    RateReport,
    coupling_powers,
    evaluate_noma,
    evaluate_ofdma,
    evaluate_rsma,
    validate_sic_order,
)

__all__ = [
    "OptimizerOptions",
    "OptimizerResult",
    "InfeasibleQoSError",
    "DecodingPlan",
    "rsma_plan",
    "noma_plan",
    "mmse_state",
    "optimize_rsma",
    "rsma_layout_from_noma",
    "optimize_noma",
    "default_sic_order",
    "assign_subcarriers_ofdma",
    "waterfill",
    "waterfill_ofdma",
    "single_user_ofdm",
    "assign_common_shares",
]

log = logging.getLogger(__name__)

LN2 = np.log(2.0)


class InfeasibleQoSError(RuntimeError):
    """The minimum-rate targets cannot be met within the power budget."""

    def __init__(self, message: str, best_slack: float):
        super().__init__(message)
        self.best_slack = best_slack


@dataclass(frozen=True)
class OptimizerOptions:
    power_budget: float
    noise_var: float = 1.0
    max_iters: int = 200
    rel_tol: float = 1e-4
    num_starts: int = 4
    min_rates: Sequence[float] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.num_starts < 1:
            raise ValueError("num_starts must be >= 1")
        if not self.power_budget > 0:
            raise ValueError("power_budget must be > 0")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be > 0")
        if self.min_rates is not None:
            r = np.asarray(self.min_rates, dtype=float)
            if np.any(r < 0):
                raise ValueError("min_rates must be nonnegative")
            object.__setattr__(self, "min_rates", tuple(float(x) for x in r))

    def rate_targets(self, n_users: int) -> np.ndarray:
        if self.min_rates is None:
            return np.zeros(n_users)
        r = np.asarray(self.min_rates, dtype=float)
        if r.shape != (n_users,):
            raise ValueError(f"min_rates has {r.size} entries for {n_users} users")
        return r


@dataclass
class OptimizerResult:
    alloc: PowerAllocation
    report: RateReport
    objective_trace: list[float]
    converged: bool
    iterations: int
    start: str = ""
    start_traces: dict[str, list[float]] = field(default_factory=dict, repr=False)

    @property
    def sum_rate(self) -> float:
        return self.report.sum_rate


# ---------------------------------------------------------------------------
# decoding plans


@dataclass(frozen=True)
class Decoding:
    stream: int
    receiver: int
    # streams whose energy reaches the receiver at this SIC stage (own stream included)
    present: tuple[int, ...]


@dataclass(frozen=True)
class Message:
    stream: int
    decodings: tuple[Decoding, ...]
    owner: int | None  # None: shared common message


@dataclass(frozen=True)
class DecodingPlan:
    n_streams: int
    n_users: int
    messages: tuple[Message, ...]

    @property
    def decodings(self) -> list[Decoding]:
        return [d for m in self.messages for d in m.decodings]

    @property
    def has_shared(self) -> bool:
        return any(m.owner is None for m in self.messages)


def rsma_plan(n_users: int) -> DecodingPlan:
    """Stream 0 is the common stream, stream ``k + 1`` is user k's private stream."""
    privates = tuple(range(1, n_users + 1))
    common = Message(0, tuple(Decoding(0, k, (0,) + privates) for k in range(n_users)), None)
    private = tuple(Message(k + 1, (Decoding(k + 1, k, privates),), k) for k in range(n_users))
    return DecodingPlan(n_users + 1, n_users, (common,) + private)


def noma_plan(sic_order, sic_decodability: bool = True) -> DecodingPlan:
    """Stream k is user k's message; users earlier in ``sic_order`` are cancelled first."""
    order = validate_sic_order(sic_order, len(sic_order))
    messages = []
    for pos, k in enumerate(order):
        present = tuple(order[pos:])
        receivers = order[pos:] if sic_decodability else (k,)
        messages.append(Message(k, tuple(Decoding(k, rx, present) for rx in receivers), k))
    messages.sort(key=lambda m: m.stream)
    return DecodingPlan(len(order), len(order), tuple(messages))


# ---------------------------------------------------------------------------
# MMSE receive side


@dataclass
class MmseState:
    """Equalizers, MSEs and weights of every decoding, each of shape ``(n_dec, N)``."""

    total: np.ndarray
    equalizer: np.ndarray
    mse: np.ndarray
    weight: np.ndarray
    rates: np.ndarray  # -log2(mse)


def _received(m, x, plan: DecodingPlan, noise_var: float):
    q = x * x
    n = x.shape[1]
    decs = plan.decodings
    total = np.empty((len(decs), n))
    interference = np.empty((len(decs), n))
    signal_amp = np.empty((len(decs), n))
    for i, d in enumerate(decs):
        mk = m[d.receiver]
        diag = np.diagonal(mk)
        present = q[list(d.present)].sum(axis=0)
        rx = mk @ present
        sig = diag * q[d.stream]
        total[i] = rx + noise_var
        # interference computed directly, not as total - signal, to keep small MSEs accurate
        others = present - q[d.stream]
        interference[i] = mk @ others + (mk @ q[d.stream] - sig) + noise_var
        signal_amp[i] = np.sqrt(diag) * x[d.stream]
    return total, interference, signal_amp


def _mmse(m, x, plan, noise_var) -> MmseState:
    total, interference, signal_amp = _received(m, x, plan, noise_var)
    mse = interference / total
    equalizer = signal_amp / total
    return MmseState(total, equalizer, mse, 1.0 / mse, -np.log2(mse))


def mmse_state(couplings, alloc: PowerAllocation | np.ndarray, noise_var: float,
               plan: DecodingPlan) -> MmseState:
    """Receive-side WMMSE quantities for an allocation.

    ``alloc`` is either a ``PowerAllocation`` (RSMA plan layout) or a power
    matrix with one row per stream.
    """
    m = coupling_powers(couplings)
    if isinstance(alloc, PowerAllocation):
        q = np.vstack([alloc.common[None, :], alloc.private]) if plan.has_shared else alloc.private
    else:
        q = np.atleast_2d(np.asarray(alloc, dtype=float))
    return _mmse(m, np.sqrt(q), plan, noise_var)


def _message_rates(plan: DecodingPlan, state: MmseState) -> np.ndarray:
    out = []
    i = 0
    for msg in plan.messages:
        nd = len(msg.decodings)
        out.append(state.rates[i:i + nd].sum(axis=1).min())
        i += nd
    return np.array(out)


def _objective(plan: DecodingPlan, state: MmseState) -> float:
    return float(_message_rates(plan, state).sum())


# ---------------------------------------------------------------------------
# amplitude step


@dataclass
class _Surrogate:
    """Concave quadratic surrogate of each decoding's rate (in bits).

    ``rho_d(a) = (const_d - sum_{t in present_d} quad_d . a_t^2 + lin_d . a_{stream_d}) / ln 2``
    """

    const: np.ndarray  # (n_dec,)
    quad: np.ndarray  # (n_dec, N)
    lin: np.ndarray  # (n_dec, N)
    present: np.ndarray  # (n_dec, S) 0/1
    stream: np.ndarray  # (n_dec,)
    n_streams: int

    def values(self, a: np.ndarray) -> np.ndarray:
        a2 = a * a
        quad_term = np.einsum("ds,dn,sn->d", self.present, self.quad, a2)
        lin_term = np.einsum("dn,dn->d", self.lin, a[self.stream])
        return (self.const - quad_term + lin_term) / LN2

    def coefficients(self, omega: np.ndarray):
        """Separable ``A`` (quadratic) and ``D`` (linear) for decoder weights ``omega``."""
        quad = (self.present * omega[:, None]).T @ self.quad
        lin = np.zeros((self.n_streams, self.quad.shape[1]))
        np.add.at(lin, self.stream, omega[:, None] * self.lin)
        return quad, lin


def _surrogate(m, x, plan: DecodingPlan, noise_var: float, state: MmseState) -> _Surrogate:
    decs = plan.decodings
    n = x.shape[1]
    w, u = state.weight, state.equalizer
    const = np.sum(np.log(w) + 1.0 - w * (u * u * noise_var + 1.0), axis=1)
    quad = np.empty((len(decs), n))
    lin = np.empty((len(decs), n))
    present = np.zeros((len(decs), plan.n_streams))
    for i, d in enumerate(decs):
        mk = m[d.receiver]
        quad[i] = (w[i] * u[i] ** 2) @ mk
        lin[i] = 2.0 * w[i] * u[i] * np.sqrt(np.diagonal(mk))
        present[i, list(d.present)] = 1.0
    stream = np.array([d.stream for d in decs])
    return _Surrogate(const, quad, lin, present, stream, plan.n_streams)


def _power_constrained_argmax(quad, lin, budget):
    """Maximize ``sum(lin a - quad a^2)`` over ``a >= 0``, ``sum a^2 <= budget``.

    Returns the maximizer and the power multiplier.
    """
    active = lin > 0
    if not np.any(active):
        return np.zeros_like(lin), 0.0
    qa, la = quad[active], lin[active]

    def inv_root_power(lam):
        with np.errstate(divide="ignore"):
            p = np.sum(la * la / (4.0 * (qa + lam) ** 2))
        return 1.0 / np.sqrt(p) - 1.0 / np.sqrt(budget)

    if inv_root_power(0.0) >= 0.0:
        lam = 0.0
    else:
        hi = np.sqrt(np.sum(la * la) / (4.0 * budget))
        if inv_root_power(hi) <= 0.0:
            lam = hi
        else:
            lam = brentq(inv_root_power, 0.0, hi, xtol=1e-14 * max(hi, 1.0), rtol=4 * np.finfo(float).eps)
    a = np.zeros_like(lin)
    a[active] = la / (2.0 * (qa + lam))
    return a, lam


def _project_simplex(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def _groups(plan: DecodingPlan) -> list[np.ndarray]:
    groups, i = [], 0
    for msg in plan.messages:
        nd = len(msg.decodings)
        groups.append(np.arange(i, i + nd))
        i += nd
    return groups


def _amplitude_step(sur: _Surrogate, plan: DecodingPlan, budget: float):
    """Solve the surrogate problem without rate targets; returns amplitudes ``(S, N)``."""
    groups = _groups(plan)
    free = [g for g in groups if g.size > 1]
    omega = np.ones(sur.const.size)

    def primal(om):
        quad, lin = sur.coefficients(om)
        a, _ = _power_constrained_argmax(quad, lin, budget)
        return a

    if not free:
        return primal(omega)

    if len(free) == 1 and free[0].size == 2:
        i, j = free[0]

        def slope(beta):
            om = omega.copy()
            om[i], om[j] = beta, 1.0 - beta
            rho = sur.values(primal(om))
            return rho[i] - rho[j]

        if slope(0.0) >= 0.0:
            beta = 0.0
        elif slope(1.0) <= 0.0:
            beta = 1.0
        else:
            beta = brentq(slope, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        omega[i], omega[j] = beta, 1.0 - beta
        return primal(omega)

    return primal(_dual_projected_gradient(sur, free, omega, primal))


def _dual_projected_gradient(sur, free, omega, primal, max_iter=2000, tol=1e-10):
    """Minimize the convex dual over a product of simplices (projected gradient + Armijo)."""
    for g in free:
        omega[g] = 1.0 / g.size

    def dual(om):
        a = primal(om)
        rho = sur.values(a)
        return float(om @ rho), rho

    def project(om):
        out = om.copy()
        for g in free:
            out[g] = _project_simplex(om[g])
        return out

    value, grad = dual(omega)
    step = 1.0 / max(np.abs(grad).max(), 1e-12)
    for _ in range(max_iter):
        if np.linalg.norm(omega - project(omega - grad)) < tol:
            break
        while True:
            cand = project(omega - step * grad)
            cand_value, cand_grad = dual(cand)
            diff = cand - omega
            if cand_value <= value + grad @ diff + diff @ diff / (2 * step) or step < 1e-16:
                break
            step *= 0.5
        omega, value, grad = cand, cand_value, cand_grad
        step *= 2.0
    return omega


def _qos_step(sur: _Surrogate, plan: DecodingPlan, budget: float, targets: np.ndarray, x0: np.ndarray,
              feasibility: bool):
    """Surrogate problem with minimum-rate constraints, solved by SLSQP on the primal.

    Variables: amplitudes, one rate variable per message, common shares
    (when a shared message exists) and, in the feasibility phase, the
    common slack ``s`` that is maximized in ``own_rate_k + C_k - r_k >= s``.
    """
    s_count, n = x0.shape
    na = s_count * n
    n_msg = len(plan.messages)
    n_share = plan.n_users if plan.has_shared else 0
    groups = _groups(plan)
    shared = [i for i, msg in enumerate(plan.messages) if msg.owner is None]
    owned = [[i for i, msg in enumerate(plan.messages) if msg.owner == k] for k in range(plan.n_users)]
    nvar = na + n_msg + n_share + (1 if feasibility else 0)

    rho0 = sur.values(x0)
    t0 = np.array([rho0[g].min() for g in groups])
    c0 = np.zeros(n_share)
    if n_share:
        c0 = assign_common_shares(t0[shared[0]], np.array([t0[o].sum() for o in owned]), targets)
    z0 = np.concatenate([x0.ravel(), t0, c0] + ([[0.0]] if feasibility else []))
    if feasibility:
        z0[-1] = min(t0[owned[k]].sum() + (c0[k] if n_share else 0.0) - targets[k] for k in range(plan.n_users))

    def unpack(z):
        a = z[:na].reshape(s_count, n)
        t = z[na:na + n_msg]
        c = z[na + n_msg:na + n_msg + n_share]
        return a, t, c

    def rho_jac(a):
        # d rho_d / d a_{s,j} = (-2 a_sj quad_dj [s present] + lin_dj [s == stream_d]) / ln2
        jac = -2.0 * sur.present[:, :, None] * sur.quad[:, None, :] * a[None, :, :]
        jac[np.arange(sur.stream.size), sur.stream, :] += sur.lin
        return jac.reshape(sur.stream.size, -1) / LN2

    rows = []  # constraint builders, each returns (value, jacobian)

    def c_decode(z):
        a, t, _ = unpack(z)
        rho = sur.values(a)
        jac = np.zeros((rho.size, nvar))
        jac[:, :na] = rho_jac(a)
        vals = np.empty(rho.size)
        for mi, g in enumerate(groups):
            vals[g] = rho[g] - t[mi]
            jac[g, na + mi] = -1.0
        return vals, jac

    rows.append(c_decode)

    if n_share:
        def c_share(z):
            _, t, c = unpack(z)
            jac = np.zeros((1, nvar))
            jac[0, na + shared[0]] = 1.0
            jac[0, na + n_msg:na + n_msg + n_share] = -1.0
            return np.array([t[shared[0]] - c.sum()]), jac

        rows.append(c_share)

    def c_qos(z):
        _, t, c = unpack(z)
        vals = np.empty(plan.n_users)
        jac = np.zeros((plan.n_users, nvar))
        for k in range(plan.n_users):
            vals[k] = t[owned[k]].sum() - targets[k]
            jac[k, [na + i for i in owned[k]]] = 1.0
            if n_share:
                vals[k] += c[k]
                jac[k, na + n_msg + k] = 1.0
            if feasibility:
                vals[k] -= z[-1]
                jac[k, -1] = -1.0
        return vals, jac

    rows.append(c_qos)

    def c_power(z):
        a = z[:na]
        jac = np.zeros((1, nvar))
        jac[0, :na] = -2.0 * a
        return np.array([budget - a @ a]), jac

    rows.append(c_power)

    constraints = [{"type": "ineq", "fun": (lambda z, f=f: f(z)[0]), "jac": (lambda z, f=f: f(z)[1])}
                   for f in rows]
    if feasibility:
        obj_grad = np.zeros(nvar)
        obj_grad[-1] = -1.0
        objective = lambda z: -z[-1]
    else:
        obj_grad = np.zeros(nvar)
        obj_grad[na:na + n_msg] = -1.0
        objective = lambda z: -z[na:na + n_msg].sum()
    bounds = [(0.0, np.sqrt(budget))] * na + [(None, None)] * n_msg + [(0.0, None)] * n_share
    if feasibility:
        bounds.append((None, None))
    res = minimize(objective, z0, jac=lambda z: obj_grad, bounds=bounds, constraints=constraints,
                   method="SLSQP", options={"maxiter": 500, "ftol": 1e-12})
    a = np.clip(res.x[:na].reshape(s_count, n), 0.0, None)
    power = float(np.sum(a * a))
    if power > budget:
        a *= np.sqrt(budget / power)
    return a


# ---------------------------------------------------------------------------
# common-rate accounting


def assign_common_shares(common_total: float, own_rates, targets) -> np.ndarray:
    """Split the common rate: cover each user's shortfall in user order, remainder to user 0."""
    own_rates = np.asarray(own_rates, dtype=float)
    targets = np.asarray(targets, dtype=float)
    remaining = max(float(common_total), 0.0)
    shares = np.zeros(own_rates.size)
    for k in range(own_rates.size):
        need = max(targets[k] - own_rates[k], 0.0)
        give = min(need, remaining)
        shares[k] = give
        remaining -= give
    if own_rates.size:
        shares[0] += remaining
    return shares


def _user_rates(plan: DecodingPlan, msg_rates: np.ndarray, targets: np.ndarray):
    own = np.zeros(plan.n_users)
    common = 0.0
    for r, msg in zip(msg_rates, plan.messages):
        if msg.owner is None:
            common += r
        else:
            own[msg.owner] += r
    shares = assign_common_shares(common, own, targets) if plan.has_shared else np.zeros(plan.n_users)
    return own + shares, shares


def _qos_slack(plan, state, targets) -> float:
    """Largest worst-user margin ``min_k(R_k + C_k - r_k)`` over all common-rate splits."""
    own = np.zeros(plan.n_users)
    common = 0.0
    for r, msg in zip(_message_rates(plan, state), plan.messages):
        if msg.owner is None:
            common += r
        else:
            own[msg.owner] += r
    margin = own - targets
    lo = float(margin.min())
    if common <= 0.0:
        return lo
    # raise the lowest margins together until the common rate is used up
    order = np.sort(margin)
    for k in range(1, order.size + 1):
        level = (order[:k].sum() + common) / k
        if k == order.size or level <= order[k]:
            return float(level)
    return lo


# ---------------------------------------------------------------------------
# WMMSE loop


def _fill_budget(x, budget):
    power = float(np.sum(x * x))
    if power <= 0.0:
        return x
    return x * np.sqrt(budget / power)


def _wmmse(m, x0, plan: DecodingPlan, opts: OptimizerOptions, targets: np.ndarray, feasibility=False,
           callback: Callable | None = None):
    """Run WMMSE from ``x0``; returns ``(x, trace, converged, iterations)``.

    The trace holds the objective after every accepted iterate (sum-rate, or
    the minimum QoS slack in the feasibility phase) and never decreases: a
    step that would lower it is discarded and the loop stops.
    """
    budget, noise = opts.power_budget, opts.noise_var
    use_qos = feasibility or bool(np.any(targets > 0))

    def score(state):
        return _qos_slack(plan, state, targets) if feasibility else _objective(plan, state)

    x = x0
    state = _mmse(m, x, plan, noise)
    value = score(state)
    trace = [value]
    converged = False
    it = 0
    if feasibility and value >= 0.0:
        return x, trace, True, it
    for it in range(1, opts.max_iters + 1):
        if callback is not None:
            callback(it, x * x, state)
        sur = _surrogate(m, x, plan, noise, state)
        if use_qos:
            x_new = _qos_step(sur, plan, budget, targets, x, feasibility)
        else:
            x_new = _amplitude_step(sur, plan, budget)
        if not feasibility:
            x_new = _fill_budget(x_new, budget)
        new_state = _mmse(m, x_new, plan, noise)
        new_value = score(new_state)
        if use_qos and not feasibility and _qos_slack(plan, new_state, targets) < -1e-6:
            converged = True
            break
        if new_value < value:
            converged = True
            break
        change = new_value - value
        x, state, value = x_new, new_state, new_value
        trace.append(value)
        if feasibility and value >= 0.0:
            converged = True
            break
        if change <= opts.rel_tol * max(abs(trace[-2]), 1e-12):
            converged = True
            break
    return x, trace, converged, it


MAX_ENUMERATED_ASSIGNMENTS = 64


def _support_starts(m, opts: OptimizerOptions, kind: str):
    """Starts with sparse supports, which WMMSE cannot reach from a dense start.

    A zero amplitude has a zero MMSE equalizer and so stays zero; the
    subcarrier support of the result is therefore fixed by the start. For
    small grids every subcarrier-to-user map is tried, otherwise only the
    best-gain map. RSMA additionally gets NOMA-like layouts where one user's
    OFDMA share is moved onto the common stream.
    """
    k_users, n, _ = m.shape
    if k_users ** n <= MAX_ENUMERATED_ASSIGNMENTS:
        maps = [np.array(a) for a in itertools.product(range(k_users), repeat=n)]
    else:
        maps = [assign_subcarriers_ofdma(m, "best_gain")]
    out = []
    for a in maps:
        q = waterfill_ofdma(m, a, opts).alloc.private
        tag = "".join(str(int(k)) for k in a) if n <= 8 else "best"
        if kind == "noma":
            out.append((f"ofdma[{tag}]", q))
            continue
        out.append((f"ofdma[{tag}]", np.vstack([np.zeros((1, n)), q])))
        for k in range(k_users):
            if q[k].any():
                out.append((f"ofdma[{tag}]_user{k}_common", rsma_layout_from_noma(q, (k,))))
    return out


def _starts(m, plan: DecodingPlan, opts: OptimizerOptions, kind: str, extra=()):
    """Initial amplitude matrices, each at full power, in multi-start order.

    The first ``num_starts`` come from the base list (uniform split, all
    private, OFDMA waterfilling, then seeded random draws); caller-supplied
    ``extra`` starts and the sparse-support starts are appended.
    """
    k_users, n, _ = m.shape
    budget = opts.power_budget
    ofdma = waterfill_ofdma(m, assign_subcarriers_ofdma(m, "best_gain"), opts)
    out = []
    if kind == "rsma":
        q = np.zeros((k_users + 1, n))
        q[0] = budget / (2 * n)
        q[1:] = budget / (2 * n * k_users)
        out.append(("uniform_split", q))
        q = np.zeros((k_users + 1, n))
        q[1:] = budget / (n * k_users)
        out.append(("uniform_private", q))
        q = np.zeros((k_users + 1, n))
        q[1:] = ofdma.alloc.private
        out.append(("ofdma_waterfill", q))
    else:
        out.append(("uniform", np.full((k_users, n), budget / (n * k_users))))
        strong = int(np.argmax(m.sum(axis=(1, 2))))
        q = np.zeros((k_users, n))
        q[strong] = budget / n
        out.append(("strong_user", q))
        out.append(("ofdma_waterfill", ofdma.alloc.private.copy()))
    rng = np.random.default_rng(opts.seed)
    while len(out) < opts.num_starts:
        out.append((f"random{len(out)}", rng.uniform(0.0, 1.0, (plan.n_streams, n))))
    out = out[: opts.num_starts] + list(extra) + _support_starts(m, opts, kind)
    return [(label, _fill_budget(np.sqrt(np.asarray(q, dtype=float)), budget)) for label, q in out]


def _run_starts(m, plan, opts, kind, callback, extra=()):
    targets = opts.rate_targets(plan.n_users)
    qos = bool(np.any(targets > 0))
    best = None
    traces = {}
    for label, x0 in _starts(m, plan, opts, kind, extra):
        if qos:
            x0, ftrace, _, _ = _wmmse(m, x0, plan, opts, targets, feasibility=True)
            if ftrace[-1] < -1e-6:
                traces[label + ":feasibility"] = ftrace
                continue
        x, trace, converged, iters = _wmmse(m, x0, plan, opts, targets, callback=callback)
        traces[label] = trace
        if best is None or trace[-1] > best[1][-1]:
            best = (x, trace, converged, iters, label)
    if best is None:
        slack = max(t[-1] for t in traces.values())
        raise InfeasibleQoSError(
            f"minimum rates {targets.tolist()} are not attainable; best worst-user slack {slack:.4g} bit/s/Hz",
            slack,
        )
    return best, traces


def rsma_layout_from_noma(noma_powers, sic_order) -> np.ndarray:
    """RSMA power matrix (row 0 common) that reproduces a NOMA allocation.

    The first user in ``sic_order`` is decoded by everyone, so its stream
    becomes the common stream; the other users keep private streams.
    """
    q = np.asarray(noma_powers, dtype=float)
    first = int(sic_order[0])
    out = np.zeros((q.shape[0] + 1, q.shape[1]))
    out[0] = q[first]
    out[1:] = q
    out[first + 1] = 0.0
    return out


def optimize_rsma(couplings, opts: OptimizerOptions, callback: Callable | None = None,
                  extra_starts=()) -> OptimizerResult:
    """WMMSE sum-rate maximization for OFDM-RSMA (one common + K private streams).

    ``callback(iteration, powers, state)`` is invoked before every amplitude
    update with the current stream powers (row 0 common) and the MMSE state.
    ``extra_starts`` is a sequence of ``(label, powers)`` pairs tried before
    the built-in starts, e.g. a NOMA solution mapped with
    ``rsma_layout_from_noma``.
    """
    m = coupling_powers(couplings)
    plan = rsma_plan(m.shape[0])
    (x, trace, converged, iters, label), traces = _run_starts(m, plan, opts, "rsma", callback, extra_starts)
    q = x * x
    targets = opts.rate_targets(plan.n_users)
    probe = PowerAllocation(q[0], q[1:])
    report = evaluate_rsma(m, probe, opts.noise_var)
    shares = assign_common_shares(report.common_total, report.user_private_rates, targets)
    alloc = PowerAllocation(q[0], q[1:], shares)
    return OptimizerResult(alloc, report, trace, converged, iters, label, traces)


def default_sic_order(couplings) -> tuple[int, ...]:
    """Weakest user (smallest total channel energy) is decoded first."""
    m = coupling_powers(couplings)
    return tuple(int(k) for k in np.argsort(m.sum(axis=(1, 2)), kind="stable"))


def optimize_noma(couplings, opts: OptimizerOptions, sic_order=None, sic_decodability: bool = True,
                  callback: Callable | None = None) -> OptimizerResult:
    """WMMSE sum-rate maximization for OFDM-NOMA with a fixed SIC order."""
    m = coupling_powers(couplings)
    order = default_sic_order(m) if sic_order is None else validate_sic_order(sic_order, m.shape[0])
    plan = noma_plan(order, sic_decodability)
    (x, trace, converged, iters, label), traces = _run_starts(m, plan, opts, "noma", callback)
    q = x * x
    report = evaluate_noma(m, q, opts.noise_var, order, sic_decodability)
    alloc = PowerAllocation.private_only(q)
    return OptimizerResult(alloc, report, trace, converged, iters, label, traces)


# ---------------------------------------------------------------------------
# OFDMA baselines


def assign_subcarriers_ofdma(couplings, mode: str = "best_gain") -> np.ndarray:
    """Subcarrier-to-user map (0-based user indices).

    ``equal_split`` gives the first ``ceil(N/2)`` subcarriers to user 0 and
    the rest to user 1. ``best_gain`` picks the largest ``|g_k,nn|^2`` per
    subcarrier, ties to the lower index.
    """
    m = coupling_powers(couplings)
    k_users, n, _ = m.shape
    if mode == "equal_split":
        out = np.zeros(n, dtype=int)
        out[-(n // 2):] = min(1, k_users - 1) if n // 2 else 0
        return out
    if mode == "best_gain":
        return np.argmax(np.diagonal(m, axis1=1, axis2=2), axis=0)
    raise ValueError(f"unknown assignment mode {mode!r}")


def waterfill(gains, budget: float, noise_var: float = 1.0):
    """Classic waterfilling ``q_n = max(0, mu - noise/gain_n)`` with ``sum q = budget``.

    The water level is bracketed by bisection to identify the active set and
    then solved in closed form on it. Returns ``(q, mu)``.
    """
    gains = np.asarray(gains, dtype=float)
    q = np.zeros_like(gains)
    usable = gains > 0
    if not np.any(usable) or budget <= 0:
        return q, 0.0
    floor = noise_var / gains[usable]
    lo, hi = floor.min(), floor.max() + budget
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        if np.maximum(mu - floor, 0.0).sum() > budget:
            hi = mu
        else:
            lo = mu
        if hi - lo <= 1e-15 * hi:
            break
    active = floor < hi
    mu = (budget + floor[active].sum()) / active.sum()
    # the closed form can leave a marginal carrier below the floor; drop it and resolve
    while np.any(floor[active] >= mu):
        active &= floor < mu
        mu = (budget + floor[active].sum()) / active.sum()
    sub = np.where(active, mu - floor, 0.0)
    q[usable] = sub
    return q, float(mu)


def waterfill_ofdma(couplings, assignment, opts: OptimizerOptions) -> OptimizerResult:
    """Waterfilling over the assigned users' diagonal gains, evaluated with full ICI."""
    m = coupling_powers(couplings)
    k_users, n, _ = m.shape
    assignment = np.asarray(assignment, dtype=int)
    gains = m[assignment, np.arange(n), np.arange(n)]
    q, _ = waterfill(gains, opts.power_budget, opts.noise_var)
    private = np.zeros((k_users, n))
    private[assignment, np.arange(n)] = q
    report = evaluate_ofdma(m, assignment, q, opts.noise_var)
    return OptimizerResult(PowerAllocation.private_only(private), report, [report.sum_rate], True, 1, "waterfill")


def single_user_ofdm(couplings, opts: OptimizerOptions, user: int | None = None) -> OptimizerResult:
    """All subcarriers to one user (default: the strongest), waterfilled."""
    m = coupling_powers(couplings)
    if user is None:
        user = int(np.argmax(m.sum(axis=(1, 2))))
    return waterfill_ofdma(m, np.full(m.shape[1], user), opts)
