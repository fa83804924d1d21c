"""Self-checks behind ``ofdm-rsma verify``.

Every check runs on small built-in instances (seeded random channels plus the
bundled grid-oracle fixture) and reports a worst-case error against its
tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import link_analysis as la
from . import reference_oracle as ro
from .allocation_optimizers import (
    OptimizerOptions,
    mmse_state,
    noma_plan,
    optimize_noma,
    optimize_rsma,
    rsma_plan,
)
from .link_analysis import PowerAllocation
from .ltv_channel import ChannelScenario, build_time_channel, effective_coupling, sample_paths
from .ofdm_frame import OfdmConfig, build_cp_matrices, build_dft_matrix

__all__ = ["CheckResult", "load_fixture", "run_checks", "format_table"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


def load_fixture() -> list[dict]:
    text = resources.files("ofdm_rsma").joinpath("data/verify_fixture.json").read_text()
    out = []
    for inst in json.loads(text)["instances"]:
        g = np.asarray(inst["couplings_re"]) + 1j * np.asarray(inst["couplings_im"])
        out.append({**inst, "couplings": list(g)})
    return out


def _random_instances(count: int, seed: int = 2024):
    rng = np.random.default_rng(seed)
    cfg = OfdmConfig(4, 2, 15e3)
    for _ in range(count):
        scn = ChannelScenario("doubly_selective", 3, 0.3, float(rng.uniform(0.0, 0.6)))
        g = [effective_coupling(build_time_channel(sample_paths(scn, cfg, int(rng.integers(2**31))), cfg), cfg)
             for _ in range(2)]
        alloc = PowerAllocation(rng.uniform(0, 2, 4), rng.uniform(0, 2, (2, 4)))
        yield g, alloc


def _decomposition_errors(instances) -> dict[str, float]:
    worst = {"common": 0.0, "private": 0.0, "noma": 0.0}
    for g, alloc in instances:
        order = (1, 0)
        amps_c, amps_p = np.sqrt(alloc.common), np.sqrt(alloc.private)
        for k in range(2):
            for n in range(len(alloc.common)):
                cases = [
                    ("common", la.rsma_common_sinr(g, alloc, 1.0, k, n), {}),
                    ("private", la.rsma_private_sinr(g, alloc, 1.0, k, n), {}),
                ]
                for rx in la.noma_decoders(order, k):
                    cases.append(("noma", la.noma_private_sinr(g, alloc.private, 1.0, order, k, n, receiver=rx),
                                  {"sic_order": order, "receiver": rx}))
                for stream, fast, kw in cases:
                    loop = ro.loop_power_decomposition(g, alloc, stream, k, n, 1.0, **kw)
                    mat = ro.matrix_power_decomposition(g, amps_c, amps_p, stream, k, n, 1.0, **kw)
                    for ref in (loop, mat):
                        err = max(abs(fast.signal - ref.signal), abs(fast.ici - ref.ici), abs(fast.mui - ref.mui))
                        worst[stream] = max(worst[stream], err)
    return worst


def _rate_identity_error(instances) -> float:
    worst = 0.0
    for g, alloc in instances:
        st = mmse_state(g, alloc, 1.0, rsma_plan(2))
        rep = la.evaluate_rsma(g, alloc, 1.0)
        # plan decodings: common at users 0, 1, then private 0, private 1
        direct = np.vstack([rep.common_rate_per_user, rep.private_rate])
        worst = max(worst, float(np.max(np.abs(st.rates - direct))))
        order = (1, 0)
        st = mmse_state(g, alloc.private, 1.0, noma_plan(order))
        rows = []
        for d in noma_plan(order).decodings:
            offset = order.index(d.receiver) - order.index(d.stream)
            rows.append(la.noma_terms(g, alloc.private, 1.0, order, offset).rate[d.stream])
        worst = max(worst, float(np.max(np.abs(st.rates - np.array(rows)))))
    return worst


def run_checks(random_count: int = 25) -> list[CheckResult]:
    out = []

    cp = build_cp_matrices(8, 3)
    out.append(CheckResult("cp_remove_after_add", bool(np.array_equal(cp.remove @ cp.add, np.eye(8))),
                           float(np.max(np.abs(cp.remove @ cp.add - np.eye(8)))), 0.0))

    f = build_dft_matrix(16).matrix
    err = float(np.max(np.abs(f @ f.conj().T - np.eye(16))))
    out.append(CheckResult("dft_unitary", err <= 1e-12, err, 1e-12))

    cfg = OfdmConfig(8, 3, 15e3)
    err = 0.0
    for seed in range(5):
        g = effective_coupling(build_time_channel(sample_paths(ChannelScenario("frequency_selective", 4), cfg, seed),
                                                  cfg), cfg).g
        err = max(err, float(np.max(np.abs(g - np.diag(np.diagonal(g))))))
    out.append(CheckResult("zero_doppler_diagonal", err <= 1e-10, err, 1e-10))

    instances = list(_random_instances(random_count))
    for stream, err in _decomposition_errors(instances).items():
        out.append(CheckResult(f"decomposition_{stream}", err <= 1e-10, err, 1e-10))
    err = _rate_identity_error(instances)
    out.append(CheckResult("rate_mmse_identity", err <= 1e-9, err, 1e-9))

    for i, inst in enumerate(load_fixture()):
        g, budget = inst["couplings"], inst["power_budget"]
        grid = ro.GridSpec(inst["levels"], budget)
        opts = OptimizerOptions(power_budget=budget, noise_var=inst["noise_var"])
        for scheme, solve in (("rsma", optimize_rsma), ("noma", optimize_noma)):
            frozen = inst[f"grid_{scheme}"]
            again = ro.grid_search_best(g, scheme, grid, inst["noise_var"]).sum_rate
            err = abs(again - frozen)
            out.append(CheckResult(f"grid_fixture_{scheme}[{i}]", err <= 1e-9, err, 1e-9))
            res = solve(g, opts)
            ratio = res.sum_rate / frozen
            out.append(CheckResult(f"wmmse_vs_grid_{scheme}[{i}]", ratio >= 0.97, ratio, 0.97,
                                   f"wmmse {res.sum_rate:.6g} grid {frozen:.6g}"))
            steps = np.diff(res.objective_trace)
            drop = float(max(0.0, -steps.min())) if steps.size else 0.0
            out.append(CheckResult(f"trace_monotone_{scheme}[{i}]", drop <= 1e-8, drop, 1e-8))
            power = res.alloc.total_power
            ok = power <= budget * (1 + 1e-9) and power >= 0.999 * budget
            out.append(CheckResult(f"budget_tight_{scheme}[{i}]", ok, power / budget, 1.0))
    return out


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  status  {'value':>12}  {'tolerance':>10}  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.value:>12.4g}  "
                     f"{r.tolerance:>10.3g}  {r.detail}".rstrip())
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines)
