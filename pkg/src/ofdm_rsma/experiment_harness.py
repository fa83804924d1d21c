"""Seeded Monte-Carlo SNR sweeps for OFDMA, OFDM-NOMA and OFDM-RSMA.

A scenario is described by a flat ``key = value`` text file with dotted
section names (``ofdm.n_subcarriers = 35``). Every realization draws its own
per-user channels from a sub-seed derived from ``(seed, realization, user)``,
so results do not depend on the order in which realizations are processed.
The same channels are reused across the SNR grid.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .allocation_optimizers import (
    OptimizerOptions,
    assign_subcarriers_ofdma,
    default_sic_order,
    optimize_noma,
    optimize_rsma,
    rsma_layout_from_noma,
    single_user_ofdm,
    waterfill_ofdma,
)
from .link_analysis import coupling_powers
from .ltv_channel import (
    ChannelKind,
    ChannelScenario,
    build_time_channel,
    effective_coupling,
    sample_paths,
    scale_paths,
)
from .ofdm_frame import OfdmConfig, build_cp_matrices, build_dft_matrix

__all__ = [
    "SCHEMES",
    "CSV_HEADER",
    "SNR_DEFINITION",
    "ConfigError",
    "ScenarioConfig",
    "ResultRow",
    "PRESETS",
    "parse_config_text",
    "load_config",
    "config_from_mapping",
    "config_to_mapping",
    "render_config",
    "realization_seed",
    "realization_couplings",
    "power_budget",
    "run_scheme",
    "run_scenario",
    "run_sweep",
    "write_csv",
    "input_hash",
]

log = logging.getLogger(__name__)

SCHEMES = ("ofdma_equal", "ofdma_waterfill", "noma", "rsma", "single_user_ofdm")
CSV_HEADER = ("scheme", "snr_db", "delta_d", "mean_sum_rate", "std_sum_rate", "realizations")
SNR_DEFINITION = "snr = P_t / (N * noise_var), noise_var = 1; P_t = N * 10^(snr_db / 10)"


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


@dataclass(frozen=True)
class ScenarioConfig:
    ofdm: OfdmConfig = field(default_factory=lambda: OfdmConfig(35, 9, 60e3))
    channel: ChannelScenario = field(default_factory=ChannelScenario)
    schemes: tuple[str, ...] = ("ofdma_waterfill", "noma", "rsma")
    snr_grid_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    realizations: int = 50
    seed: int = 0
    # ``power_budget`` is replaced per SNR point
    optimizer: OptimizerOptions = field(default_factory=lambda: OptimizerOptions(power_budget=1.0))
    user_gains_db: tuple[float, ...] = (0.0, 0.0)
    sic_decodability: bool = True

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigError(f"realizations: must be >= 1, got {self.realizations}")
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db: must not be empty")
        if any(b <= a for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])):
            raise ConfigError(f"snr_grid_db: must be strictly increasing, got {list(self.snr_grid_db)}")
        if not self.schemes:
            raise ConfigError("schemes: must not be empty")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"schemes: unknown {bad}; choose from {list(SCHEMES)}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError(f"schemes: duplicates in {list(self.schemes)}")
        if len(self.user_gains_db) < 1:
            raise ConfigError("user_gains_db: need at least one user")
        if "ofdma_equal" in self.schemes and self.n_users != 2:
            raise ConfigError("schemes: ofdma_equal needs exactly 2 users")
        if self.optimizer.min_rates is not None and len(self.optimizer.min_rates) != self.n_users:
            raise ConfigError(f"optimizer.min_rates: expected {self.n_users} entries")
        if self.channel.num_taps > self.ofdm.cp_len + 1:
            raise ConfigError(
                f"channel.num_taps: {self.channel.num_taps} taps do not fit a cyclic prefix of {self.ofdm.cp_len}"
            )

    @property
    def n_users(self) -> int:
        return len(self.user_gains_db)


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    snr_db: float
    delta_d: float
    mean_sum_rate: float
    std_sum_rate: float
    realizations: int

    def as_csv(self) -> list[str]:
        return [self.scheme, repr(float(self.snr_db)), repr(float(self.delta_d)),
                repr(float(self.mean_sum_rate)), repr(float(self.std_sum_rate)), str(self.realizations)]


# ---------------------------------------------------------------------------
# config text


_PRESET_TEXT = {
    "flat": """
        channel.kind = flat
        schemes = single_user_ofdm, ofdma_equal, noma, rsma
    """,
    "fig4": """
        channel.kind = doubly_selective
        channel.num_taps = 8
        channel.delta_d = 0
        schemes = ofdma_waterfill, noma, rsma
    """,
}


def parse_config_text(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; later keys override earlier ones."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


PRESETS = {name: parse_config_text(text) for name, text in _PRESET_TEXT.items()}

_KEYS = {
    "preset": "name of a built-in preset applied before the other keys (flat, fig4)",
    "ofdm.n_subcarriers": "number of subcarriers N",
    "ofdm.cp_len": "cyclic prefix length C in samples (C < N)",
    "ofdm.scs_hz": "subcarrier spacing in Hz; the sampling rate is N * scs",
    "channel.kind": "flat | frequency_selective | doubly_selective",
    "channel.num_taps": "number of unit-spaced taps (<= C + 1)",
    "channel.pdp_decay": "exponential power-delay-profile decay per tap",
    "channel.delta_d": "maximum Doppler shift over subcarrier spacing",
    "channel.fixed_gain": "true: deterministic sqrt-profile tap gains instead of Rayleigh",
    "channel.user_gains_db": "comma-separated per-user power offsets in dB (defines K)",
    "schemes": "comma-separated subset of " + ", ".join(SCHEMES),
    "snr_grid_db": "comma-separated, strictly increasing SNR points in dB",
    "realizations": "Monte-Carlo realizations per SNR point",
    "seed": "master seed",
    "optimizer.max_iters": "WMMSE iteration cap",
    "optimizer.rel_tol": "WMMSE relative objective-change stopping threshold",
    "optimizer.num_starts": "WMMSE base multi-start count",
    "optimizer.min_rates": "comma-separated per-user minimum rates (bit/s/Hz per symbol)",
    "noma.sic_decodability": "true: a NOMA message rate is capped by every user that cancels it",
}


def config_keys() -> dict[str, str]:
    return dict(_KEYS)


def _floats(key, value) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {value!r}") from None


def _scalar(key, value, kind):
    try:
        if kind is bool:
            low = value.strip().lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if kind is int:
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind.__name__}") from None


def config_from_mapping(values: dict[str, str]) -> ScenarioConfig:
    """Build a validated config from parsed key/value strings."""
    values = dict(values)
    preset = values.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown {preset!r}; choose from {sorted(PRESETS)}")
        values = {**PRESETS[preset], **values}
    unknown = sorted(set(values) - set(_KEYS))
    if unknown:
        raise ConfigError(f"unknown keys {unknown}")
    base = ScenarioConfig()

    def get(key, default, kind):
        return _scalar(key, values[key], kind) if key in values else default

    try:
        ofdm = OfdmConfig(
            get("ofdm.n_subcarriers", base.ofdm.n_subcarriers, int),
            get("ofdm.cp_len", base.ofdm.cp_len, int),
            get("ofdm.scs_hz", base.ofdm.scs_hz, float),
        )
    except ValueError as e:
        raise ConfigError(f"ofdm: {e}") from None
    try:
        kind = ChannelKind(values.get("channel.kind", base.channel.kind.value))
    except ValueError:
        raise ConfigError(f"channel.kind: unknown {values['channel.kind']!r}") from None
    try:
        channel = ChannelScenario(
            kind,
            get("channel.num_taps", base.channel.num_taps, int),
            get("channel.pdp_decay", base.channel.pdp_decay, float),
            get("channel.delta_d", base.channel.delta_d, float),
            get("channel.fixed_gain", base.channel.fixed_gain, bool),
        )
    except ValueError as e:
        raise ConfigError(f"channel: {e}") from None
    min_rates = _floats("optimizer.min_rates", values["optimizer.min_rates"]) if "optimizer.min_rates" in values else None
    try:
        optimizer = OptimizerOptions(
            power_budget=1.0,
            max_iters=get("optimizer.max_iters", base.optimizer.max_iters, int),
            rel_tol=get("optimizer.rel_tol", base.optimizer.rel_tol, float),
            num_starts=get("optimizer.num_starts", base.optimizer.num_starts, int),
            min_rates=min_rates if min_rates and any(min_rates) else None,
        )
    except ValueError as e:
        raise ConfigError(f"optimizer: {e}") from None
    schemes = tuple(s.strip() for s in values["schemes"].split(",") if s.strip()) if "schemes" in values \
        else base.schemes
    return ScenarioConfig(
        ofdm=ofdm,
        channel=channel,
        schemes=schemes,
        snr_grid_db=_floats("snr_grid_db", values["snr_grid_db"]) if "snr_grid_db" in values else base.snr_grid_db,
        realizations=get("realizations", base.realizations, int),
        seed=get("seed", base.seed, int),
        optimizer=optimizer,
        user_gains_db=_floats("channel.user_gains_db", values["channel.user_gains_db"])
        if "channel.user_gains_db" in values else base.user_gains_db,
        sic_decodability=get("noma.sic_decodability", base.sic_decodability, bool),
    )


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return config_from_mapping(parse_config_text(text))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_to_mapping(cfg: ScenarioConfig) -> dict[str, str]:
    """Every config field as canonical key/value strings (round-trips through ``config_from_mapping``)."""
    o, c, opt = cfg.ofdm, cfg.channel, cfg.optimizer
    return {
        "ofdm.n_subcarriers": _fmt(o.n_subcarriers),
        "ofdm.cp_len": _fmt(o.cp_len),
        "ofdm.scs_hz": _fmt(float(o.scs_hz)),
        "channel.kind": c.kind.value,
        "channel.num_taps": _fmt(c.num_taps),
        "channel.pdp_decay": _fmt(float(c.pdp_decay)),
        "channel.delta_d": _fmt(float(c.delta_d)),
        "channel.fixed_gain": _fmt(c.fixed_gain),
        "channel.user_gains_db": _fmt(tuple(float(g) for g in cfg.user_gains_db)),
        "schemes": _fmt(cfg.schemes),
        "snr_grid_db": _fmt(tuple(float(s) for s in cfg.snr_grid_db)),
        "realizations": _fmt(cfg.realizations),
        "seed": _fmt(cfg.seed),
        "optimizer.max_iters": _fmt(opt.max_iters),
        "optimizer.rel_tol": _fmt(float(opt.rel_tol)),
        "optimizer.num_starts": _fmt(opt.num_starts),
        "optimizer.min_rates": _fmt(opt.min_rates if opt.min_rates else (0.0,) * cfg.n_users),
        "noma.sic_decodability": _fmt(cfg.sic_decodability),
    }


def render_config(cfg: ScenarioConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config_to_mapping(cfg).items())


def input_hash(cfg: ScenarioConfig) -> str:
    """Git blob hash (sha1 of ``blob <len>\\0`` + content) of the canonical config text."""
    data = render_config(cfg).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


# ---------------------------------------------------------------------------
# simulation


def realization_seed(seed: int, realization: int, user: int) -> int:
    return int(np.random.SeedSequence([seed, realization, user]).generate_state(1)[0])


def realization_couplings(cfg: ScenarioConfig, realization: int, dft=None, cp=None) -> list:
    dft = dft or build_dft_matrix(cfg.ofdm.n_subcarriers)
    cp = cp or build_cp_matrices(cfg.ofdm.n_subcarriers, cfg.ofdm.cp_len)
    out = []
    for k, gain_db in enumerate(cfg.user_gains_db):
        paths = sample_paths(cfg.channel, cfg.ofdm, realization_seed(cfg.seed, realization, k))
        paths = scale_paths(paths, gain_db)
        out.append(effective_coupling(build_time_channel(paths, cfg.ofdm), cfg.ofdm, dft, cp, user_id=k))
    return out


def power_budget(snr_db: float, n_subcarriers: int, noise_var: float = 1.0) -> float:
    return n_subcarriers * noise_var * 10.0 ** (snr_db / 10.0)


def run_scheme(scheme: str, m: np.ndarray, opts: OptimizerOptions, sic_decodability: bool = True,
               cache: dict | None = None) -> float:
    """Sum-rate of one scheme on one channel realization.

    ``cache`` lets RSMA reuse the NOMA solution of the same realization as an
    extra start (RSMA can reproduce any NOMA allocation, so this only adds a
    candidate).
    """
    cache = {} if cache is None else cache
    if scheme == "ofdma_equal":
        return waterfill_ofdma(m, assign_subcarriers_ofdma(m, "equal_split"), opts).sum_rate
    if scheme == "ofdma_waterfill":
        return waterfill_ofdma(m, assign_subcarriers_ofdma(m, "best_gain"), opts).sum_rate
    if scheme == "single_user_ofdm":
        return single_user_ofdm(m, opts).sum_rate
    if scheme == "noma":
        res = optimize_noma(m, opts, sic_decodability=sic_decodability)
        cache["noma"] = res
        return res.sum_rate
    if scheme == "rsma":
        extra = ()
        noma = cache.get("noma")
        if noma is not None and sic_decodability:
            extra = (("noma_solution", rsma_layout_from_noma(noma.alloc.private, default_sic_order(m))),)
        return optimize_rsma(m, opts, extra_starts=extra).sum_rate
    raise ValueError(f"unknown scheme {scheme!r}")


def _scheme_order(schemes):
    # NOMA first so that RSMA can start from its solution
    return sorted(schemes, key=lambda s: s != "noma")


def simulate(cfg: ScenarioConfig, progress: Callable[[int, int], None] | None = None) -> np.ndarray:
    """Sum-rates of shape ``(len(schemes), len(snr_grid_db), realizations)``."""
    n = cfg.ofdm.n_subcarriers
    dft, cp = build_dft_matrix(n), build_cp_matrices(n, cfg.ofdm.cp_len)
    rates = np.zeros((len(cfg.schemes), len(cfg.snr_grid_db), cfg.realizations))
    for r in range(cfg.realizations):
        m = coupling_powers(realization_couplings(cfg, r, dft, cp))
        for i, snr in enumerate(cfg.snr_grid_db):
            opts = dataclasses.replace(cfg.optimizer, power_budget=power_budget(snr, n),
                                       noise_var=1.0, seed=realization_seed(cfg.seed, r, cfg.n_users))
            cache: dict = {}
            for scheme in _scheme_order(cfg.schemes):
                rates[cfg.schemes.index(scheme), i, r] = run_scheme(scheme, m, opts, cfg.sic_decodability, cache)
        if progress is not None:
            progress(r + 1, cfg.realizations)
    return rates


def _rows(cfg: ScenarioConfig, rates: np.ndarray) -> list[ResultRow]:
    rows = []
    for s, scheme in enumerate(cfg.schemes):
        for i, snr in enumerate(cfg.snr_grid_db):
            v = rates[s, i]
            rows.append(ResultRow(scheme, float(snr), float(cfg.channel.delta_d), float(v.mean()),
                                  float(v.std()), cfg.realizations))
    return rows


def write_csv(rows, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow(row.as_csv())
    Path(path).write_text(buf.getvalue())


def _manifest(configs: list[ScenarioConfig], extra: dict | None = None) -> str:
    doc = {
        "package_version": __version__,
        "snr_definition": SNR_DEFINITION,
        "csv_header": list(CSV_HEADER),
        "runs": [{"config": config_to_mapping(c), "input_sha1": input_hash(c)} for c in configs],
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def manifest_path(output) -> Path:
    p = Path(output)
    return p.with_name(p.stem + ".manifest")


def _check_writable(output) -> Path:
    p = Path(output)
    if not p.parent.exists() or p.is_dir():
        raise OSError(f"cannot write results to {p}")
    return p


def run_scenario(cfg: ScenarioConfig, output=None, progress=None) -> list[ResultRow]:
    """Run the Monte-Carlo sweep; with ``output`` also write the CSV and its manifest."""
    if output is not None:
        _check_writable(output)
    log.info("scenario %s: %d realizations x %d SNR points", input_hash(cfg)[:12], cfg.realizations,
             len(cfg.snr_grid_db))
    rows = _rows(cfg, simulate(cfg, progress))
    if output is not None:
        write_csv(rows, output)
        manifest_path(output).write_text(_manifest([cfg]))
    return rows


def run_sweep(cfg: ScenarioConfig, param: str, values, output=None, progress=None) -> list[ResultRow]:
    """Run ``cfg`` once per value of ``param`` (a config key; ``delta_d`` is short for ``channel.delta_d``)."""
    key = {"delta_d": "channel.delta_d"}.get(param, param)
    if key not in _KEYS or key == "preset":
        raise ConfigError(f"sweep parameter: unknown key {param!r}")
    if output is not None:
        _check_writable(output)
    base = config_to_mapping(cfg)
    configs = [config_from_mapping({**base, key: _fmt(v)}) for v in values]
    rows = []
    for c in configs:
        rows.extend(run_scenario(c, None, progress))
    if output is not None:
        write_csv(rows, output)
        manifest_path(output).write_text(_manifest(configs, {"sweep": {"param": key, "values": [_fmt(v) for v in values]}}))
    return rows
