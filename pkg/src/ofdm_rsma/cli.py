"""Command line entry point: ``ofdm-rsma run | sweep | verify``.

Exit codes: 0 success, 1 invalid config, 2 runtime or verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import __version__
from .experiment_harness import (
    PRESETS,
    SNR_DEFINITION,
    ConfigError,
    ScenarioConfig,
    config_from_mapping,
    config_keys,
    load_config,
    run_scenario,
    run_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 1, 2


def _config_help() -> str:
    keys = config_keys()
    width = max(map(len, keys))
    lines = ["config file: one 'key = value' per line, '#' comments, later keys win", ""]
    lines += [f"  {k:<{width}}  {v}" for k, v in keys.items()]
    lines += ["", f"presets: {', '.join(sorted(PRESETS))}", f"SNR: {SNR_DEFINITION}"]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ofdm-rsma", description=__doc__.splitlines()[0],
                                epilog=_config_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("--config", help="scenario config file (defaults apply when omitted)")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="start from a built-in preset")
        sp.add_argument("--output", required=True, help="CSV path; the manifest goes next to it")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--realizations", type=int, help="override the realization count")

    run = sub.add_parser("run", help="run one scenario", epilog=_config_help(),
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    scenario_args(run)
    sweep = sub.add_parser("sweep", help="run a scenario for several values of one key", epilog=_config_help(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
    scenario_args(sweep)
    sweep.add_argument("--param", required=True, help="config key to vary (delta_d = channel.delta_d)")
    sweep.add_argument("--values", required=True, nargs="+", help="values of --param")
    sub.add_parser("verify", help="run the built-in oracle and invariant checks")
    return p


def _load(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.preset:
            raise ConfigError("--preset and --config are mutually exclusive; use 'preset = ...' in the file")
    else:
        cfg = config_from_mapping({"preset": args.preset} if args.preset else {})
    try:
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.realizations is not None:
            cfg = dataclasses.replace(cfg, realizations=args.realizations)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return cfg


def _progress(done, total):
    logging.getLogger("ofdm_rsma").info("realization %d/%d", done, total)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "verify":
        from .verification import format_table, run_checks

        try:
            results = run_checks()
        except Exception as e:  # a crash is a verification failure too
            print(f"verify: {type(e).__name__}: {e}", file=sys.stderr)
            return EXIT_FAILURE
        print(format_table(results))
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE

    try:
        cfg = _load(args)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run":
            rows = run_scenario(cfg, args.output, _progress)
        else:
            rows = run_sweep(cfg, args.param, args.values, args.output, _progress)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        print(f"{args.command} failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"wrote {len(rows)} rows to {args.output}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
