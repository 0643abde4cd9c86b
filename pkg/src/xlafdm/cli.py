"""``simulate`` command line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import ConfigError, ExperimentConfig, emit_csv, parse_config, preset, run_experiment, snr_range


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="simulate", description="Run a multi-user XL-MIMO AFDM sweep and write CSV results.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="key = value experiment file")
    src.add_argument("--preset", choices=["fig3", "fig4"], help="built-in sweep")
    p.add_argument("--scale", type=int, default=1, help="divide n_tx and users of a preset by this factor")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--trials", type=int, help="override the number of trials")
    p.add_argument("--snr-min", type=float)
    p.add_argument("--snr-max", type=float)
    p.add_argument("--snr-step", type=float)
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--quiet", action="store_true", help="no progress on stderr")
    return p


def config_from_args(args) -> ExperimentConfig:
    if args.config is not None:
        if args.scale != 1:
            raise ConfigError("--scale applies to presets only")
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
        cfg = parse_config(text)
    else:
        cfg = preset(args.preset, args.scale)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if any(v is not None for v in (args.snr_min, args.snr_max, args.snr_step)):
        grid = cfg.snr_grid
        lo = grid[0] if args.snr_min is None else args.snr_min
        hi = grid[-1] if args.snr_max is None else args.snr_max
        step = (grid[1] - grid[0] if len(grid) > 1 else 1.0) if args.snr_step is None else args.snr_step
        try:
            changes["snr_grid"] = snr_range(lo, hi, step)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return replace(cfg, **changes) if changes else cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"simulate: config error: {exc.args[0]}", file=sys.stderr)
        return 1

    def progress(t):
        if not args.quiet:
            print(f"trial {t + 1}/{cfg.trials}", file=sys.stderr, flush=True)

    try:
        rows = run_experiment(cfg, progress)
        data = emit_csv(rows)
        if args.out:
            with open(args.out, "wb") as fh:
                fh.write(data)
        else:
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
    except Exception as exc:
        print(f"simulate: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
