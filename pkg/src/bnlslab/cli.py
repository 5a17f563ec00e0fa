"""Command line entry point ``bnlslab``.

    bnlslab groundstate --config cfg.json --out results/gs
    bnlslab evolve      --config cfg.json --out results/run [--resume ckpt.bin]
    bnlslab sweep       --config cfg.json --out results/sweep [--resume old/sweep]
    bnlslab virial      --config cfg.json --out results/virial

The exit status is 0 when every acceptance flag in the report passes, 1 when
some flag fails and 2 on configuration or I/O errors.  ``BNLS_THREADS`` sets
the FFT thread count.
"""

from __future__ import annotations

import argparse
import sys

from .config import Kind, load_config
from .errors import BNLSError
from .experiments import run_experiment

__all__ = ["main", "build_parser"]

_COMMANDS = {
    "groundstate": Kind.GROUND_STATE,
    "evolve": Kind.EVOLVE,
    "sweep": Kind.DICHOTOMY_SWEEP,
    "virial": Kind.VIRIAL_CHECK,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bnlslab", description="Biharmonic NLS pseudospectral laboratory"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in _COMMANDS.items():
        p = sub.add_parser(name, help=f"run a {kind.value} experiment")
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (default: config out_dir or .)")
        p.add_argument("--resume", default=None, help="checkpoint to continue from")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        expected = _COMMANDS[args.command]
        if cfg.kind is not expected:
            print(
                f"error: config kind {cfg.kind.value} does not match subcommand "
                f"{args.command} (expects {expected.value})",
                file=sys.stderr,
            )
            return 2
        report = run_experiment(cfg, args.out, args.resume)
    except (BNLSError, OSError) as exc:
        where = ""
        if getattr(exc, "line", None) is not None:
            where = f" (line {exc.line})"
        print(f"error: {type(exc).__name__}: {exc}{where}", file=sys.stderr)
        return 2
    for key, ok in report.acceptance.items():
        print(f"{'PASS' if ok else 'FAIL'} {key}")
    for note in report.notes:
        print(f"note: {note}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
