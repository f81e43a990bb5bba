"""Command-line entry point."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import MODES, RunConfig, load_config, with_overrides
from .errors import TransonicError, ValidationError
from .pipeline import emit_plot_data, run

log = logging.getLogger("transonic")

EXIT_INVARIANT_FAILED = 1


def _grid(text: str) -> tuple[int, int]:
    try:
        nr, nt = text.lower().split("x")
        return int(nr), int(nt)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like NRxNT, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transonic",
        description="Transonic shock solutions of non-isentropic potential flow in divergent nozzles.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "background": "radial background flow with a shock at r_s",
        "locate-shock": "shock radius matching a constant exit pressure",
        "solve": "2D transonic shock for a prescribed exit pressure",
        "sweep": "exit pressure and shock diagnostics over a range of r_s",
        "check": "run the invariant suite",
        "demo-isentropic": "isentropic degeneracy versus the non-isentropic model",
    }
    for name in MODES:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", metavar="PATH", help="TOML or JSON run configuration")
        p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
        p.add_argument("--grid", metavar="NRxNT", type=_grid, help="2D grid size")
        p.add_argument("--modes", metavar="N", type=int, help="cosine mode cutoff")
        p.add_argument("--seed", metavar="S", type=int, help="random seed for the check suite")
        p.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("TRANSONIC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = with_overrides(cfg, args.command, args.grid, args.modes, args.seed)
        report = run(cfg)
        paths = emit_plot_data(report, args.out)
    except ValidationError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return exc.exit_code
    except TransonicError as exc:
        print(f"error [{exc.stage}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    if not args.quiet:
        for inv in report.invariants:
            print(f"{'PASS' if inv.passed else 'FAIL'} {inv.name} value={inv.value:.6e} "
                  f"threshold={inv.threshold:.6e}")
        for p in paths:
            print(f"wrote {p}")
    return 0 if report.ok else EXIT_INVARIANT_FAILED


if __name__ == "__main__":
    sys.exit(main())
