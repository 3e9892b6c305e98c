"""Command-line entry point: ``python -m manetsec``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .runner import (
    ParseError,
    SchemaMismatch,
    ValidationError,
    default_scenario,
    load_scenario,
    run_sweep,
    summarize,
    summarize_rows,
    format_summary,
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="manetsec",
        description="Run trust-based secure routing simulations and write one CSV row per run.")
    p.add_argument("--config", metavar="PATH", help="key = value scenario file")
    p.add_argument("--sweep", choices=["attackers", "speed"],
                   help="sweep attackers over 5..25 or speed over 10..50 (with 5 attackers)")
    p.add_argument("--protocol", choices=["tcls", "baseline", "both"],
                   help="protocol(s) to run (default: both, or the config's value)")
    p.add_argument("--seeds", type=int, metavar="N",
                   help="run seeds 0..N-1 (default: the config's seeds, else seed 0)")
    p.add_argument("--out", metavar="PATH", help="CSV output path (default: stdout)")
    p.add_argument("--profile", choices=["desk", "paper"], default="desk",
                   help="defaults for keys the config omits (default: desk)")
    p.add_argument("--jobs", type=int, default=1, help="concurrent runs (default: 1)")
    p.add_argument("--emit-event-log", action="store_true",
                   help="write a per-run event log (time, seq, kind, node)")
    p.add_argument("--emit-trust-log", action="store_true", help="write a per-run trust CSV")
    p.add_argument("--emit-attack-log", action="store_true", help="write a per-run attack CSV")
    p.add_argument("--summarize", nargs="?", const=True, default=None, metavar="CSV",
                   help="print mean ± stddev per group; with a path, summarize that CSV only")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if isinstance(args.summarize, str):
            summarize(args.summarize)
            return 0
        if args.seeds is not None and args.seeds < 1:
            raise ValidationError("--seeds must be >= 1")
        if args.jobs < 1:
            raise ValidationError("--jobs must be >= 1")
        scenario = (load_scenario(args.config, args.profile) if args.config
                    else default_scenario(args.profile))
        if args.protocol is not None:
            scenario = replace(scenario, protocol=args.protocol)
        if args.seeds is not None:
            scenario = replace(scenario, seeds=tuple(range(args.seeds)))
        emit = (args.emit_event_log, args.emit_trust_log, args.emit_attack_log)
        stem = None
        if any(emit):
            stem = str(Path(args.out).with_suffix("")) if args.out else "manetsec"
        if args.out:
            with open(args.out, "w", newline="") as fh:
                rows = run_sweep(scenario, args.sweep, fh, args.jobs, stem, emit)
        else:
            rows = run_sweep(scenario, args.sweep, sys.stdout, args.jobs, stem, emit)
        if args.summarize:
            print(format_summary(summarize_rows(rows)), file=sys.stderr if not args.out else sys.stdout)
    except (ParseError, ValidationError, SchemaMismatch, OSError, ValueError) as exc:
        print(f"manetsec: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
