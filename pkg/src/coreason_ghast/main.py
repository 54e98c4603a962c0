# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""Command-line scenario runner: `ghast run|sweep|risk`."""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from coreason_ghast.config import load_config
from coreason_ghast.confirmation import confirmation_risk
from coreason_ghast.engine import ScenarioEngine, override
from coreason_ghast.exceptions import ConfigError, GhastError, InvariantViolation, IoError
from coreason_ghast.utils.formats import format_risks, parse_queries, read_text, write_text
from coreason_ghast.utils.logger import logger

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ERROR = 4


def _common_options(parser: argparse.ArgumentParser, default: object) -> argparse.ArgumentParser:
    parser.add_argument("--seed", type=int, default=default, help="Override sim.seed")
    parser.add_argument("--out-dir", type=Path, default=default, help="Override output.out_dir")
    return parser


def build_parser() -> argparse.ArgumentParser:
    """Root parser; --seed and --out-dir are accepted before or after the subcommand."""
    parser = _common_options(
        argparse.ArgumentParser(prog="ghast", description="GHAST consensus simulator and risk calculator"), None
    )
    # Suppressed defaults keep a value given before the subcommand.
    common = _common_options(argparse.ArgumentParser(add_help=False), argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", parents=[common], help="Run one scenario")
    run_p.add_argument("config", help="YAML scenario file")

    sweep_p = sub.add_parser("sweep", parents=[common], help="Run a scenario once per value of a numeric field")
    sweep_p.add_argument("config", help="YAML scenario file")
    sweep_p.add_argument("--axis", required=True, help="Field name, bare ('beta') or dotted ('sim.protocol.eta_w')")
    sweep_p.add_argument("--values", required=True, help="Comma-separated values")
    sweep_p.add_argument("--workers", type=int, default=4, help="Concurrent runs")

    risk_p = sub.add_parser("risk", parents=[common], help="Evaluate confirmation-risk queries, one per line")
    risk_p.add_argument("queries", help="Query file: m n theta t beta [eta_w] per line")
    risk_p.add_argument("--typeset", action="store_true", help="Use the printed bound forms")
    return parser


def parse_values(text: str) -> List[float]:
    """Parse `v1,v2,...`; blanks are skipped.

    Raises:
        ConfigError: A value is not a number.
    """
    values: List[float] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(float(item))
        except ValueError as e:
            raise ConfigError(f"sweep value {item!r} is not a number") from e
    return values


def _engine(args: argparse.Namespace, workers: int = 4) -> ScenarioEngine:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = override(cfg, {("sim", "seed"): args.seed})
    return ScenarioEngine(cfg, max_workers=workers)


def cmd_run(args: argparse.Namespace) -> int:
    with _engine(args) as engine:
        outcome = engine.run_scenario(out_dir=args.out_dir)
    for name, path in sorted(outcome.files.items()):
        print(f"{name}: {path}")
    report = outcome.report
    if report is not None and not report.ok:
        raise InvariantViolation(f"{len(report.violations)} invariant violations")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    values = parse_values(args.values)
    with _engine(args, args.workers) as engine:
        rows = engine.sweep(args.axis, values, out_dir=args.out_dir)
        root = Path(args.out_dir or engine.config.output.out_dir)
    print(f"sweep: {root / 'sweep.csv'} ({len(rows)} rows)")
    broken = [r for r in rows if r.violations]
    if broken:
        raise InvariantViolation(f"{len(broken)} sweep runs reported invariant violations")
    return EXIT_OK


def cmd_risk(args: argparse.Namespace) -> int:
    queries = parse_queries(read_text(Path(args.queries)))
    risks = [confirmation_risk(q, typeset=args.typeset) for q in queries]
    text = format_risks(risks)
    sys.stdout.write(text)
    if args.out_dir is not None:
        write_text(text, Path(args.out_dir) / "risks.txt")
    return EXIT_OK


_COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "risk": cmd_risk}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit status."""
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InvariantViolation as e:
        logger.error(str(e))
        return EXIT_VIOLATIONS
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG
    except IoError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except GhastError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_ERROR


def run() -> None:  # pragma: no cover
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    run()
