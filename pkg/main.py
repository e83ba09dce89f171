"""
Multimodal edit lab - out-of-distribution robust knowledge editing on a toy model

Generates the synthetic edit benchmark, trains edit deltas with the
invariant risk objective, runs ablations and verifies the numerical core.

Exit codes: 0 success, 1 failed check or run, 2 configuration error.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import structlog

from config import configure_logging, load_run_config, load_settings
from src.cli import apply_overrides, cmd_ablate, cmd_edit, cmd_gen, cmd_report, cmd_verify, parse_seeds
from src.dashboard import ReportDisplay
from src.errors import ConfigError, LabError

logger = structlog.get_logger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odedit", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate the synthetic edit dataset (JSONL)")
    gen.add_argument("--config", type=Path, required=True)
    gen.add_argument("--out", type=Path, help="dataset path (default: <output_dir>/dataset.jsonl)")

    for name, text in (("edit", "train and evaluate edits per seed"), ("ablate", "run the ablation variants")):
        run = sub.add_parser(name, help=text)
        run.add_argument("--config", type=Path, required=True)
        run.add_argument("--out", help="output directory (overrides the config)")
        run.add_argument("--seeds", help="comma list or range, e.g. 0,1,2 or 0-4")
        run.add_argument("--T", type=int, help="number of sequential edits (1 = one-step editing)")
        if name == "edit":
            run.add_argument("--variant", help="variant tag, e.g. full, naive, fixed_lambda@0.01, lr_primal@0.05")

    verify = sub.add_parser("verify", help="run the self-contained verification suite")
    verify.add_argument("--out", type=Path, help="directory for verify.csv")

    report = sub.add_parser("report", help="re-aggregate the metrics of an output directory")
    report.add_argument("--out", type=Path, required=True, help="directory holding per-seed metrics.json files")
    return parser


def run(args: argparse.Namespace) -> bool:
    settings = load_settings()
    configure_logging(settings.log_level, settings.log_format)
    display = ReportDisplay()

    if args.command == "verify":
        return cmd_verify(settings, args.out, display)
    if args.command == "report":
        return cmd_report(args.out, display)

    cfg = load_run_config(args.config)
    if args.command == "gen":
        display.show_header("Dataset generation", str(args.config))
        return cmd_gen(cfg, settings, args.out, display)

    cfg = apply_overrides(
        cfg,
        seeds=parse_seeds(args.seeds) if args.seeds else None,
        variant=getattr(args, "variant", None),
        T=args.T,
        out=args.out,
    )
    display.show_header(f"{args.command}: {cfg.variant if args.command == 'edit' else 'ablation'}", str(args.config))
    if args.command == "edit":
        return cmd_edit(cfg, settings, display)
    return cmd_ablate(cfg, settings, display)


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point."""
    args = build_parser().parse_args(argv)
    try:
        ok = run(args)
    except ConfigError as exc:
        logger.error("configuration error", error=str(exc))
        return EXIT_CONFIG
    except (LabError, FileNotFoundError) as exc:
        logger.error("command failed", command=args.command, error=str(exc))
        return EXIT_FAILED
    return EXIT_OK if ok else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
