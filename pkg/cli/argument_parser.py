"""Argument parser for the rein-seg CLI."""

import argparse
from collections.abc import Sequence
from typing import Any

from core.domain.models import RunSpec

COMMANDS = ["gen-data", "train", "eval", "score", "rank", "param-report"]


class ArgumentParser:
    """Handles command line argument parsing for rein-seg."""

    def __init__(self) -> None:
        """Initialize the argument parser."""
        self.parser = self._create_parser()

    def _create_parser(self) -> argparse.ArgumentParser:
        """Create and configure the argument parser.

        Returns:
            Configured argument parser
        """
        parser = argparse.ArgumentParser(
            prog="rein-seg",
            description="Frozen-backbone segmentation with Rein token adapters under domain shift",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog="""
Examples:
  rein-seg gen-data --out data                          # 180 train / 20 prelim / 90 test images
  rein-seg gen-data --out data --set data.task="scanner" --force
  rein-seg train --dataset data --out runs/desk         # desk preset, 500 iterations
  rein-seg train --preset paper --dry-run               # print paper-scale hyperparameters only
  rein-seg train --dataset data --set train.use_adapter=false --out runs/head-only
  rein-seg train --dataset data --set train.lr_rein=1e-3 --set train.lr_head=1e-3 --out runs/fast
  rein-seg train --dataset data --set backbone.kind=conv_tiny --out runs/conv   # backbone comparison
  rein-seg param-report                                 # trainable vs frozen parameter counts
  rein-seg eval --checkpoint runs/desk/best.ckpt --dataset data --out eval
  rein-seg score --pred-dir eval/predictions --gt-dir data/test --out scores.csv
  rein-seg rank --scores leaderboard.csv
            """,
        )

        parser.add_argument("command", choices=COMMANDS, help="Command to execute")

        # Configuration
        parser.add_argument("--config", "-c", help="JSON run config file")
        parser.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="Override one config value (repeatable; values parsed as JSON)",
        )
        parser.add_argument("--preset", choices=["paper", "desk"], help="Hyperparameter preset")
        parser.add_argument("--seed", type=int, help="Seed applied to every config section")
        parser.add_argument(
            "--single-thread",
            action="store_true",
            help="Single-threaded deterministic torch kernels (bitwise reproducible)",
        )

        # Inputs and outputs
        parser.add_argument("--out", help="Output directory (or report file for score)")
        parser.add_argument("--force", action="store_true", help="Overwrite a non-empty dataset dir")
        parser.add_argument("--dataset", "-d", help="Dataset directory")
        parser.add_argument("--checkpoint", help="Checkpoint file for eval")
        parser.add_argument("--pred-dir", help="Predicted masks for score")
        parser.add_argument("--gt-dir", help="Ground-truth masks for score")
        parser.add_argument("--scores", help="CSV with name,score columns for rank")
        parser.add_argument(
            "--aggregation",
            choices=["per_image", "pooled"],
            default="per_image",
            help="Dataset aggregation for eval/score (default: per_image)",
        )
        parser.add_argument("--dry-run", action="store_true", help="train: print the run header and exit")

        # Output
        parser.add_argument(
            "--output-format",
            "-f",
            choices=["text", "json", "csv"],
            default="text",
            help="Output format (default: text)",
        )
        parser.add_argument("--output", "-o", help="Write the formatted result to this file")
        parser.add_argument("--no-display", action="store_true", help="Disable rich console tables")
        parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")
        parser.add_argument("--version", action="version", version="rein-seg 1.0.0")

        return parser

    def parse_arguments(self, argv: Sequence[str] | None = None) -> argparse.Namespace:
        """Parse command line arguments.

        Returns:
            Parsed arguments
        """
        return self.parser.parse_args(argv)

    def get_runtime_settings_overrides(self, args: argparse.Namespace) -> dict[str, Any]:
        """Extract runtime settings overrides from CLI arguments.

        Args:
            args: Parsed command line arguments

        Returns:
            Dictionary of settings overrides
        """
        overrides: dict[str, Any] = {}
        if args.verbose:
            overrides["LOG_LEVEL"] = "DEBUG"
        if args.single_thread:
            overrides["SINGLE_THREAD"] = True
        return overrides

    def get_run_spec(self, args: argparse.Namespace) -> RunSpec:
        """The config-relevant part of the invocation."""
        overrides = list(args.overrides)
        if args.single_thread:
            overrides.append("train.single_thread=true")
        return RunSpec(
            command=args.command,
            config_path=args.config,
            overrides=tuple(overrides),
            preset=args.preset,
            seed=args.seed,
        )
