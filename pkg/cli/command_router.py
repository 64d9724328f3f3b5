"""Command router for the rein-seg CLI."""

import argparse
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from config.run_config import load_run_config
from config.settings import Settings
from core.domain.errors import InputValidationError
from core.domain.models import RunSpec
from core.services.dataset_service import DatasetService
from core.services.evaluation_service import EvaluationService
from core.services.leaderboard_service import LeaderboardService
from core.services.training_service import TrainingService
from utils.display import RunDisplay
from utils.logging_config import get_logger

DEFAULT_DATASET_DIR = "data"
DEFAULT_RUNS_DIR = "runs"
DEFAULT_EVAL_DIR = "eval"


class CommandRouter:
    """Routes commands to appropriate services."""

    def __init__(self, app_settings: Settings, display: RunDisplay) -> None:
        """Initialize command router.

        Args:
            app_settings: Runtime settings
            display: Console display for human-facing tables
        """
        self.settings = app_settings
        self.display = display
        self.logger = get_logger(__name__)

    def route_command(self, args: argparse.Namespace, spec: RunSpec) -> Mapping[str, Any]:
        """Route command to appropriate handler.

        Args:
            args: Parsed command line arguments
            spec: Config file, preset, overrides and seed of this invocation

        Returns:
            Command execution results

        Raises:
            ValueError: If command is not recognized
        """
        command = args.command

        if command == "gen-data":
            return self._handle_gen_data(args, spec)
        elif command == "train":
            return self._handle_train(args, spec)
        elif command == "eval":
            return self._handle_eval(args)
        elif command == "score":
            return self._handle_score(args)
        elif command == "rank":
            return self._handle_rank(args)
        elif command == "param-report":
            return self._handle_param_report(spec)
        else:
            raise ValueError(f"Unknown command: {command}")

    def _handle_gen_data(self, args: argparse.Namespace, spec: RunSpec) -> Mapping[str, Any]:
        cfg = load_run_config(spec)
        out_dir = Path(args.out or DEFAULT_DATASET_DIR)
        self.logger.info(f"Generating {cfg.data.task} dataset in {out_dir}")
        return DatasetService(self.settings).generate(cfg, out_dir, force=args.force)

    def _handle_train(self, args: argparse.Namespace, spec: RunSpec) -> Mapping[str, Any]:
        cfg = load_run_config(spec)
        run_dir = Path(args.out or Path(DEFAULT_RUNS_DIR) / f"{cfg.train.preset}-seed{cfg.train.seed}")
        dataset = Path(args.dataset) if args.dataset else None
        self.logger.info(f"Training ({cfg.train.preset} preset) into {run_dir}")
        return TrainingService(self.settings, self.display).train(cfg, dataset, run_dir, dry_run=args.dry_run)

    def _handle_eval(self, args: argparse.Namespace) -> Mapping[str, Any]:
        if not args.checkpoint or not args.dataset:
            raise InputValidationError("eval needs --checkpoint and --dataset")
        return EvaluationService(self.settings, self.display).evaluate_checkpoint(
            Path(args.checkpoint),
            Path(args.dataset),
            Path(args.out or DEFAULT_EVAL_DIR),
            aggregation=args.aggregation,
        )

    def _handle_score(self, args: argparse.Namespace) -> Mapping[str, Any]:
        if not args.pred_dir or not args.gt_dir:
            raise InputValidationError("score needs --pred-dir and --gt-dir")
        return EvaluationService(self.settings, self.display).score(
            Path(args.pred_dir),
            Path(args.gt_dir),
            aggregation=args.aggregation,
            out_path=Path(args.out) if args.out else None,
        )

    def _handle_rank(self, args: argparse.Namespace) -> Mapping[str, Any]:
        if not args.scores:
            raise InputValidationError("rank needs --scores")
        return LeaderboardService(self.display).rank(Path(args.scores))

    def _handle_param_report(self, spec: RunSpec) -> Mapping[str, Any]:
        cfg = load_run_config(spec)
        return TrainingService(self.settings, self.display).param_report(cfg)
