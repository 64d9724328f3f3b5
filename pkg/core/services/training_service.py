"""Training service: run directories, headers and parameter reports."""

from pathlib import Path
from typing import Any

from config.run_config import save_config_snapshot
from config.settings import Settings
from config.settings import settings as default_settings
from core.algorithms.backbone import export_weights
from core.algorithms.rein import expected_parameter_count
from core.algorithms.segmenter import build_segmenter
from core.algorithms.training_engine import TrainingEngine, param_report
from core.domain.constants import (
    BEST_CHECKPOINT_FILENAME,
    CONFIG_SNAPSHOT_FILENAME,
    LAST_CHECKPOINT_FILENAME,
    RUN_LOG_FILENAME,
)
from core.domain.errors import IngestionError
from core.domain.models import RunConfig
from infrastructure.data.dataset_store import load_dataset_dir
from utils.display import RunDisplay
from utils.logging_config import get_logger, run_log

TRAIN_SPLIT = "train"
BACKBONE_WEIGHTS_DIRNAME = "backbone_weights"


def run_header(cfg: RunConfig) -> dict[str, Any]:
    """The hyperparameters printed before every run."""
    train = cfg.train
    return {
        "preset": train.preset,
        "iterations": train.iterations,
        "batch_size": train.batch_size,
        "crop_size": train.crop_size,
        "image_size": cfg.image_size,
        "optimizer": train.optimizer,
        "lr_backbone": train.lr_backbone,
        "lr_rein": train.lr_rein,
        "lr_head": train.lr_head,
        "weight_decay": train.weight_decay,
        "backbone": f"{cfg.backbone.kind} L={cfg.backbone.layers} c={cfg.backbone.width}",
        "backbone_frozen": train.backbone_frozen,
        "use_adapter": train.use_adapter,
        "rein": f"m={cfg.rein.num_tokens} r={cfg.rein.rank} d_q={cfg.rein.query_width}",
        "seed": train.seed,
    }


def resolve_split_dir(dataset_dir: Path, split: str) -> Path:
    """``<dataset>/<split>`` when present, else the directory itself.

    Raises:
        IngestionError: If the dataset path does not exist
    """
    dataset_dir = Path(dataset_dir)
    if not dataset_dir.exists():
        raise IngestionError(f"Dataset not found: {dataset_dir}")
    candidate = dataset_dir / split
    return candidate if candidate.is_dir() else dataset_dir


class TrainingService:
    """Service for training runs and parameter accounting."""

    def __init__(self, app_settings: Settings | None = None, display: RunDisplay | None = None) -> None:
        self.settings = app_settings or default_settings
        self.display = display or RunDisplay(enabled=False)
        self.logger = get_logger(__name__)

    def train(
        self, cfg: RunConfig, dataset_dir: Path | None, run_dir: Path, dry_run: bool = False
    ) -> dict[str, Any]:
        header = run_header(cfg)
        self.display.show_run_header(header)
        if dry_run:
            return {"command": "train", "dry_run": True, "header": header}

        if dataset_dir is None:
            raise IngestionError("train needs --dataset")
        samples = load_dataset_dir(resolve_split_dir(dataset_dir, TRAIN_SPLIT))

        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        save_config_snapshot(cfg, run_dir / CONFIG_SNAPSHOT_FILENAME)

        with run_log(run_dir / RUN_LOG_FILENAME, self.settings):
            self.logger.info(f"Training on {len(samples)} images into {run_dir}")
            result = TrainingEngine(cfg, run_dir, self.settings).run(samples)
            export_weights(result.model.backbone, run_dir / BACKBONE_WEIGHTS_DIRNAME)

        best = run_dir / BEST_CHECKPOINT_FILENAME
        return {
            "command": "train",
            "dry_run": False,
            "header": header,
            "run_dir": str(run_dir),
            "iterations": len(result.log),
            "initial_loss": result.log[0]["loss"],
            "final_loss": result.log[-1]["loss"],
            "best_score": result.best_score,
            "best_iteration": result.best_iteration,
            "checkpoint": str(run_dir / LAST_CHECKPOINT_FILENAME),
            "best_checkpoint": str(best) if best.exists() else None,
        }

    def param_report(self, cfg: RunConfig) -> dict[str, Any]:
        """Per-group parameter counts of the configured model."""
        model = build_segmenter(cfg, load_weights=False)
        report = param_report(model.param_groups(cfg.train))
        self.display.show_param_report(report)

        result: dict[str, Any] = {"command": "param-report", **report}
        if model.adapter is not None:
            result["adapter_closed_form"] = expected_parameter_count(
                layers=model.backbone.num_layers,
                num_tokens=cfg.rein.num_tokens,
                rank=cfg.rein.rank,
                width=cfg.backbone.width,
                hidden=cfg.rein.hidden_for(cfg.backbone.width),
                query_width=cfg.rein.query_width,
            )
        return result
