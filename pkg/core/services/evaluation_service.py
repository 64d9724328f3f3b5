"""Evaluation service: tiled checkpoint inference and mask-directory scoring."""

from pathlib import Path
from typing import Any

from config.run_config import config_from_snapshot
from config.settings import Settings
from config.settings import settings as default_settings
from core.algorithms.metrics import evaluate_dirs, split_aggregate, summarize_domains
from core.algorithms.segmenter import build_segmenter, predict_probability_map
from core.algorithms.training_engine import deterministic_execution
from core.domain.constants import DOMAINS_FILENAME
from core.domain.errors import CheckpointError
from core.domain.models import Aggregation, MetricReport
from core.services.dataset_service import load_seen_domains
from core.services.training_service import resolve_split_dir
from formatters.csv_formatter import render_report_csv
from infrastructure.data.dataset_store import load_dataset_dir, read_domains, write_mask
from infrastructure.storage.checkpoint_store import Checkpoint
from utils.display import RunDisplay
from utils.logging_config import get_logger

TEST_SPLIT = "test"
PREDICTIONS_DIRNAME = "predictions"
REPORT_FILENAME = "report.csv"


def _report_payload(report: MetricReport) -> dict[str, Any]:
    return {
        "rows": [row.model_dump() for row in report.rows],
        "aggregate": report.aggregate.model_dump(),
    }


class EvaluationService:
    """Service for eval-cmd and score-cmd."""

    def __init__(self, app_settings: Settings | None = None, display: RunDisplay | None = None) -> None:
        self.settings = app_settings or default_settings
        self.display = display or RunDisplay(enabled=False)
        self.logger = get_logger(__name__)

    def evaluate_checkpoint(
        self,
        checkpoint_path: Path,
        dataset_dir: Path,
        out_dir: Path,
        aggregation: Aggregation = "per_image",
        split: str = TEST_SPLIT,
    ) -> dict[str, Any]:
        """Predict every test image by sliding-window tiles, then score the masks.

        Raises:
            CheckpointError: If the stored backbone does not match its frozen digest
        """
        checkpoint = Checkpoint.load(Path(checkpoint_path))
        cfg = config_from_snapshot(checkpoint.config)
        if checkpoint.frozen_digest is not None and checkpoint.backbone_digest() != checkpoint.frozen_digest:
            raise CheckpointError(f"{checkpoint_path}: backbone digest does not match the frozen digest")

        model = build_segmenter(cfg, load_weights=False)
        checkpoint.apply_to(model)

        split_dir = resolve_split_dir(dataset_dir, split)
        samples = load_dataset_dir(split_dir)
        pred_dir = Path(out_dir) / PREDICTIONS_DIRNAME
        pred_dir.mkdir(parents=True, exist_ok=True)

        self.logger.info(
            f"Predicting {len(samples)} images with {cfg.train.crop_size}px tiles from iteration {checkpoint.iteration}"
        )
        with deterministic_execution(self.settings.SINGLE_THREAD, self.settings.TORCH_NUM_THREADS):
            for sample in samples:
                prob = predict_probability_map(
                    model, sample.image, cfg.train.crop_size, upsample=cfg.head.inference_upsample
                )
                write_mask(pred_dir / f"{sample.sample_id}.png", prob >= cfg.head.threshold)

        report = evaluate_dirs(pred_dir, split_dir, aggregation, self.settings.DATA_MAX_WORKERS)
        payload = _report_payload(report)
        report_path = Path(out_dir) / REPORT_FILENAME
        report_path.write_text(render_report_csv(payload["rows"], payload["aggregate"]), encoding="utf-8")

        domains = read_domains(split_dir / DOMAINS_FILENAME)
        seen = load_seen_domains(Path(dataset_dir))
        domain_of = {s.sample_id: s.domain_id for s in samples} | domains
        summaries = summarize_domains(report, domain_of, seen)
        self.display.show_domain_summary(summaries)

        return {
            "command": "eval",
            "checkpoint": str(checkpoint_path),
            "iteration": checkpoint.iteration,
            "aggregation": aggregation,
            **payload,
            "domains": summaries,
            "seen_unseen": {
                label: row.model_dump() for label, row in split_aggregate(report, domain_of, seen).items()
            },
            "report_path": str(report_path),
            "predictions": str(pred_dir),
        }

    def score(
        self,
        pred_dir: Path,
        gt_dir: Path,
        aggregation: Aggregation = "per_image",
        out_path: Path | None = None,
    ) -> dict[str, Any]:
        """Score a directory of predicted masks against ground truth."""
        report = evaluate_dirs(Path(pred_dir), Path(gt_dir), aggregation, self.settings.DATA_MAX_WORKERS)
        payload = _report_payload(report)
        if out_path is not None:
            Path(out_path).parent.mkdir(parents=True, exist_ok=True)
            Path(out_path).write_text(render_report_csv(payload["rows"], payload["aggregate"]), encoding="utf-8")
        self.logger.info(f"Aggregate score {report.aggregate.score:.4f} over {len(report.rows)} images")
        return {
            "command": "score",
            "aggregation": aggregation,
            **payload,
            "report_path": str(out_path) if out_path is not None else None,
        }

