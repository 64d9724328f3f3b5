"""Training loop for the frozen-backbone Rein segmenter."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterator, Sequence
from contextlib import ExitStack, contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch
from torch import nn

from config.run_config import config_snapshot
from config.settings import Settings
from config.settings import settings as default_settings
from core.algorithms.backbone import ParamGroup, verify_frozen
from core.algorithms.metrics import score_pair
from core.algorithms.seg_head import segmentation_loss
from core.algorithms.segmenter import ReinSegmenter, build_segmenter, predict_probability_map
from core.algorithms.tiling import crop, split_train_val
from core.domain.constants import (
    BEST_CHECKPOINT_FILENAME,
    LAST_CHECKPOINT_FILENAME,
    NAN_DIAGNOSTICS_FILENAME,
    TRAIN_LOG_FILENAME,
)
from core.domain.errors import InputValidationError, PartitionError, TrainingAbortedError
from core.domain.models import ImageSample, RunConfig, TrainConfig
from core.domain.types import ParamGroupSummary, ParamReportDict, TrainLogRecord
from infrastructure.storage.checkpoint_store import Checkpoint
from utils.logging_config import get_logger

logger = get_logger(__name__)

TRAIN_LOG_FIELDS = ("iter", "loss", "lr_rein", "lr_head")


@contextmanager
def deterministic_execution(single_thread: bool, num_threads: int | None = None) -> Iterator[None]:
    """Pin torch threading (and deterministic kernels when single-threaded)."""
    previous_threads = torch.get_num_threads()
    previous_deterministic = torch.are_deterministic_algorithms_enabled()
    try:
        if single_thread:
            torch.set_num_threads(1)
            torch.use_deterministic_algorithms(True)
        elif num_threads:
            torch.set_num_threads(num_threads)
        yield
    finally:
        torch.set_num_threads(previous_threads)
        torch.use_deterministic_algorithms(previous_deterministic)


def check_partition(groups: Sequence[ParamGroup], model: nn.Module | None = None) -> None:
    """Groups must be disjoint and, given a model, cover all of its parameters.

    Raises:
        PartitionError: On overlap or uncovered parameters
    """
    owner: dict[int, str] = {}
    for group in groups:
        for tensor in group.tensors:
            if id(tensor) in owner:
                raise PartitionError(
                    f"parameter shared by groups {owner[id(tensor)]!r} and {group.name!r}"
                )
            owner[id(tensor)] = group.name
    if model is not None:
        uncovered = [name for name, p in model.named_parameters() if id(p) not in owner]
        if uncovered:
            raise PartitionError(f"parameters outside every group: {', '.join(uncovered)}")


def build_optimizer(
    groups: Sequence[ParamGroup], cfg: TrainConfig, model: nn.Module | None = None
) -> torch.optim.AdamW:
    """AdamW over the trainable groups at their own learning rates.

    Frozen groups are left out entirely. Weight decay applies to matrix
    weights only; gates, biases and norm scales go to a ``.no_decay`` group.
    """
    check_partition(groups, model)
    param_groups: list[dict[str, Any]] = []
    for group in groups:
        if not group.trainable:
            continue
        decay = [t for t in group.tensors if t.ndim >= 2]
        no_decay = [t for t in group.tensors if t.ndim < 2]
        if decay:
            param_groups.append(
                {"params": decay, "lr": group.learning_rate, "weight_decay": cfg.weight_decay, "name": group.name}
            )
        if no_decay:
            param_groups.append(
                {"params": no_decay, "lr": group.learning_rate, "weight_decay": 0.0, "name": f"{group.name}.no_decay"}
            )
    if not param_groups:
        raise PartitionError("no trainable parameter groups")
    return torch.optim.AdamW(param_groups, betas=cfg.betas, eps=cfg.eps)


def gradient_norms(model: nn.Module) -> dict[str, float]:
    """L2 norm of each parameter's gradient (parameters without one are omitted)."""
    return {
        name: float(p.grad.detach().norm())
        for name, p in model.named_parameters()
        if p.grad is not None
    }


def parameter_norms(model: nn.Module) -> dict[str, float]:
    """L2 norm of each trainable parameter."""
    return {
        name: float(p.detach().norm()) for name, p in model.named_parameters() if p.requires_grad
    }


def param_report(groups: Sequence[ParamGroup]) -> ParamReportDict:
    """Per-group counts and the trainable fraction of all listed parameters."""
    summaries = [
        ParamGroupSummary(
            name=group.name,
            count=group.numel,
            trainable=group.trainable,
            learning_rate=group.learning_rate,
        )
        for group in groups
    ]
    total = sum(s["count"] for s in summaries)
    trainable = sum(s["count"] for s in summaries if s["trainable"])
    return ParamReportDict(
        groups=summaries,
        total=total,
        trainable=trainable,
        trainable_fraction=trainable / total if total else 0.0,
    )


def _batch(
    samples: Sequence[ImageSample], size: int, count: int, rng: np.random.Generator
) -> tuple[torch.Tensor, torch.Tensor]:
    picks = rng.integers(0, len(samples), size=count)
    crops = [crop(samples[int(i)], size, "random", rng)[0] for i in picks]
    images = torch.from_numpy(np.stack([c.image for c in crops]).astype(np.float32))
    masks = torch.from_numpy(np.stack([c.mask for c in crops]).astype(np.float32))
    return images, masks


def validation_score(model: ReinSegmenter, samples: Sequence[ImageSample], cfg: RunConfig) -> float:
    """Mean challenge score of tiled, thresholded predictions."""
    scores = []
    for sample in samples:
        prob = predict_probability_map(
            model, sample.image, cfg.train.crop_size, upsample=cfg.head.inference_upsample
        )
        scores.append(score_pair(sample.sample_id, prob >= cfg.head.threshold, sample.mask).score)
    return float(np.mean(scores))


@dataclass
class TrainingResult:
    """Outcome of a completed run."""

    checkpoint: Checkpoint
    log: list[TrainLogRecord]
    model: ReinSegmenter
    best_checkpoint: Checkpoint | None = None
    best_score: float | None = None
    best_iteration: int | None = None
    validation: list[tuple[int, float]] = field(default_factory=list)

    @property
    def selected(self) -> Checkpoint:
        """Best-validation checkpoint when available, else the final one."""
        return self.best_checkpoint or self.checkpoint


class TrainingEngine:
    """Runs one training job; writes artifacts when given a run directory."""

    def __init__(
        self,
        cfg: RunConfig,
        run_dir: Path | None = None,
        app_settings: Settings | None = None,
    ) -> None:
        self.cfg = cfg
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.settings = app_settings or default_settings
        self.single_thread = cfg.train.single_thread or self.settings.SINGLE_THREAD
        self.logger = get_logger(__name__)

    def run(self, dataset: Sequence[ImageSample]) -> TrainingResult:
        if not dataset:
            raise InputValidationError("training dataset is empty")
        with deterministic_execution(self.single_thread, self.settings.TORCH_NUM_THREADS):
            return self._run(list(dataset))

    def _split(self, dataset: list[ImageSample]) -> tuple[list[ImageSample], list[ImageSample]]:
        try:
            return split_train_val(dataset, self.cfg.data.split_ratio, self.cfg.data.seed)
        except InputValidationError as e:
            self.logger.warning(f"No validation split ({e}); training on all {len(dataset)} samples")
            return dataset, []

    def _run(self, dataset: list[ImageSample]) -> TrainingResult:
        cfg = self.cfg
        train_cfg = cfg.train
        torch.manual_seed(train_cfg.seed)

        model = build_segmenter(cfg)
        groups = model.param_groups(train_cfg)
        optimizer = build_optimizer(groups, train_cfg, model)
        trainable = [p for group in optimizer.param_groups for p in group["params"]]
        frozen_digest = model.backbone.frozen_digest
        snapshot = config_snapshot(cfg)

        train_samples, val_samples = self._split(dataset)
        rng = np.random.default_rng(train_cfg.seed)
        interval = train_cfg.checkpoint_interval
        log: list[TrainLogRecord] = []
        result = TrainingResult(
            checkpoint=Checkpoint.from_module(model, groups, snapshot, 0, frozen_digest),
            log=log,
            model=model,
        )

        self.logger.info(
            f"Training {train_cfg.iterations} iterations on {len(train_samples)} samples "
            f"({len(val_samples)} validation), batch {train_cfg.batch_size}, crop {train_cfg.crop_size}"
        )
        with ExitStack() as stack:
            log_writer = self._open_log(stack)
            model.train()
            for iteration in range(1, train_cfg.iterations + 1):
                images, masks = _batch(train_samples, train_cfg.crop_size, train_cfg.batch_size, rng)
                prediction = model(images)
                # BCE rejects NaN probabilities outright
                if not bool(torch.isfinite(prediction.semantic_prob).all()):
                    self._abort(model, iteration, math.nan)
                loss = segmentation_loss(prediction, masks)
                value = float(loss.detach())
                if not math.isfinite(value):
                    self._abort(model, iteration, value)

                # the previous step's gradients stay readable until here
                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                if train_cfg.grad_clip_norm is not None:
                    total_norm = torch.nn.utils.clip_grad_norm_(trainable, train_cfg.grad_clip_norm)
                    if not bool(torch.isfinite(total_norm)):
                        self._abort(model, iteration, value, reason="non-finite gradient norm")
                optimizer.step()

                record = TrainLogRecord(
                    iter=iteration, loss=value, lr_rein=train_cfg.lr_rein, lr_head=train_cfg.lr_head
                )
                log.append(record)
                if log_writer is not None:
                    log_writer.writerow(record)
                if iteration % train_cfg.log_every == 0:
                    self.logger.info(f"iter {iteration}/{train_cfg.iterations} loss {value:.4f}")

                if iteration % interval == 0 or iteration == train_cfg.iterations:
                    self._checkpoint(model, groups, snapshot, iteration, frozen_digest, val_samples, result)

        if train_cfg.backbone_frozen and not verify_frozen(model.backbone):
            raise TrainingAbortedError(
                "backbone parameters changed during a frozen run",
                {"expected_digest": frozen_digest},
            )
        return result

    def _open_log(self, stack: ExitStack) -> csv.DictWriter | None:
        if self.run_dir is None:
            return None
        self.run_dir.mkdir(parents=True, exist_ok=True)
        log_file = stack.enter_context(
            open(self.run_dir / TRAIN_LOG_FILENAME, "w", encoding="utf-8", newline="")
        )
        writer = csv.DictWriter(log_file, fieldnames=TRAIN_LOG_FIELDS, lineterminator="\n")
        writer.writeheader()
        return writer

    def _checkpoint(
        self,
        model: ReinSegmenter,
        groups: list[ParamGroup],
        snapshot: dict[str, Any],
        iteration: int,
        frozen_digest: str | None,
        val_samples: list[ImageSample],
        result: TrainingResult,
    ) -> None:
        checkpoint = Checkpoint.from_module(model, groups, snapshot, iteration, frozen_digest)
        result.checkpoint = checkpoint
        if self.run_dir is not None:
            checkpoint.save(self.run_dir / LAST_CHECKPOINT_FILENAME)

        if not val_samples:
            return
        score = validation_score(model, val_samples, self.cfg)
        model.train()
        result.validation.append((iteration, score))
        self.logger.info(f"iter {iteration}: validation score {score:.4f}")
        if result.best_score is None or score > result.best_score:
            result.best_score = score
            result.best_iteration = iteration
            result.best_checkpoint = checkpoint
            if self.run_dir is not None:
                checkpoint.save(self.run_dir / BEST_CHECKPOINT_FILENAME)

    def _abort(
        self, model: ReinSegmenter, iteration: int, loss: float, reason: str | None = None
    ) -> None:
        """Dump gradient and parameter norms, then raise TrainingAbortedError.

        Gradients are those of the last backward pass: the previous step's when
        the forward pass itself went non-finite.
        """
        values = parameter_norms(model)
        diagnostics: dict[str, Any] = {
            "iteration": iteration,
            "loss": repr(loss),
            "gradient_norms": {k: repr(v) for k, v in gradient_norms(model).items()},
            "parameter_norms": {k: repr(v) for k, v in values.items()},
            "non_finite_parameters": sorted(k for k, v in values.items() if not math.isfinite(v)),
        }
        reason = reason or f"non-finite loss {loss}"
        message = f"{reason} at iteration {iteration}"
        if self.run_dir is not None:
            path = self.run_dir / NAN_DIAGNOSTICS_FILENAME
            path.write_text(json.dumps(diagnostics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            diagnostics["path"] = str(path)
            self.logger.error(f"{message}; gradient norms written to {path}")
        else:
            self.logger.error(message)
        raise TrainingAbortedError(message, diagnostics)


def train(
    cfg: RunConfig, dataset: Sequence[ImageSample], run_dir: Path | None = None
) -> TrainingResult:
    """Train a segmenter on ``dataset``; see TrainingEngine."""
    return TrainingEngine(cfg, run_dir).run(dataset)
