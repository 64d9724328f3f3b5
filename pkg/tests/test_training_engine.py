"""Tests for the optimizer setup and the training loop."""

import csv
import json
from dataclasses import replace

import numpy as np
import pytest
import torch
from torch import nn

from config.run_config import resolve_run_config
from core.algorithms.backbone import ParamGroup, verify_frozen
from core.algorithms.segmenter import build_segmenter
from core.algorithms.training_engine import (
    TrainingEngine,
    build_optimizer,
    check_partition,
    deterministic_execution,
    param_report,
    train,
)
from core.domain.constants import (
    BEST_CHECKPOINT_FILENAME,
    LAST_CHECKPOINT_FILENAME,
    NAN_DIAGNOSTICS_FILENAME,
    TRAIN_LOG_FILENAME,
)
from core.domain.errors import InputValidationError, PartitionError, TrainingAbortedError
from core.domain.models import TrainConfig
from infrastructure.storage.checkpoint_store import Checkpoint
from tests.conftest import tiny_config

ADAMW = TrainConfig(
    lr_backbone=0.0,
    lr_rein=0.1,
    lr_head=0.1,
    iterations=1,
    batch_size=1,
    crop_size=8,
    weight_decay=0.01,
)


def tensor_group(name, *tensors, trainable=True, lr=0.1):
    return ParamGroup(name=name, tensors=list(tensors), trainable=trainable, learning_rate=lr)


class TestBuildOptimizer:
    """Test AdamW grouping and the update rule."""

    def test_first_step_matches_hand_computation(self):
        weight = nn.Parameter(torch.tensor([[1.0, -2.0], [0.5, 3.0]], dtype=torch.float64))
        bias = nn.Parameter(torch.tensor([0.25, -0.75], dtype=torch.float64))
        optimizer = build_optimizer([tensor_group("head", weight, bias)], ADAMW)
        w0, b0 = weight.detach().clone(), bias.detach().clone()
        grad_w = torch.tensor([[0.3, -0.1], [2.0, 0.0]], dtype=torch.float64)
        grad_b = torch.tensor([-0.4, 0.2], dtype=torch.float64)
        weight.grad, bias.grad = grad_w.clone(), grad_b.clone()

        optimizer.step()

        lr, wd, eps = 0.1, 0.01, ADAMW.eps
        # first step: bias-corrected moments reduce to g and g**2
        expected_w = w0 * (1 - lr * wd) - lr * grad_w / (grad_w.abs() + eps)
        expected_b = b0 - lr * grad_b / (grad_b.abs() + eps)
        assert torch.allclose(weight.detach(), expected_w, atol=1e-12)
        assert torch.allclose(bias.detach(), expected_b, atol=1e-12)

    def test_zero_gradient_only_decays_matrices(self):
        weight = nn.Parameter(torch.ones(2, 2, dtype=torch.float64))
        gate = nn.Parameter(torch.tensor(0.5, dtype=torch.float64))
        optimizer = build_optimizer([tensor_group("rein", weight, gate)], ADAMW)
        weight.grad, gate.grad = torch.zeros_like(weight), torch.zeros_like(gate)

        optimizer.step()

        assert torch.allclose(weight.detach(), torch.full((2, 2), 1 - 0.1 * 0.01, dtype=torch.float64))
        assert float(gate) == 0.5

    def test_groups_named_and_split(self):
        weight, bias = nn.Parameter(torch.ones(2, 2)), nn.Parameter(torch.ones(2))
        optimizer = build_optimizer([tensor_group("head", weight, bias)], ADAMW)
        names = [group["name"] for group in optimizer.param_groups]
        assert names == ["head", "head.no_decay"]
        assert optimizer.param_groups[1]["weight_decay"] == 0.0

    def test_frozen_backbone_not_optimized(self):
        cfg = tiny_config()
        model = build_segmenter(cfg)
        groups = model.param_groups(cfg.train)
        optimizer = build_optimizer(groups, cfg.train, model)

        optimized = {id(p) for group in optimizer.param_groups for p in group["params"]}
        assert not optimized & {id(p) for p in model.backbone.parameters()}
        assert optimized == {id(p) for g in groups if g.trainable for p in g.tensors}

    def test_unfrozen_backbone_trains_at_its_rate(self):
        cfg = tiny_config(train={"backbone_frozen": False, "lr_backbone": 1e-5})
        model = build_segmenter(cfg)
        optimizer = build_optimizer(model.param_groups(cfg.train), cfg.train, model)
        rates = {group["name"]: group["lr"] for group in optimizer.param_groups}
        assert rates["backbone"] == 1e-5

    def test_nothing_trainable(self):
        group = tensor_group("backbone", nn.Parameter(torch.ones(2)), trainable=False)
        with pytest.raises(PartitionError):
            build_optimizer([group], ADAMW)


class TestCheckPartition:
    """Test parameter group partition checks."""

    def test_overlap(self):
        shared = nn.Parameter(torch.ones(2))
        with pytest.raises(PartitionError, match="shared"):
            check_partition([tensor_group("rein", shared), tensor_group("head", shared)])

    def test_uncovered(self):
        model = nn.Linear(2, 2)
        with pytest.raises(PartitionError, match="bias"):
            check_partition([tensor_group("head", model.weight)], model)

    def test_segmenter_groups_partition_model(self):
        cfg = tiny_config()
        for use_adapter in (True, False):
            model = build_segmenter(cfg, use_adapter=use_adapter)
            check_partition(model.param_groups(cfg.train), model)


class TestParamReport:
    """Test trainable-parameter accounting."""

    def test_counts_and_fraction(self):
        cfg = tiny_config()
        model = build_segmenter(cfg)
        report = param_report(model.param_groups(cfg.train))

        by_name = {g["name"]: g for g in report["groups"]}
        assert report["total"] == sum(p.numel() for p in model.parameters())
        assert report["trainable"] == by_name["rein"]["count"] + by_name["head"]["count"]
        assert not by_name["backbone"]["trainable"]
        assert report["trainable_fraction"] == pytest.approx(report["trainable"] / report["total"])

    def test_adapter_is_small_next_to_desk_backbone(self):
        cfg = resolve_run_config()
        model = build_segmenter(cfg)
        by_name = {g.name: g.numel for g in model.param_groups(cfg.train)}
        assert by_name["rein"] / (by_name["rein"] + by_name["backbone"]) < 0.05


class TestDeterministicExecution:
    """Test the threading context manager."""

    def test_restores_previous_state(self):
        threads = torch.get_num_threads()
        deterministic = torch.are_deterministic_algorithms_enabled()
        with deterministic_execution(single_thread=True):
            assert torch.get_num_threads() == 1
            assert torch.are_deterministic_algorithms_enabled()
        assert torch.get_num_threads() == threads
        assert torch.are_deterministic_algorithms_enabled() == deterministic


class TestTrainingEngine:
    """Test the training loop end to end on toy data."""

    def test_writes_run_artifacts(self, tiny_cfg, toy_dataset, tmp_path):
        result = TrainingEngine(tiny_cfg, tmp_path).run(toy_dataset)

        assert (tmp_path / LAST_CHECKPOINT_FILENAME).exists()
        assert (tmp_path / BEST_CHECKPOINT_FILENAME).exists()
        with open(tmp_path / TRAIN_LOG_FILENAME, encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        assert [int(row["iter"]) for row in rows] == list(range(1, 11))
        assert set(rows[0]) == {"iter", "loss", "lr_rein", "lr_head"}

        assert result.checkpoint.iteration == 10
        assert [it for it, _ in result.validation] == [2, 4, 6, 8, 10]
        assert result.best_iteration in {2, 4, 6, 8, 10}
        assert result.selected is result.best_checkpoint

    def test_backbone_untouched(self, tiny_cfg, toy_dataset):
        result = train(tiny_cfg, toy_dataset)
        assert verify_frozen(result.model.backbone)
        assert result.checkpoint.backbone_digest() == result.checkpoint.frozen_digest

    def test_gates_leave_zero(self, toy_dataset):
        cfg = tiny_config(train={"iterations": 20})
        result = train(cfg, toy_dataset)

        assert all(np.isfinite([record["loss"] for record in result.log]))
        assert any(float(bank.gate) != 0.0 for bank in result.model.adapter.banks)

    def test_head_only_baseline_trains(self, toy_dataset):
        cfg = tiny_config(train={"use_adapter": False})
        result = train(cfg, toy_dataset)
        assert result.model.adapter is None
        assert "rein" not in result.checkpoint.group_names()

    def test_single_thread_is_bitwise_reproducible(self, toy_dataset):
        cfg = tiny_config(train={"single_thread": True})
        first = train(cfg, toy_dataset).checkpoint.to_bytes()
        second = train(cfg, toy_dataset).checkpoint.to_bytes()
        assert first == second

    def test_reloaded_checkpoint_matches_model(self, tiny_cfg, toy_dataset, tmp_path):
        result = train(tiny_cfg, toy_dataset, tmp_path)
        loaded = Checkpoint.load(tmp_path / LAST_CHECKPOINT_FILENAME)
        model = build_segmenter(tiny_cfg)
        loaded.apply_to(model)
        for a, b in zip(result.model.parameters(), model.parameters(), strict=True):
            assert torch.equal(a, b)

    def test_too_few_samples_skip_validation(self, tiny_cfg, toy_dataset):
        result = train(tiny_cfg, toy_dataset[:1])
        assert result.validation == []
        assert result.best_checkpoint is None
        assert result.selected is result.checkpoint

    def test_empty_dataset(self, tiny_cfg):
        with pytest.raises(InputValidationError):
            train(tiny_cfg, [])

    def test_non_finite_loss_aborts(self, tiny_cfg, toy_dataset, tmp_path):
        poisoned = [
            replace(sample, image=np.full_like(sample.image, np.nan)) for sample in toy_dataset
        ]

        with pytest.raises(TrainingAbortedError) as excinfo:
            TrainingEngine(tiny_cfg, tmp_path).run(poisoned)

        diagnostics = json.loads((tmp_path / NAN_DIAGNOSTICS_FILENAME).read_text())
        assert diagnostics["iteration"] == 1
        assert "head.mask_mlp.0.weight" in diagnostics["parameter_norms"]
        assert "banks.0.gate" in " ".join(diagnostics["parameter_norms"])
        assert diagnostics["non_finite_parameters"] == []
        assert excinfo.value.diagnostics["path"].endswith(NAN_DIAGNOSTICS_FILENAME)
        assert not (tmp_path / LAST_CHECKPOINT_FILENAME).exists()

    def test_exploding_step_dump_keeps_last_gradients(self, toy_dataset, tmp_path):
        cfg = tiny_config(train={"lr_head": 1e30})

        with pytest.raises(TrainingAbortedError):
            TrainingEngine(cfg, tmp_path).run(toy_dataset)

        diagnostics = json.loads((tmp_path / NAN_DIAGNOSTICS_FILENAME).read_text())
        assert diagnostics["iteration"] == 2
        assert "head.cls_linear.weight" in diagnostics["gradient_norms"]
        assert all(float(norm) <= 1.0 + 1e-4 for norm in diagnostics["gradient_norms"].values())

    def test_gradients_clipped_to_configured_norm(self, toy_dataset, monkeypatch):
        seen: list[float] = []
        clip = torch.nn.utils.clip_grad_norm_

        def recording_clip(parameters, max_norm, *args, **kwargs):
            seen.append(max_norm)
            return clip(parameters, max_norm, *args, **kwargs)

        monkeypatch.setattr(torch.nn.utils, "clip_grad_norm_", recording_clip)
        train(tiny_config(train={"iterations": 3, "grad_clip_norm": 0.5}), toy_dataset)
        train(tiny_config(train={"iterations": 3, "grad_clip_norm": None}), toy_dataset)

        assert seen == [0.5, 0.5, 0.5]
