"""Tests for domain models and run-config resolution."""

import json

import numpy as np
import pytest
from pydantic import ValidationError

from config.run_config import (
    config_from_snapshot,
    config_snapshot,
    load_run_config,
    parse_override,
    resolve_run_config,
    save_config_snapshot,
)
from core.domain.errors import ConfigurationError, ShapeMismatchError
from core.domain.models import (
    BackboneConfig,
    DomainSpec,
    ImageSample,
    MetricReport,
    MetricRow,
    PairCounts,
    RunSpec,
    TrainConfig,
)


class TestConfigSections:
    """Test individual configuration sections."""

    def test_backbone_rejects_indivisible_patch(self):
        with pytest.raises(ConfigurationError, match="input_size not divisible by patch_size"):
            BackboneConfig.from_mapping({"input_size": 30, "patch_size": 8})

    def test_backbone_grid_size(self):
        assert BackboneConfig(input_size=64, patch_size=8).grid_size == 8

    def test_desk_preset_fills_loop_sizes(self):
        cfg = TrainConfig.from_mapping({"preset": "desk"})
        assert (cfg.iterations, cfg.batch_size, cfg.crop_size) == (500, 8, 64)
        assert cfg.checkpoint_interval == 100

    def test_paper_preset_rates(self):
        cfg = TrainConfig.from_mapping({"preset": "paper"})
        assert (cfg.iterations, cfg.batch_size, cfg.crop_size) == (60000, 4, 512)
        assert cfg.lr_backbone == 1e-5
        assert cfg.lr_rein == 1e-4
        assert cfg.lr_head == 1e-4

    def test_desk_preset_keeps_default_rates(self):
        cfg = TrainConfig.from_mapping({"preset": "desk"})
        assert (cfg.lr_backbone, cfg.lr_rein, cfg.lr_head) == (1e-5, 1e-4, 1e-4)

        faster = TrainConfig.from_mapping({"preset": "desk", "lr_rein": 1e-3, "lr_head": 1e-3})
        assert (faster.lr_rein, faster.lr_head) == (1e-3, 1e-3)

    def test_explicit_value_beats_preset(self):
        cfg = TrainConfig.from_mapping({"preset": "desk", "iterations": 200})
        assert cfg.iterations == 200
        assert cfg.batch_size == 8

    def test_unknown_key_names_the_key(self):
        with pytest.raises(ConfigurationError, match="learning_rate"):
            TrainConfig.from_mapping({"learning_rate": 0.1})

    def test_domain_spec_ranges(self):
        DomainSpec(domain_id="A", shape_family="ellipse", hue_shift=0.5, contrast=2.0, noise_sigma=0.1)
        with pytest.raises(ValidationError):
            DomainSpec(domain_id="A", shape_family="ellipse", hue_shift=0.6)
        with pytest.raises(ValidationError):
            DomainSpec(domain_id="A", shape_family="ellipse", contrast=0.4)
        with pytest.raises(ValidationError):
            DomainSpec(domain_id="A", shape_family="star")


class TestRunConfig:
    """Test the assembled run configuration."""

    def test_default_is_desk_scale(self):
        cfg = resolve_run_config()
        assert cfg.train.preset == "desk"
        assert cfg.backbone.input_size == 64
        assert cfg.image_size == 96

    def test_paper_preset_propagates_sizes(self):
        cfg = resolve_run_config(preset="paper")
        assert cfg.backbone.input_size == 512
        assert cfg.image_size == 1500

    def test_rank_above_tokens_rejected(self):
        with pytest.raises(ConfigurationError, match="rank"):
            resolve_run_config({"rein": {"num_tokens": 4, "rank": 8}})

    def test_crop_larger_than_image_rejected(self):
        with pytest.raises(ConfigurationError, match="crop_size"):
            resolve_run_config({"data": {"image_size": 32}})

    def test_seed_applies_to_every_section(self):
        cfg = resolve_run_config(seed=7)
        assert {cfg.backbone.seed, cfg.rein.seed, cfg.head.seed, cfg.data.seed, cfg.train.seed} == {7}


class TestOverrides:
    """Test --set parsing and the resolution order."""

    def test_values_parse_as_json(self):
        assert parse_override("train.iterations=200") == ("train", "iterations", 200)
        assert parse_override("train.use_adapter=false") == ("train", "use_adapter", False)
        assert parse_override("train.lr_rein=1e-4") == ("train", "lr_rein", 1e-4)

    def test_bare_words_stay_strings(self):
        assert parse_override("data.task=scanner") == ("data", "task", "scanner")

    def test_malformed_override(self):
        with pytest.raises(ConfigurationError, match="section.key=value"):
            parse_override("iterations=5")

    def test_unknown_section(self):
        with pytest.raises(ConfigurationError, match="optimizer"):
            parse_override("optimizer.lr=1")

    def test_unknown_key_in_override(self):
        with pytest.raises(ConfigurationError, match="bogus"):
            resolve_run_config(overrides=["train.bogus=1"])

    def test_file_then_preset_then_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"train": {"batch_size": 2, "iterations": 50}}))

        spec = RunSpec(
            command="train",
            config_path=str(path),
            preset="desk",
            overrides=("train.iterations=20",),
        )
        cfg = load_run_config(spec)

        assert cfg.train.batch_size == 2
        assert cfg.train.iterations == 20
        assert cfg.train.crop_size == 64

    def test_unknown_section_in_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"trainer": {}}))
        with pytest.raises(ConfigurationError, match="trainer"):
            load_run_config(RunSpec(command="train", config_path=str(path)))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_run_config(RunSpec(command="train", config_path=str(tmp_path / "nope.json")))

    def test_snapshot_round_trip(self, tmp_path):
        cfg = resolve_run_config(overrides=["train.iterations=123", "rein.rank=2"], seed=3)
        save_config_snapshot(cfg, tmp_path / "config.json")

        restored = config_from_snapshot(json.loads((tmp_path / "config.json").read_text()))

        assert restored == cfg
        assert config_snapshot(restored) == config_snapshot(cfg)


class TestImageSample:
    """Test ImageSample validation and cropping."""

    def test_mask_shape_must_match(self):
        with pytest.raises(ShapeMismatchError):
            ImageSample(
                image=np.zeros((8, 8, 3)), mask=np.zeros((8, 7), dtype=bool), domain_id="A", sample_id="x"
            )

    def test_region_records_origin(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[2:4, 2:4] = True
        sample = ImageSample(image=np.zeros((8, 8, 3)), mask=mask, domain_id="A", sample_id="x")

        region = sample.with_region(2, 1, 4)

        assert region.origin == (2, 1)
        assert region.source_shape == (8, 8)
        assert region.mask.sum() == 4
        assert sample.foreground_fraction == pytest.approx(4 / 64)
        assert sample.has_valid_foreground()


class TestMetricModels:
    """Test metric value objects."""

    def test_pair_counts_union_consistent(self):
        PairCounts(intersection=3, pred_area=4, gt_area=6, union=7)
        with pytest.raises(ValidationError):
            PairCounts(intersection=3, pred_area=4, gt_area=6, union=8)
        with pytest.raises(ValidationError):
            PairCounts(intersection=5, pred_area=4, gt_area=6, union=5)

    def test_row_values_bounded(self):
        with pytest.raises(ValidationError):
            MetricRow(name="x", dsc=1.1, miou=0.5, jsc=0.5, score=0.5)

    def test_report_aggregate_is_mean(self):
        rows = [
            MetricRow(name="a", dsc=0.4, miou=0.4, jsc=0.4, score=0.4),
            MetricRow(name="b", dsc=0.6, miou=0.6, jsc=0.6, score=0.6),
        ]
        report = MetricReport.from_rows(rows)
        assert report.aggregate.name == "AGGREGATE"
        assert report.aggregate.score == pytest.approx(0.5)
