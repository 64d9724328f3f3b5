"""Tests for checkpoint blobs and weight manifests."""

import numpy as np
import pytest
import torch

from core.algorithms.backbone import backbone_digest
from core.algorithms.segmenter import build_segmenter
from core.domain.errors import CheckpointError
from infrastructure.storage.checkpoint_store import Checkpoint
from infrastructure.storage.weight_manifest import read_weight_manifest, write_weight_manifest
from tests.conftest import tiny_config


@pytest.fixture
def model_and_groups():
    cfg = tiny_config()
    model = build_segmenter(cfg)
    return model, model.param_groups(cfg.train)


class TestCheckpoint:
    """Test the binary checkpoint format."""

    def test_bytes_are_canonical(self, model_and_groups):
        model, groups = model_and_groups
        blob = Checkpoint.from_module(model, groups, {"seed": 0}, iteration=7).to_bytes()
        assert Checkpoint.from_bytes(blob).to_bytes() == blob

    def test_round_trip_restores_parameters(self, model_and_groups, tmp_path):
        model, groups = model_and_groups
        checkpoint = Checkpoint.from_module(
            model, groups, iteration=3, frozen_digest=model.backbone.frozen_digest
        )
        checkpoint.save(tmp_path / "last.ckpt")

        fresh = build_segmenter(tiny_config(rein={"seed": 5}, head={"seed": 5}))
        loaded = Checkpoint.load(tmp_path / "last.ckpt")
        loaded.apply_to(fresh)

        assert loaded.iteration == 3
        for (name, a), (_, b) in zip(
            model.named_parameters(), fresh.named_parameters(), strict=True
        ):
            assert torch.equal(a, b), name

    def test_manifest_records_groups(self, model_and_groups):
        model, groups = model_and_groups
        checkpoint = Checkpoint.from_module(model, groups)

        assert checkpoint.group_names() == ["backbone", "head", "rein"]
        backbone_entries = [e for e in checkpoint.manifest if e.group == "backbone"]
        assert backbone_entries and not any(e.trainable for e in backbone_entries)

    def test_backbone_digest_matches_freeze(self, model_and_groups):
        model, groups = model_and_groups
        checkpoint = Checkpoint.from_module(model, groups)
        assert checkpoint.backbone_digest() == model.backbone.frozen_digest
        assert checkpoint.backbone_digest() == backbone_digest(model.backbone)

    def test_bad_magic(self):
        with pytest.raises(CheckpointError, match="magic"):
            Checkpoint.from_bytes(b"NOTACKPT" + bytes(32))

    def test_truncated_payload(self, model_and_groups):
        model, groups = model_and_groups
        blob = Checkpoint.from_module(model, groups).to_bytes()
        with pytest.raises(CheckpointError, match="Truncated"):
            Checkpoint.from_bytes(blob[:-4])

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            Checkpoint.load(tmp_path / "none.ckpt")

    def test_apply_to_other_architecture(self, model_and_groups):
        model, groups = model_and_groups
        checkpoint = Checkpoint.from_module(model, groups)
        other = build_segmenter(tiny_config(), use_adapter=False)
        with pytest.raises(CheckpointError):
            checkpoint.apply_to(other)


class TestWeightManifest:
    """Test the flat index + raw float32 layout."""

    def test_round_trip(self, tmp_path):
        arrays = {
            "blocks.0.weight": np.arange(6, dtype=np.float32).reshape(2, 3),
            "gate": np.array(0.5, dtype=np.float32),
        }
        write_weight_manifest(arrays, tmp_path)

        loaded = read_weight_manifest(tmp_path)

        assert set(loaded) == set(arrays)
        assert np.array_equal(loaded["blocks.0.weight"], arrays["blocks.0.weight"])
        assert loaded["gate"].shape == ()

    def test_missing_index(self, tmp_path):
        with pytest.raises(CheckpointError, match="index"):
            read_weight_manifest(tmp_path)

    def test_short_payload(self, tmp_path):
        write_weight_manifest({"w": np.ones((2, 2), dtype=np.float32)}, tmp_path)
        path = tmp_path / "w.bin"
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(CheckpointError, match="expected 4 values"):
            read_weight_manifest(tmp_path)
