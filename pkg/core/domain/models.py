"""Domain models for rein-seg."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.domain.constants import (
    AGGREGATE_ROW_NAME,
    DEFAULT_BACKBONE_KIND,
    DEFAULT_BACKBONE_LAYERS,
    DEFAULT_BACKBONE_WIDTH,
    DEFAULT_BETAS,
    DEFAULT_EPS,
    DEFAULT_GRAD_CLIP_NORM,
    DEFAULT_MLP_RATIO,
    DEFAULT_NUM_TOKENS,
    DEFAULT_PATCH_SIZE,
    DEFAULT_PRESET,
    DEFAULT_QUERY_WIDTH,
    DEFAULT_SPLIT_RATIO,
    DEFAULT_THRESHOLD,
    DEFAULT_TOKEN_RANK,
    DEFAULT_WEIGHT_DECAY,
    FINAL_TEST_IMAGES,
    MAX_FOREGROUND_FRACTION,
    PRELIM_TEST_IMAGES,
    PRESETS,
    TRAIN_IMAGES,
)
from core.domain.errors import ConfigurationError, ShapeMismatchError

BackboneKind = Literal["vit_tiny", "conv_tiny"]
ShapeFamily = Literal["ellipse", "polygon", "blob-union"]
PresetName = Literal["paper", "desk"]
ShiftTask = Literal["organ", "scanner"]
CropPolicy = Literal["random", "sliding"]
Aggregation = Literal["per_image", "pooled"]


def format_validation_error(error: ValidationError) -> str:
    """Flatten a pydantic error into one line per violated field."""
    parts = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "config"
        message = str(item["msg"]).removeprefix("Value error, ")
        parts.append(f"{location}: {message}")
    return "; ".join(parts)


class ConfigModel(BaseModel):
    """Immutable configuration section that rejects unknown keys."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> Any:
        """Validate a mapping, raising ConfigurationError on any violation."""
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(format_validation_error(e)) from e


class BackboneConfig(ConfigModel):
    """Small deterministic vision backbone."""

    kind: BackboneKind = DEFAULT_BACKBONE_KIND
    layers: int = Field(default=DEFAULT_BACKBONE_LAYERS, ge=2)
    width: int = Field(default=DEFAULT_BACKBONE_WIDTH, ge=8)
    patch_size: int = Field(default=DEFAULT_PATCH_SIZE, ge=1)
    input_size: int = Field(default=64, ge=1)
    num_heads: int = Field(default=4, ge=1)
    mlp_ratio: int = Field(default=DEFAULT_MLP_RATIO, ge=1)
    seed: int = Field(default=0, ge=0)
    weights_dir: str | None = None

    @model_validator(mode="after")
    def _check_geometry(self) -> BackboneConfig:
        if self.kind == "vit_tiny":
            if self.input_size % self.patch_size != 0:
                raise ValueError("input_size not divisible by patch_size")
            if self.width % self.num_heads != 0:
                raise ValueError("width not divisible by num_heads")
        elif self.patch_size > self.input_size:
            raise ValueError("patch_size larger than input_size")
        return self

    @property
    def grid_size(self) -> int:
        return self.input_size // self.patch_size


class ReinConfig(ConfigModel):
    """Learnable token banks; mlp_hidden defaults to twice the backbone width."""

    num_tokens: int = Field(default=DEFAULT_NUM_TOKENS, ge=1)
    rank: int = Field(default=DEFAULT_TOKEN_RANK, ge=1)
    mlp_hidden: int | None = Field(default=None, ge=1)
    query_width: int = Field(default=DEFAULT_QUERY_WIDTH, ge=1)
    seed: int = Field(default=0, ge=0)

    def hidden_for(self, width: int) -> int:
        return self.mlp_hidden if self.mlp_hidden is not None else 2 * width


class HeadConfig(ConfigModel):
    """Query-based mask head settings."""

    threshold: float = Field(default=DEFAULT_THRESHOLD, gt=0.0, lt=1.0)
    inference_upsample: Literal["bilinear", "nearest"] = "bilinear"
    seed: int = Field(default=0, ge=0)


class DataConfig(ConfigModel):
    """Synthetic cross-domain protocol settings."""

    task: ShiftTask = "organ"
    image_size: int | None = Field(default=None, ge=8)
    train_images: int = Field(default=TRAIN_IMAGES, ge=3)
    prelim_images: int = Field(default=PRELIM_TEST_IMAGES, ge=4)
    test_images: int = Field(default=FINAL_TEST_IMAGES, ge=6)
    split_ratio: float = Field(default=DEFAULT_SPLIT_RATIO, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)


class TrainConfig(ConfigModel):
    """Optimizer and loop settings; unset loop sizes come from the preset."""

    preset: PresetName = DEFAULT_PRESET
    optimizer: Literal["adamw"] = "adamw"
    lr_backbone: float = Field(ge=0.0)
    lr_rein: float = Field(ge=0.0)
    lr_head: float = Field(ge=0.0)
    iterations: int = Field(ge=1)
    batch_size: int = Field(ge=1)
    crop_size: int = Field(ge=8)
    weight_decay: float = Field(default=DEFAULT_WEIGHT_DECAY, ge=0.0)
    betas: tuple[float, float] = DEFAULT_BETAS
    eps: float = Field(default=DEFAULT_EPS, gt=0.0)
    grad_clip_norm: float | None = Field(default=DEFAULT_GRAD_CLIP_NORM, gt=0.0)
    backbone_frozen: bool = True
    use_adapter: bool = True
    checkpoint_every: int | None = Field(default=None, ge=1)
    log_every: int = Field(default=50, ge=1)
    single_thread: bool = False
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _apply_preset(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        preset_values = PRESETS.get(data.get("preset", DEFAULT_PRESET), {})
        merged: dict[str, Any] = {
            key: value for key, value in preset_values.items() if key in cls.model_fields
        }
        merged.update(data)
        return merged

    @property
    def checkpoint_interval(self) -> int:
        if self.checkpoint_every is not None:
            return self.checkpoint_every
        return max(1, self.iterations // 5)


class RunConfig(ConfigModel):
    """Complete experiment configuration recorded in one artifact."""

    backbone: BackboneConfig
    rein: ReinConfig = ReinConfig()
    head: HeadConfig = HeadConfig()
    data: DataConfig
    train: TrainConfig

    @model_validator(mode="before")
    @classmethod
    def _resolve_sizes(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        resolved = dict(data)
        train = dict(resolved.get("train") or {})
        preset_values = PRESETS.get(train.get("preset", DEFAULT_PRESET), {})
        crop_size = train.get("crop_size", preset_values.get("crop_size"))

        backbone = dict(resolved.get("backbone") or {})
        if crop_size is not None:
            backbone.setdefault("input_size", crop_size)
        resolved["backbone"] = backbone

        data_section = dict(resolved.get("data") or {})
        if data_section.get("image_size") is None and "image_size" in preset_values:
            data_section["image_size"] = preset_values["image_size"]
        resolved["data"] = data_section
        resolved["train"] = train
        return resolved

    @model_validator(mode="after")
    def _check_consistency(self) -> RunConfig:
        if self.backbone.input_size != self.train.crop_size:
            raise ValueError("backbone.input_size must equal train.crop_size")
        if self.data.image_size is not None and self.train.crop_size > self.data.image_size:
            raise ValueError("train.crop_size larger than data.image_size")
        if self.rein.rank > min(self.rein.num_tokens, self.backbone.width):
            raise ValueError("rein.rank exceeds min(num_tokens, backbone.width)")
        return self

    @property
    def image_size(self) -> int:
        return self.data.image_size or self.train.crop_size


class DomainSpec(ConfigModel):
    """One synthetic domain: shape family (organ) and colour transform (scanner)."""

    domain_id: str = Field(..., min_length=1)
    shape_family: ShapeFamily
    hue_shift: float = Field(default=0.0, ge=-0.5, le=0.5)
    contrast: float = Field(default=1.0, ge=0.5, le=2.0)
    noise_sigma: float = Field(default=0.0, ge=0.0, le=0.1)
    seed: int = Field(default=0, ge=0)
    image_size: int = Field(default=96, ge=8)


@dataclass(frozen=True)
class ImageSample:
    """RGB image in [0, 1] with its binary mask and domain label.

    Crops carry their top-left origin and the source image shape so tiles
    can be merged back.
    """

    image: np.ndarray
    mask: np.ndarray
    domain_id: str
    sample_id: str
    origin: tuple[int, int] | None = None
    source_shape: tuple[int, int] | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ShapeMismatchError("image", "H x W x 3", self.image.shape)
        if self.mask.shape != self.image.shape[:2]:
            raise ShapeMismatchError("mask", self.image.shape[:2], self.mask.shape)

    @property
    def height(self) -> int:
        return int(self.image.shape[0])

    @property
    def width(self) -> int:
        return int(self.image.shape[1])

    @property
    def foreground_fraction(self) -> float:
        return float(self.mask.mean())

    def has_valid_foreground(self) -> bool:
        return 0.0 < self.foreground_fraction < MAX_FOREGROUND_FRACTION

    def with_region(self, top: int, left: int, size: int) -> ImageSample:
        """Return the size x size crop whose top-left corner is (top, left)."""
        return replace(
            self,
            image=self.image[top : top + size, left : left + size],
            mask=self.mask[top : top + size, left : left + size],
            origin=(top, left),
            source_shape=(self.height, self.width),
        )


class PairCounts(BaseModel):
    """Pixel set quantities of a prediction/ground-truth pair."""

    model_config = ConfigDict(frozen=True)

    intersection: int = Field(..., ge=0)
    pred_area: int = Field(..., ge=0)
    gt_area: int = Field(..., ge=0)
    union: int = Field(..., ge=0)

    @model_validator(mode="after")
    def _check_counts(self) -> PairCounts:
        if self.intersection > min(self.pred_area, self.gt_area):
            raise ValueError("intersection exceeds min(pred_area, gt_area)")
        if self.union != self.pred_area + self.gt_area - self.intersection:
            raise ValueError("union != pred_area + gt_area - intersection")
        return self


class MetricRow(BaseModel):
    """One report line."""

    model_config = ConfigDict(frozen=True)

    name: str
    dsc: float = Field(..., ge=0.0, le=1.0)
    miou: float = Field(..., ge=0.0, le=1.0)
    jsc: float = Field(..., ge=0.0, le=1.0)
    score: float = Field(..., ge=0.0, le=1.0)


class MetricReport(BaseModel):
    """Per-image rows plus an aggregate row."""

    rows: list[MetricRow] = Field(default_factory=list)
    aggregate: MetricRow

    @classmethod
    def from_rows(cls, rows: list[MetricRow]) -> MetricReport:
        """Aggregate as the arithmetic mean of the rows."""
        if not rows:
            raise ValueError("MetricReport needs at least one row")
        count = len(rows)
        aggregate = MetricRow(
            name=AGGREGATE_ROW_NAME,
            dsc=min(1.0, sum(r.dsc for r in rows) / count),
            miou=min(1.0, sum(r.miou for r in rows) / count),
            jsc=min(1.0, sum(r.jsc for r in rows) / count),
            score=min(1.0, sum(r.score for r in rows) / count),
        )
        return cls(rows=rows, aggregate=aggregate)


CommandName = Literal["gen-data", "train", "eval", "score", "rank", "param-report"]


class RunSpec(ConfigModel):
    """One CLI invocation: command, config file and ordered overrides."""

    command: CommandName
    config_path: str | None = None
    overrides: tuple[str, ...] = ()
    preset: PresetName | None = None
    seed: int | None = Field(default=None, ge=0)
