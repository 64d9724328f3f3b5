"""Backbone + Rein + mask head wiring and tiled full-image inference."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

from core.algorithms.backbone import (
    ParamGroup,
    VisionBackbone,
    build_backbone,
    forward_with_adapter,
    freeze,
    import_weights,
)
from core.algorithms.rein import (
    QueryBank,
    ReinAdapter,
    adapter_from_config,
    extract_queries,
    trainable_parameters,
)
from core.algorithms.seg_head import MaskHead, MaskPrediction, UpsampleMode, build_head, predict
from core.algorithms.tiling import merge_tiles, sliding_offsets
from core.domain.constants import QUERY_EMBED_STD
from core.domain.models import RunConfig, TrainConfig
from utils.logging_config import get_logger

logger = get_logger(__name__)


class ReinSegmenter(nn.Module):
    """Frozen backbone, optional Rein adapter and a query-based mask head.

    The head always owns a learned query embedding. With an adapter the Rein
    queries are added to it. A fresh adapter leaves the backbone features
    unchanged and its queries start near zero, so a fresh adapted model
    decodes almost exactly like the head-only baseline built from the same seeds.
    """

    def __init__(
        self,
        backbone: VisionBackbone,
        head: MaskHead,
        adapter: ReinAdapter | None = None,
        num_queries: int | None = None,
    ) -> None:
        super().__init__()
        self.backbone = backbone
        self.adapter = adapter
        self.head = head
        if num_queries is None:
            if adapter is None:
                raise ValueError("num_queries is required without an adapter")
            num_queries = adapter.banks[0].num_tokens
        generator = torch.Generator().manual_seed(backbone.config.seed + 1)
        self.query_embed = nn.Parameter(
            torch.empty(num_queries, head.query_width).normal_(0.0, QUERY_EMBED_STD, generator=generator)
        )

    def queries(self) -> QueryBank:
        if self.adapter is None:
            return QueryBank(queries=self.query_embed, projection=self.query_embed)
        rein = extract_queries(self.adapter)
        return QueryBank(queries=self.query_embed + rein.queries, projection=rein.projection)

    def forward(self, images: torch.Tensor, upsample: UpsampleMode = "bilinear") -> MaskPrediction:
        _, final = forward_with_adapter(self.backbone, images, self.adapter)
        return predict(final, self.queries(), self.head, upsample=upsample)

    def param_groups(self, cfg: TrainConfig) -> list[ParamGroup]:
        """Partition parameters into backbone / rein / head groups.

        A frozen backbone is snapshotted by freeze(); an unfrozen one trains at
        lr_backbone.
        """
        if cfg.backbone_frozen:
            groups = freeze(self.backbone)
            groups[0].learning_rate = cfg.lr_backbone
        else:
            tensors = list(self.backbone.parameters())
            for tensor in tensors:
                tensor.requires_grad_(True)
            groups = [ParamGroup("backbone", tensors, trainable=True, learning_rate=cfg.lr_backbone)]

        if self.adapter is not None:
            groups.append(trainable_parameters(self.adapter, cfg.lr_rein))
        head_tensors = [*self.head.parameters(), self.query_embed]
        groups.append(ParamGroup("head", head_tensors, True, cfg.lr_head))
        return groups


def build_segmenter(
    cfg: RunConfig, use_adapter: bool | None = None, load_weights: bool = True
) -> ReinSegmenter:
    """Build the full model from a run configuration.

    When backbone.weights_dir is set the backbone is initialised from that
    weight manifest instead of its seed.
    """
    use_adapter = cfg.train.use_adapter if use_adapter is None else use_adapter
    backbone = build_backbone(cfg.backbone)
    if load_weights and cfg.backbone.weights_dir:
        import_weights(backbone, Path(cfg.backbone.weights_dir))
    adapter = (
        adapter_from_config(cfg.rein, backbone.num_layers, cfg.backbone.width)
        if use_adapter
        else None
    )
    head = build_head(
        query_width=cfg.rein.query_width,
        width=cfg.backbone.width,
        output_size=cfg.backbone.input_size,
        seed=cfg.head.seed,
        num_queries=cfg.rein.num_tokens,
    )
    model = ReinSegmenter(backbone, head, adapter, num_queries=cfg.rein.num_tokens)
    logger.debug(
        f"Built segmenter: backbone={cfg.backbone.kind} adapter={'on' if adapter else 'off'}"
    )
    return model


@torch.no_grad()
def predict_probability_map(
    model: ReinSegmenter,
    image: np.ndarray,
    crop_size: int,
    upsample: UpsampleMode = "bilinear",
    batch_size: int = 16,
) -> np.ndarray:
    """Tile an H x W x 3 image with sliding crops, predict and mean-merge."""
    height, width = image.shape[:2]
    coords = [
        (top, left)
        for top in sliding_offsets(height, crop_size)
        for left in sliding_offsets(width, crop_size)
    ]
    tiles = np.stack(
        [image[top : top + crop_size, left : left + crop_size] for top, left in coords]
    )
    was_training = model.training
    model.eval()
    probs: list[np.ndarray] = []
    for start in range(0, len(tiles), batch_size):
        batch = torch.from_numpy(tiles[start : start + batch_size]).to(model.backbone.dtype)
        prediction = model(batch, upsample=upsample)
        probs.extend(prediction.semantic_prob.cpu().numpy().astype(np.float64))
    model.train(was_training)
    return merge_tiles(probs, coords, height, width)
