"""Query-based binary mask head with aggregated semantic inference."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import torch
import torch.nn.functional as F
from torch import nn

from core.algorithms.backbone import FeatureMap
from core.algorithms.rein import QueryBank
from core.domain.constants import FOREGROUND_CLASS, NUM_CLASS_LOGITS, SOFT_DICE_SMOOTH
from core.domain.errors import InputValidationError, ShapeMismatchError

UpsampleMode = Literal["bilinear", "nearest"]


@dataclass(frozen=True)
class MaskPrediction:
    """Per-query logits and the aggregated foreground probability."""

    mask_logits: torch.Tensor  # batch x m x H x W
    class_logits: torch.Tensor  # m x 2 (foreground, no-object)
    semantic_prob: torch.Tensor  # batch x H x W


class MaskHead(nn.Module):
    """mask_mlp: d_q -> c two-layer MLP, cls_linear: d_q -> {foreground, no-object}.

    Final features pass through feature_norm before the query dot products,
    so mask logits stay on one scale however far adapters move the features.

    The class bias starts every query at foreground probability 1/m, so the
    clamped sum over queries begins near 0.5 instead of saturating at 1.
    """

    def __init__(
        self,
        query_width: int,
        width: int,
        output_size: int,
        num_queries: int = 1,
    ) -> None:
        super().__init__()
        self.query_width = query_width
        self.width = width
        self.output_size = output_size
        self.feature_norm = nn.LayerNorm(width)
        self.mask_mlp = nn.Sequential(
            nn.Linear(query_width, query_width),
            nn.GELU(),
            nn.Linear(query_width, width),
        )
        self.cls_linear = nn.Linear(query_width, NUM_CLASS_LOGITS)
        if num_queries > 1:
            with torch.no_grad():
                self.cls_linear.bias.zero_()
                self.cls_linear.bias[FOREGROUND_CLASS] = -math.log(num_queries - 1)

    @property
    def num_parameters(self) -> int:
        return sum(int(p.numel()) for p in self.parameters())


def build_head(
    query_width: int,
    width: int,
    output_size: int,
    seed: int,
    num_queries: int = 1,
) -> MaskHead:
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return MaskHead(query_width, width, output_size, num_queries)


def semantic_probability(mask_logits: torch.Tensor, class_logits: torch.Tensor) -> torch.Tensor:
    """sum_q softmax(class)_q[fg] * sigmoid(mask_q), clamped to [0, 1]."""
    foreground = class_logits.softmax(dim=-1)[:, FOREGROUND_CLASS]
    return torch.einsum("q,bqhw->bhw", foreground, mask_logits.sigmoid()).clamp(0.0, 1.0)


def predict(
    final_features: FeatureMap,
    queries: QueryBank,
    head: MaskHead,
    upsample: UpsampleMode = "bilinear",
) -> MaskPrediction:
    """Decode masks from final features and object queries."""
    if queries.width != head.query_width:
        raise ShapeMismatchError("query width", head.query_width, queries.width)
    if final_features.width != head.width:
        raise ShapeMismatchError("feature width", head.width, final_features.width)

    embeddings = head.mask_mlp(queries.queries)
    logits = torch.einsum("qc,bnc->bqn", embeddings, head.feature_norm(final_features.data))
    logits = logits.reshape(
        final_features.batch, queries.num_queries, final_features.grid_h, final_features.grid_w
    )
    size = (head.output_size, head.output_size)
    if upsample == "bilinear":
        logits = F.interpolate(logits, size=size, mode="bilinear", align_corners=False)
    else:
        logits = F.interpolate(logits, size=size, mode="nearest")

    class_logits = head.cls_linear(queries.queries)
    return MaskPrediction(
        mask_logits=logits,
        class_logits=class_logits,
        semantic_prob=semantic_probability(logits, class_logits),
    )


def _check_binary(gt: torch.Tensor) -> None:
    if not torch.all((gt == 0) | (gt == 1)):
        raise InputValidationError("ground-truth mask must be binary (0/1)")


def bce_term(prob: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    return F.binary_cross_entropy(prob, gt.to(prob.dtype))


def soft_dice(prob: torch.Tensor, gt: torch.Tensor, smooth: float = SOFT_DICE_SMOOTH) -> torch.Tensor:
    gt = gt.to(prob.dtype)
    intersection = (prob * gt).sum()
    return (2.0 * intersection + smooth) / (prob.sum() + gt.sum() + smooth)


def segmentation_loss(pred: MaskPrediction | torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """BCE(p, gt) + (1 - soft_dice(p, gt)); zero iff p equals a hard gt exactly.

    Raises:
        ShapeMismatchError: If the probability map and mask shapes differ
        InputValidationError: If gt is not binary
    """
    prob = pred.semantic_prob if isinstance(pred, MaskPrediction) else pred
    if tuple(prob.shape) != tuple(gt.shape):
        raise ShapeMismatchError("mask", tuple(prob.shape), tuple(gt.shape))
    _check_binary(gt)
    return bce_term(prob, gt) + (1.0 - soft_dice(prob, gt))
