"""Small deterministic vision backbones with an inter-layer adapter hook.

Both backbone kinds expose their per-layer output as a flattened
``batch x n x c`` FeatureMap so one adapter interface serves either kind.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from core.domain.constants import CONV_KERNEL_SIZE
from core.domain.errors import CheckpointError, ShapeMismatchError
from core.domain.models import BackboneConfig
from infrastructure.storage.weight_manifest import read_weight_manifest, write_weight_manifest
from utils.logging_config import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class FeatureMap:
    """Per-layer features, spatial grid flattened to n = grid_h * grid_w."""

    data: torch.Tensor
    grid_h: int
    grid_w: int

    def __post_init__(self) -> None:
        if self.data.ndim != 3:
            raise ShapeMismatchError("feature map", "batch x n x c", tuple(self.data.shape))
        if self.grid_h * self.grid_w != self.data.shape[1]:
            raise ShapeMismatchError(
                "feature grid", int(self.data.shape[1]), self.grid_h * self.grid_w
            )

    @property
    def batch(self) -> int:
        return int(self.data.shape[0])

    @property
    def num_positions(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    def as_grid(self) -> torch.Tensor:
        """Return the features as ``batch x c x grid_h x grid_w``."""
        return self.data.transpose(1, 2).reshape(
            self.batch, self.width, self.grid_h, self.grid_w
        )

    @classmethod
    def from_grid(cls, grid: torch.Tensor) -> FeatureMap:
        batch, width, grid_h, grid_w = grid.shape
        return cls(grid.flatten(2).transpose(1, 2), grid_h, grid_w)

    def replace_data(self, data: torch.Tensor) -> FeatureMap:
        return FeatureMap(data, self.grid_h, self.grid_w)


@dataclass
class ParamGroup:
    """Named set of parameters sharing a learning rate and trainable flag."""

    name: str
    tensors: list[nn.Parameter]
    trainable: bool
    learning_rate: float = 0.0

    @property
    def numel(self) -> int:
        return sum(int(t.numel()) for t in self.tensors)


class AdapterHook(Protocol):
    """Refines the output of layer ``layer_index`` before the next layer sees it."""

    def __call__(self, layer_index: int, features: FeatureMap) -> FeatureMap: ...


class VisionBackbone(nn.Module, ABC):
    """Base class for backbones that can be driven one layer at a time."""

    def __init__(self, config: BackboneConfig) -> None:
        super().__init__()
        self.config = config
        self.frozen_digest: str | None = None

    @abstractmethod
    def embed(self, images: torch.Tensor) -> FeatureMap:
        """Map ``batch x 3 x H x W`` images to the layer-0 input."""

    @abstractmethod
    def run_layer(self, index: int, features: FeatureMap) -> FeatureMap:
        """Apply layer ``index``."""

    @property
    def num_layers(self) -> int:
        return self.config.layers

    @property
    def num_parameters(self) -> int:
        return sum(int(p.numel()) for p in self.parameters())

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    @property
    def layer_boundaries(self) -> list[str]:
        return [f"blocks.{index}" for index in range(self.num_layers)]

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        _, final = forward_with_adapter(self, images)
        return final.data


class Attention(nn.Module):
    """Multi-head self-attention without dropout."""

    def __init__(self, width: int, num_heads: int) -> None:
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = width // num_heads
        self.qkv = nn.Linear(width, 3 * width)
        self.proj = nn.Linear(width, width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        batch, positions, width = x.shape
        qkv = self.qkv(x).view(batch, positions, 3, self.num_heads, self.head_dim)
        query, key, value = qkv.permute(2, 0, 3, 1, 4).unbind(0)
        attn = (query @ key.transpose(-2, -1)) * self.head_dim**-0.5
        out = attn.softmax(dim=-1) @ value
        return self.proj(out.transpose(1, 2).reshape(batch, positions, width))


class TransformerBlock(nn.Module):
    """Pre-norm transformer encoder block."""

    def __init__(self, width: int, num_heads: int, mlp_ratio: int) -> None:
        super().__init__()
        self.norm1 = nn.LayerNorm(width)
        self.attn = Attention(width, num_heads)
        self.norm2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, width * mlp_ratio),
            nn.GELU(),
            nn.Linear(width * mlp_ratio, width),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class ConvNeXtBlock(nn.Module):
    """Depthwise 7x7 -> GroupNorm -> pointwise MLP -> residual."""

    def __init__(self, width: int, mlp_ratio: int) -> None:
        super().__init__()
        self.dw = nn.Conv2d(
            width, width, CONV_KERNEL_SIZE, padding=CONV_KERNEL_SIZE // 2, groups=width
        )
        self.norm = nn.GroupNorm(1, width)
        self.pw1 = nn.Conv2d(width, width * mlp_ratio, kernel_size=1)
        self.act = nn.GELU()
        self.pw2 = nn.Conv2d(width * mlp_ratio, width, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.pw2(self.act(self.pw1(self.norm(self.dw(x)))))


class ViTTiny(VisionBackbone):
    """Patch-embedding transformer with learned positional embeddings."""

    def __init__(self, config: BackboneConfig) -> None:
        super().__init__(config)
        width = config.width
        positions = config.grid_size**2
        self.patch_embed = nn.Conv2d(
            3, width, kernel_size=config.patch_size, stride=config.patch_size
        )
        self.pos_embed = nn.Parameter(torch.zeros(1, positions, width))
        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        self.blocks = nn.ModuleList(
            TransformerBlock(width, config.num_heads, config.mlp_ratio)
            for _ in range(config.layers)
        )

    def embed(self, images: torch.Tensor) -> FeatureMap:
        features = FeatureMap.from_grid(self.patch_embed(images))
        return features.replace_data(features.data + self.pos_embed)

    def run_layer(self, index: int, features: FeatureMap) -> FeatureMap:
        return features.replace_data(self.blocks[index](features.data))


class ConvTiny(VisionBackbone):
    """ConvNeXt-style isotropic network on a patchified grid."""

    def __init__(self, config: BackboneConfig) -> None:
        super().__init__(config)
        width = config.width
        self.stem = nn.Sequential(
            nn.Conv2d(3, width, kernel_size=config.patch_size, stride=config.patch_size),
            nn.GroupNorm(1, width),
        )
        self.blocks = nn.ModuleList(
            ConvNeXtBlock(width, config.mlp_ratio) for _ in range(config.layers)
        )

    def embed(self, images: torch.Tensor) -> FeatureMap:
        return FeatureMap.from_grid(self.stem(images))

    def run_layer(self, index: int, features: FeatureMap) -> FeatureMap:
        return FeatureMap.from_grid(self.blocks[index](features.as_grid()))


_BACKBONES: dict[str, type[VisionBackbone]] = {
    "vit_tiny": ViTTiny,
    "conv_tiny": ConvTiny,
}


def build_backbone(cfg: BackboneConfig) -> VisionBackbone:
    """Build a backbone initialised deterministically from ``cfg.seed``."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed)
        backbone = _BACKBONES[cfg.kind](cfg)
    logger.debug(
        f"Built {cfg.kind} backbone: {backbone.num_layers} layers, "
        f"{backbone.num_parameters} parameters"
    )
    return backbone


def forward_with_adapter(
    backbone: VisionBackbone,
    images: torch.Tensor | np.ndarray,
    adapter: AdapterHook | None = None,
) -> tuple[list[FeatureMap], FeatureMap]:
    """Run the backbone layer by layer, refining each output with ``adapter``.

    Args:
        backbone: The backbone to run
        images: ``batch x H x W x 3`` array with values in [0, 1]
        adapter: Optional hook applied to layer i's output before layer i+1

    Returns:
        Per-layer feature maps and the final feature map
    """
    size = backbone.config.input_size
    expected = (size, size, 3)
    if images.ndim != 4 or tuple(images.shape[1:]) != expected:
        raise ShapeMismatchError("images", ("batch", *expected), tuple(images.shape))

    dtype = backbone.dtype
    batch = torch.as_tensor(images).to(dtype=dtype).permute(0, 3, 1, 2)
    features = backbone.embed(batch)

    per_layer: list[FeatureMap] = []
    for index in range(backbone.num_layers):
        features = backbone.run_layer(index, features)
        if adapter is not None:
            features = adapter(index, features)
        per_layer.append(features)
    return per_layer, per_layer[-1]


def parameter_digest(named_parameters: Iterable[tuple[str, torch.Tensor]]) -> str:
    """SHA-256 over parameter names, shapes, dtypes and raw bytes."""
    digest = hashlib.sha256()
    for name, tensor in named_parameters:
        array = tensor.detach().cpu().contiguous().numpy()
        digest.update(name.encode())
        digest.update(str(tuple(array.shape)).encode())
        digest.update(str(array.dtype).encode())
        digest.update(array.tobytes())
    return digest.hexdigest()


def backbone_digest(backbone: VisionBackbone) -> str:
    return parameter_digest(backbone.named_parameters())


def freeze(backbone: VisionBackbone) -> list[ParamGroup]:
    """Freeze every backbone parameter (norm layers included) and snapshot them."""
    tensors = list(backbone.parameters())
    for tensor in tensors:
        tensor.requires_grad_(False)
    backbone.frozen_digest = backbone_digest(backbone)
    logger.debug(f"Froze backbone ({backbone.num_parameters} parameters)")
    return [ParamGroup(name="backbone", tensors=tensors, trainable=False)]


def verify_frozen(backbone: VisionBackbone) -> bool:
    """True when the backbone still matches the digest recorded by freeze()."""
    if backbone.frozen_digest is None:
        return False
    return backbone_digest(backbone) == backbone.frozen_digest


def export_weights(backbone: VisionBackbone, directory: Path) -> None:
    """Write the backbone parameters as a flat weight manifest."""
    arrays = {
        name: tensor.detach().cpu().numpy() for name, tensor in backbone.named_parameters()
    }
    write_weight_manifest(arrays, directory)


def import_weights(backbone: VisionBackbone, directory: Path) -> None:
    """Load a flat weight manifest into the backbone in place."""
    arrays = read_weight_manifest(directory)
    parameters = dict(backbone.named_parameters())
    unknown = sorted(set(arrays) - set(parameters))
    if unknown:
        raise CheckpointError(f"Unknown parameters in weight manifest: {', '.join(unknown)}")
    with torch.no_grad():
        for name, array in arrays.items():
            target = parameters[name]
            if tuple(array.shape) != tuple(target.shape):
                raise CheckpointError(
                    f"Shape mismatch for {name}: expected {tuple(target.shape)}, "
                    f"got {tuple(array.shape)}"
                )
            target.copy_(torch.from_numpy(array).to(dtype=target.dtype))
    logger.info(f"Imported {len(arrays)} backbone tensors from {directory}")
