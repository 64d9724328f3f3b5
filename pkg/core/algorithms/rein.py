"""Rein: per-layer low-rank learnable token banks with a shared MLP.

Each layer i owns a token bank T_i = A_i @ B_i (m x c, rank <= r) and a gate
lambda_i initialised to 0. Refinement of layer output f is

    S      = row_softmax(f @ T_i^T / sqrt(c))        (n x m)
    delta  = shared_mlp(S @ T_i)                      (n x c)
    f_out  = f + lambda_i * delta

so a freshly initialised adapter is an exact identity. Object queries for the
mask head are the layer-mean of the projected tokens, mean_i(T_i) @ W_q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from core.algorithms.backbone import FeatureMap, ParamGroup
from core.domain.constants import DEFAULT_LR_REIN, TOKEN_INIT_SCALE
from core.domain.errors import ConfigurationError, RankError, ShapeMismatchError
from core.domain.models import ReinConfig


def _uniform(shape: tuple[int, ...], bound: float, generator: torch.Generator) -> torch.Tensor:
    return torch.empty(shape).uniform_(-bound, bound, generator=generator)


class TokenBank(nn.Module):
    """Low-rank token factors and gate for one backbone layer."""

    def __init__(
        self, layer_index: int, num_tokens: int, rank: int, width: int, generator: torch.Generator
    ) -> None:
        super().__init__()
        self.layer_index = layer_index
        self.factor_a = nn.Parameter(_uniform((num_tokens, rank), TOKEN_INIT_SCALE, generator))
        self.factor_b = nn.Parameter(_uniform((rank, width), TOKEN_INIT_SCALE, generator))
        self.gate = nn.Parameter(torch.zeros(()))

    @property
    def num_tokens(self) -> int:
        return int(self.factor_a.shape[0])

    @property
    def rank(self) -> int:
        return int(self.factor_a.shape[1])

    @property
    def width(self) -> int:
        return int(self.factor_b.shape[1])


class SharedMLP(nn.Module):
    """Two-layer GELU MLP; one instance is referenced by every layer."""

    def __init__(self, width: int, hidden: int, generator: torch.Generator) -> None:
        super().__init__()
        self.w1 = nn.Parameter(_uniform((width, hidden), 1.0 / math.sqrt(width), generator))
        self.b1 = nn.Parameter(torch.zeros(hidden))
        self.w2 = nn.Parameter(_uniform((hidden, width), 1.0 / math.sqrt(hidden), generator))
        self.b2 = nn.Parameter(torch.zeros(width))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.gelu(x @ self.w1 + self.b1) @ self.w2 + self.b2


@dataclass(frozen=True)
class QueryBank:
    """Instance queries Q (m x d_q) and the shared projection that produced them."""

    queries: torch.Tensor
    projection: torch.Tensor

    @property
    def num_queries(self) -> int:
        return int(self.queries.shape[0])

    @property
    def width(self) -> int:
        return int(self.queries.shape[1])


class ReinAdapter(nn.Module):
    """Token banks for L layers, one shared MLP and one query projection."""

    def __init__(
        self,
        layers: int,
        num_tokens: int,
        rank: int,
        width: int,
        hidden: int,
        query_width: int,
        seed: int,
    ) -> None:
        super().__init__()
        generator = torch.Generator().manual_seed(seed)
        self.banks = nn.ModuleList(
            TokenBank(index, num_tokens, rank, width, generator) for index in range(layers)
        )
        self.mlp = SharedMLP(width, hidden, generator)
        self.query_proj = nn.Parameter(_uniform((width, query_width), 1.0 / math.sqrt(width), generator))

    @property
    def num_layers(self) -> int:
        return len(self.banks)

    @property
    def width(self) -> int:
        return int(self.query_proj.shape[0])

    @property
    def query_width(self) -> int:
        return int(self.query_proj.shape[1])

    @property
    def num_parameters(self) -> int:
        return sum(int(p.numel()) for p in self.parameters())

    def forward(self, layer_index: int, features: FeatureMap) -> FeatureMap:
        return refine(features, self.banks[layer_index], self.mlp)


def expected_parameter_count(
    layers: int, num_tokens: int, rank: int, width: int, hidden: int, query_width: int
) -> int:
    """Closed-form trainable count L(mr + rc + 1) + (ch + h + hc + c) + c d_q."""
    per_layer = num_tokens * rank + rank * width + 1
    shared = width * hidden + hidden + hidden * width + width
    return layers * per_layer + shared + width * query_width


def init_adapter(
    layers: int,
    num_tokens: int,
    rank: int,
    width: int,
    hidden: int,
    query_width: int,
    seed: int = 0,
) -> ReinAdapter:
    """Create an adapter whose gates are all zero.

    Raises:
        RankError: If rank > min(num_tokens, width)
        ConfigurationError: If layers < 1
    """
    if layers < 1:
        raise ConfigurationError("adapter needs at least one layer")
    if rank > min(num_tokens, width):
        raise RankError(f"rank {rank} exceeds min(m={num_tokens}, c={width})")
    return ReinAdapter(layers, num_tokens, rank, width, hidden, query_width, seed)


def adapter_from_config(cfg: ReinConfig, layers: int, width: int) -> ReinAdapter:
    return init_adapter(
        layers=layers,
        num_tokens=cfg.num_tokens,
        rank=cfg.rank,
        width=width,
        hidden=cfg.hidden_for(width),
        query_width=cfg.query_width,
        seed=cfg.seed,
    )


def materialize_tokens(bank: TokenBank) -> torch.Tensor:
    """Return T = A @ B (m x c)."""
    return bank.factor_a @ bank.factor_b


def token_similarity(features: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
    """Row-softmax of scaled feature/token dot products, ``... x n x m``."""
    width = tokens.shape[-1]
    return torch.softmax(features @ tokens.transpose(0, 1) / math.sqrt(width), dim=-1)


def refine(features: FeatureMap, bank: TokenBank, mlp: SharedMLP) -> FeatureMap:
    """Return f + lambda * mlp(S @ T) for one layer's features."""
    if features.width != bank.width:
        raise ShapeMismatchError("feature width", bank.width, features.width)
    tokens = materialize_tokens(bank)
    delta = mlp(token_similarity(features.data, tokens) @ tokens)
    return features.replace_data(features.data + bank.gate * delta)


def extract_queries(adapter: ReinAdapter) -> QueryBank:
    """Q = mean over layers of T_i, projected by the shared W_q."""
    tokens = torch.stack([materialize_tokens(bank) for bank in adapter.banks])
    return QueryBank(queries=tokens.mean(dim=0) @ adapter.query_proj, projection=adapter.query_proj)


def trainable_parameters(adapter: ReinAdapter, learning_rate: float = DEFAULT_LR_REIN) -> ParamGroup:
    """All adapter parameters: {A_i, B_i, lambda_i}, the shared MLP and W_q."""
    return ParamGroup(
        name="rein",
        tensors=list(adapter.parameters()),
        trainable=True,
        learning_rate=learning_rate,
    )
