"""Shared type definitions for rein-seg.

This module centralizes TypedDict definitions to avoid circular imports.
"""

from typing import TypedDict


class TrainLogRecord(TypedDict):
    """One line of the training log."""

    iter: int
    loss: float
    lr_rein: float
    lr_head: float


class ParamGroupSummary(TypedDict):
    """Per-group row of a parameter report."""

    name: str
    count: int
    trainable: bool
    learning_rate: float


class ParamReportDict(TypedDict):
    """Parameter report as emitted by the training engine."""

    groups: list[ParamGroupSummary]
    total: int
    trainable: int
    trainable_fraction: float


class LeaderboardEntry(TypedDict):
    """One ranked team."""

    rank: int
    name: str
    score: float


class DomainSummary(TypedDict):
    """Aggregate metrics for one domain of an evaluation set."""

    domain_id: str
    seen: bool
    images: int
    dsc: float
    miou: float
    jsc: float
    score: float
