"""Challenge evaluation: DSC, JSC, mIoU, combined score, reports and ranking.

Every metric is computed from exact integer pixel counts. A pair where both
sides are empty for a class counts as a perfect prediction (1.0).
"""

import math
from collections import defaultdict
from collections.abc import Callable, Collection, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from core.domain.constants import AGGREGATE_ROW_NAME
from core.domain.errors import IngestionError, InputValidationError, ShapeMismatchError
from core.domain.models import Aggregation, MetricReport, MetricRow, PairCounts
from core.domain.types import DomainSummary, LeaderboardEntry
from infrastructure.data.dataset_store import mask_stems, read_mask
from utils.logging_config import get_logger

logger = get_logger(__name__)


def pair_counts(pred: np.ndarray, gt: np.ndarray) -> PairCounts:
    """Intersection, areas and union of two binary masks (nonzero = foreground)."""
    if pred.shape != gt.shape:
        raise ShapeMismatchError("mask", gt.shape, pred.shape)
    p = np.asarray(pred).astype(bool)
    g = np.asarray(gt).astype(bool)
    intersection = int(np.count_nonzero(p & g))
    pred_area = int(np.count_nonzero(p))
    gt_area = int(np.count_nonzero(g))
    return PairCounts(
        intersection=intersection,
        pred_area=pred_area,
        gt_area=gt_area,
        union=pred_area + gt_area - intersection,
    )


def _ratio(numerator: int, denominator: int) -> float:
    return 1.0 if denominator == 0 else numerator / denominator


def dsc_from_counts(counts: PairCounts) -> float:
    return _ratio(2 * counts.intersection, counts.pred_area + counts.gt_area)


def jsc_from_counts(counts: PairCounts) -> float:
    return _ratio(counts.intersection, counts.union)


def miou_from_counts(counts: PairCounts, total: int) -> float:
    """Mean of foreground and background IoU over ``total`` pixels."""
    foreground = _ratio(counts.intersection, counts.union)
    background = _ratio(total - counts.union, total - counts.intersection)
    return (foreground + background) / 2.0


def dsc(pred: np.ndarray, gt: np.ndarray) -> float:
    """2|P n G| / (|P| + |G|)."""
    return dsc_from_counts(pair_counts(pred, gt))


def jsc(pred: np.ndarray, gt: np.ndarray) -> float:
    """|P n G| / |P u G|."""
    return jsc_from_counts(pair_counts(pred, gt))


def miou(pred: np.ndarray, gt: np.ndarray) -> float:
    return miou_from_counts(pair_counts(pred, gt), int(np.asarray(gt).size))


def challenge_score(d: float, j: float) -> float:
    """0.5 * DSC + 0.5 * JSC.

    Raises:
        InputValidationError: If either input is outside [0, 1]
    """
    for label, value in (("dsc", d), ("jsc", j)):
        if not (math.isfinite(value) and 0.0 <= value <= 1.0):
            raise InputValidationError(f"{label} must be in [0, 1], got {value}")
    return 0.5 * d + 0.5 * j


def row_from_counts(name: str, counts: PairCounts, total: int) -> MetricRow:
    d = dsc_from_counts(counts)
    j = jsc_from_counts(counts)
    return MetricRow(
        name=name,
        dsc=d,
        miou=miou_from_counts(counts, total),
        jsc=j,
        score=challenge_score(d, j),
    )


def score_pair(name: str, pred: np.ndarray, gt: np.ndarray) -> MetricRow:
    return row_from_counts(name, pair_counts(pred, gt), int(np.asarray(gt).size))


def _pool(counts: Sequence[PairCounts]) -> PairCounts:
    return PairCounts(
        intersection=sum(c.intersection for c in counts),
        pred_area=sum(c.pred_area for c in counts),
        gt_area=sum(c.gt_area for c in counts),
        union=sum(c.union for c in counts),
    )


def build_report(
    named_pairs: Sequence[tuple[str, np.ndarray, np.ndarray]],
    aggregation: Aggregation = "per_image",
) -> MetricReport:
    """One row per pair plus an aggregate row.

    per_image: aggregate is the arithmetic mean of the rows.
    pooled: aggregate is computed once from pixel counts summed over all pairs.
    """
    if not named_pairs:
        raise InputValidationError("cannot build a report from zero pairs")
    counts = [pair_counts(pred, gt) for _, pred, gt in named_pairs]
    totals = [int(np.asarray(gt).size) for _, _, gt in named_pairs]
    rows = [
        row_from_counts(name, c, total)
        for (name, _, _), c, total in zip(named_pairs, counts, totals, strict=True)
    ]
    if aggregation == "per_image":
        return MetricReport.from_rows(rows)
    return MetricReport(rows=rows, aggregate=row_from_counts(AGGREGATE_ROW_NAME, _pool(counts), sum(totals)))


def evaluate_dirs(
    pred_dir: Path,
    gt_dir: Path,
    aggregation: Aggregation = "per_image",
    max_workers: int | None = None,
) -> MetricReport:
    """Score every prediction mask against the ground truth with the same stem.

    Either directory may be a flat folder of masks or a dataset directory
    with a ``masks/`` subfolder.

    Raises:
        IngestionError: If any stem is present on one side only
    """
    preds = mask_stems(pred_dir)
    gts = mask_stems(gt_dir)
    unmatched = sorted(set(preds) ^ set(gts))
    if unmatched:
        raise IngestionError(f"Unmatched mask stems: {', '.join(unmatched)}")
    if not gts:
        raise IngestionError(f"No masks found in {gt_dir}")

    stems = sorted(gts)

    def load(stem: str) -> tuple[str, np.ndarray, np.ndarray]:
        return stem, read_mask(preds[stem]), read_mask(gts[stem])

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        named_pairs = list(pool.map(load, stems))
    logger.info(f"Evaluating {len(stems)} mask pairs ({aggregation})")
    return build_report(named_pairs, aggregation)


def summarize_domains(
    report: MetricReport,
    domain_of: Callable[[str], str] | Mapping[str, str],
    seen_domains: Collection[str],
) -> list[DomainSummary]:
    """Per-domain means of the report rows, sorted by domain id."""
    lookup = domain_of.get if isinstance(domain_of, Mapping) else domain_of
    grouped: dict[str, list[MetricRow]] = defaultdict(list)
    for row in report.rows:
        grouped[str(lookup(row.name))].append(row)

    summaries: list[DomainSummary] = []
    for domain_id in sorted(grouped):
        mean = MetricReport.from_rows(grouped[domain_id]).aggregate
        summaries.append(
            DomainSummary(
                domain_id=domain_id,
                seen=domain_id in seen_domains,
                images=len(grouped[domain_id]),
                dsc=mean.dsc,
                miou=mean.miou,
                jsc=mean.jsc,
                score=mean.score,
            )
        )
    return summaries


def split_aggregate(
    report: MetricReport, domain_of: Mapping[str, str], seen_domains: Collection[str]
) -> dict[str, MetricRow]:
    """Per-image means over the seen and the unseen rows; empty sides are omitted."""
    parts: dict[str, list[MetricRow]] = {"seen": [], "unseen": []}
    for row in report.rows:
        parts["seen" if domain_of.get(row.name) in seen_domains else "unseen"].append(row)
    return {
        label: MetricReport.from_rows(rows).aggregate.model_copy(update={"name": label})
        for label, rows in parts.items()
        if rows
    }


def rank_teams(scores: Mapping[str, float]) -> list[LeaderboardEntry]:
    """Descending by score, ties broken by name.

    Raises:
        InputValidationError: If any score is not finite
    """
    bad = [name for name, score in scores.items() if not math.isfinite(score)]
    if bad:
        raise InputValidationError(f"Non-finite scores for: {', '.join(sorted(bad))}")
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [
        LeaderboardEntry(rank=position, name=name, score=score)
        for position, (name, score) in enumerate(ordered, 1)
    ]
