"""Train/validation splitting, cropping and tile merging."""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Sequence

import numpy as np

from core.domain.errors import CoverageError, InputValidationError, ShapeMismatchError
from core.domain.models import CropPolicy, ImageSample


def split_train_val(
    samples: Sequence[ImageSample], ratio: float, seed: int
) -> tuple[list[ImageSample], list[ImageSample]]:
    """Stratified split with |train| = round(ratio * N).

    Per-domain quotas use largest remainders so they sum to the global size;
    both sides keep the input order.

    Raises:
        InputValidationError: If ratio is outside (0, 1) or either side is empty
    """
    if not 0.0 < ratio < 1.0:
        raise InputValidationError(f"split ratio must be in (0, 1), got {ratio}")
    total = len(samples)
    train_size = round(ratio * total)
    if train_size == 0 or train_size == total:
        raise InputValidationError(
            f"degenerate split: {train_size} train / {total - train_size} val from {total} samples"
        )

    by_domain: dict[str, list[int]] = defaultdict(list)
    for index, sample in enumerate(samples):
        by_domain[sample.domain_id].append(index)
    domains = sorted(by_domain)

    exact = {d: ratio * len(by_domain[d]) for d in domains}
    quotas = {d: math.floor(exact[d] + 1e-9) for d in domains}
    shortfall = train_size - sum(quotas.values())
    by_remainder = sorted(domains, key=lambda d: (-(exact[d] - quotas[d]), d))
    for domain in by_remainder[: max(0, shortfall)]:
        quotas[domain] += 1

    rng = np.random.default_rng(seed)
    train_indices: set[int] = set()
    for domain in domains:
        members = by_domain[domain]
        order = rng.permutation(len(members))
        train_indices.update(members[i] for i in order[: quotas[domain]])

    train = [s for i, s in enumerate(samples) if i in train_indices]
    val = [s for i, s in enumerate(samples) if i not in train_indices]
    return train, val


def sliding_offsets(length: int, size: int) -> list[int]:
    """Tile origins along one axis with stride size // 2, last tile flush with the edge."""
    if size > length:
        raise ShapeMismatchError("crop size", f"<= {length}", size)
    stride = max(1, size // 2)
    offsets = list(range(0, length - size + 1, stride))
    if offsets[-1] + size < length:
        offsets.append(length - size)
    return offsets


def crop(
    sample: ImageSample,
    size: int,
    policy: CropPolicy,
    rng: np.random.Generator | None = None,
) -> list[ImageSample]:
    """Crop ``sample`` into size x size pieces.

    random returns one crop at an offset drawn from ``rng``; sliding returns
    overlapping tiles covering the image, each recording its origin.

    Raises:
        ShapeMismatchError: If size exceeds the image
    """
    if size > min(sample.height, sample.width):
        raise ShapeMismatchError("crop size", f"<= {min(sample.height, sample.width)}", size)

    if policy == "random":
        rng = rng if rng is not None else np.random.default_rng(0)
        top = int(rng.integers(0, sample.height - size + 1))
        left = int(rng.integers(0, sample.width - size + 1))
        return [sample.with_region(top, left, size)]

    return [
        sample.with_region(top, left, size)
        for top in sliding_offsets(sample.height, size)
        for left in sliding_offsets(sample.width, size)
    ]


def merge_tiles(
    tile_probs: Sequence[np.ndarray],
    coords: Sequence[tuple[int, int]],
    height: int,
    width: int,
) -> np.ndarray:
    """Per-pixel mean of overlapping tile probabilities.

    Raises:
        CoverageError: If any pixel is covered by no tile
    """
    if len(tile_probs) != len(coords):
        raise ShapeMismatchError("tile coordinates", len(tile_probs), len(coords))

    total = np.zeros((height, width), dtype=np.float64)
    count = np.zeros((height, width), dtype=np.int64)
    low = np.full((height, width), np.inf)
    high = np.full((height, width), -np.inf)
    for prob, (top, left) in zip(tile_probs, coords, strict=True):
        tile_h, tile_w = prob.shape
        if top < 0 or left < 0 or top + tile_h > height or left + tile_w > width:
            raise ShapeMismatchError(
                "tile placement", f"inside {height}x{width}", (top, left, tile_h, tile_w)
            )
        region = (slice(top, top + tile_h), slice(left, left + tile_w))
        total[region] += prob
        count[region] += 1
        np.minimum(low[region], prob, out=low[region])
        np.maximum(high[region], prob, out=high[region])

    uncovered = int((count == 0).sum())
    if uncovered:
        raise CoverageError(f"{uncovered} of {height * width} pixels are not covered by any tile")
    # where every covering tile agrees, return that value rather than a rounded mean
    return np.where(low == high, low, total / count)
