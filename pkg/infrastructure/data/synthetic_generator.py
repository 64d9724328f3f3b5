"""Synthetic multi-domain segmentation data.

Each sample is a tissue-like background with 1-4 darker foreground shapes of
one family, rendered with PIL and passed through the domain's colour
transform. Every sample draws from its own SeedSequence child, so worker
count and scheduling never change the output.
"""

import math
import os
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from PIL import Image, ImageDraw

from config.settings import Settings
from config.settings import settings as default_settings
from core.domain.constants import (
    MAX_FOREGROUND_FRACTION,
    MAX_SHAPES,
    MIN_SHAPES,
    SEEN_DOMAINS,
    UNSEEN_DOMAINS,
)
from core.domain.errors import GenerationError
from core.domain.models import DomainSpec, ImageSample, ShapeFamily, ShiftTask
from utils.logging_config import get_logger

logger = get_logger(__name__)

_MAX_ATTEMPTS = 100
_BACKGROUND_RGB = np.array([226, 196, 212])
_FOREGROUND_RGB = np.array([118, 62, 138])
_NUCLEUS_RGB = np.array([72, 40, 110])

# RGB <-> YIQ; hue rotation acts on the I/Q chroma plane and keeps luminance
_RGB_TO_YIQ = np.array(
    [
        [0.299, 0.587, 0.114],
        [0.596, -0.274, -0.322],
        [0.211, -0.523, 0.312],
    ]
)
_YIQ_TO_RGB = np.linalg.inv(_RGB_TO_YIQ)


def _jitter(rgb: np.ndarray, rng: np.random.Generator, spread: int) -> tuple[int, int, int]:
    values = np.clip(rgb + rng.integers(-spread, spread + 1, size=3), 0, 255)
    return (int(values[0]), int(values[1]), int(values[2]))


def _draw_ellipse(draws: Sequence[ImageDraw.ImageDraw], fill: Sequence, size: int, rng: np.random.Generator) -> None:
    rx = int(rng.integers(size // 10, size // 4 + 1))
    ry = int(rng.integers(size // 10, size // 4 + 1))
    cx = int(rng.integers(0, size))
    cy = int(rng.integers(0, size))
    for draw, colour in zip(draws, fill, strict=True):
        draw.ellipse((cx - rx, cy - ry, cx + rx, cy + ry), fill=colour)


def _draw_polygon(draws: Sequence[ImageDraw.ImageDraw], fill: Sequence, size: int, rng: np.random.Generator) -> None:
    vertices = int(rng.integers(5, 9))
    radius = rng.uniform(size / 10, size / 4)
    cx, cy = rng.uniform(0, size, size=2)
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=vertices))
    radii = radius * rng.uniform(0.6, 1.2, size=vertices)
    points = [
        (float(cx + r * math.cos(a)), float(cy + r * math.sin(a)))
        for a, r in zip(angles, radii, strict=True)
    ]
    for draw, colour in zip(draws, fill, strict=True):
        draw.polygon(points, fill=colour)


def _draw_blob_union(draws: Sequence[ImageDraw.ImageDraw], fill: Sequence, size: int, rng: np.random.Generator) -> None:
    cx, cy = rng.uniform(0, size, size=2)
    for _ in range(int(rng.integers(3, 6))):
        r = rng.uniform(size / 16, size / 8)
        ox, oy = rng.normal(0.0, size / 14, size=2)
        box = (cx + ox - r, cy + oy - r, cx + ox + r, cy + oy + r)
        for draw, colour in zip(draws, fill, strict=True):
            draw.ellipse(box, fill=colour)


_SHAPE_RENDERERS = {
    "ellipse": _draw_ellipse,
    "polygon": _draw_polygon,
    "blob-union": _draw_blob_union,
}


def _render_once(family: ShapeFamily, size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    image = Image.new("RGB", (size, size), _jitter(_BACKGROUND_RGB, rng, 12))
    mask = Image.new("L", (size, size), 0)
    image_draw = ImageDraw.Draw(image)
    mask_draw = ImageDraw.Draw(mask)

    foreground = _jitter(_FOREGROUND_RGB, rng, 16)
    renderer = _SHAPE_RENDERERS[family]
    for _ in range(int(rng.integers(MIN_SHAPES, MAX_SHAPES + 1))):
        renderer((image_draw, mask_draw), (foreground, 255), size, rng)

    # nuclei speckle on top of both regions; the mask is unaffected
    for _ in range(size // 4):
        r = rng.uniform(0.8, 2.0)
        x, y = rng.uniform(0, size, size=2)
        image_draw.ellipse((x - r, y - r, x + r, y + r), fill=_jitter(_NUCLEUS_RGB, rng, 10))

    return np.asarray(image, dtype=np.float32) / 255.0, np.asarray(mask) > 0


def render_raw(spec: DomainSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Render shapes until the foreground fraction lies in (0, 0.9)."""
    for _ in range(_MAX_ATTEMPTS):
        image, mask = _render_once(spec.shape_family, spec.image_size, rng)
        if 0.0 < mask.mean() < MAX_FOREGROUND_FRACTION:
            return image, mask
    raise GenerationError(f"domain {spec.domain_id}: no valid render after {_MAX_ATTEMPTS} attempts")


def apply_color_transform(image: np.ndarray, spec: DomainSpec, rng: np.random.Generator) -> np.ndarray:
    """Hue rotation, contrast about mid-grey and Gaussian noise; neutral steps are skipped.

    The result is quantised to the 8-bit grid so it survives a PNG round trip.
    """
    if spec.hue_shift == 0.0 and spec.contrast == 1.0 and spec.noise_sigma == 0.0:
        return image

    out = image.astype(np.float64)
    if spec.hue_shift != 0.0:
        angle = 2.0 * math.pi * spec.hue_shift
        cos, sin = math.cos(angle), math.sin(angle)
        rotation = np.array([[1.0, 0.0, 0.0], [0.0, cos, -sin], [0.0, sin, cos]])
        out = out @ (_YIQ_TO_RGB @ rotation @ _RGB_TO_YIQ).T
    if spec.contrast != 1.0:
        out = (out - 0.5) * spec.contrast + 0.5
    if spec.noise_sigma != 0.0:
        out = out + rng.normal(0.0, spec.noise_sigma, size=out.shape)
    return (np.rint(np.clip(out, 0.0, 1.0) * 255.0) / 255.0).astype(np.float32)


def sample_seeds(spec: DomainSpec, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(spec.seed).spawn(count)


def _synthesize(spec: DomainSpec, index: int, seed: np.random.SeedSequence) -> ImageSample:
    rng = np.random.default_rng(seed)
    raw, mask = render_raw(spec, rng)
    return ImageSample(
        image=apply_color_transform(raw, spec, rng),
        mask=mask,
        domain_id=spec.domain_id,
        sample_id=f"{spec.domain_id}_{index:04d}",
    )


class SyntheticGenerator:
    """Per-sample parallel generation of domain image sets."""

    def __init__(self, max_workers: int | None = None, app_settings: Settings | None = None) -> None:
        self.settings = app_settings or default_settings
        self.max_workers: int = (
            max_workers
            if max_workers is not None
            else (self.settings.DATA_MAX_WORKERS or min(8, (os.cpu_count() or 1) + 4))
        )

    def generate_domain(self, spec: DomainSpec, count: int) -> list[ImageSample]:
        """Generate ``count`` samples; output is a pure function of ``spec``."""
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        seeds = sample_seeds(spec, count)
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            samples = list(executor.map(_synthesize, [spec] * count, range(count), seeds))
        logger.debug(f"Generated {count} samples for domain {spec.domain_id}")
        return samples


def generate_domain(spec: DomainSpec, count: int, max_workers: int | None = None) -> list[ImageSample]:
    return SyntheticGenerator(max_workers=max_workers).generate_domain(spec, count)


_ORGAN_DOMAINS = (
    # domain, family, hue, contrast, noise
    ("A", "ellipse", 0.0, 1.0, 0.0),
    ("B", "polygon", 0.04, 1.1, 0.01),
    ("C", "blob-union", -0.04, 0.9, 0.02),
    ("D", "ellipse", 0.22, 1.4, 0.04),
    ("E", "polygon", -0.18, 0.7, 0.06),
    ("F", "blob-union", 0.3, 1.6, 0.08),
)

_SCANNER_DOMAINS = (
    ("A", "blob-union", 0.0, 1.0, 0.0),
    ("B", "blob-union", 0.05, 1.15, 0.01),
    ("C", "blob-union", -0.05, 0.85, 0.02),
    ("D", "blob-union", 0.25, 1.5, 0.05),
    ("E", "blob-union", -0.22, 0.65, 0.07),
    ("F", "blob-union", 0.35, 1.8, 0.09),
)


def default_protocol(task: ShiftTask, image_size: int, seed: int) -> list[DomainSpec]:
    """Six domains: A-C seen in training, D-F unseen with disjoint parameters.

    organ varies the shape family per domain with mild colour changes;
    scanner keeps one family and varies only the colour transform.
    """
    table = _ORGAN_DOMAINS if task == "organ" else _SCANNER_DOMAINS
    return [
        DomainSpec(
            domain_id=domain_id,
            shape_family=family,
            hue_shift=hue,
            contrast=contrast,
            noise_sigma=noise,
            seed=seed * len(table) + index,
            image_size=image_size,
        )
        for index, (domain_id, family, hue, contrast, noise) in enumerate(table)
    ]


def distribute(total: int, parts: int) -> list[int]:
    """Split ``total`` into ``parts`` near-equal counts, remainders to the first parts."""
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def build_protocol_splits(
    protocol: Sequence[DomainSpec],
    train_images: int,
    prelim_images: int,
    test_images: int,
    generator: SyntheticGenerator | None = None,
) -> dict[str, list[ImageSample]]:
    """Generate the train / test_prelim / test splits from one protocol.

    train covers the seen domains, test_prelim the seen domains plus the first
    unseen one, test all six. Each domain is generated once and sliced, so the
    splits never share a sample.
    """
    generator = generator or SyntheticGenerator()
    by_id = {spec.domain_id: spec for spec in protocol}
    split_domains = {
        "train": list(SEEN_DOMAINS),
        "test_prelim": [*SEEN_DOMAINS, UNSEEN_DOMAINS[0]],
        "test": [*SEEN_DOMAINS, *UNSEEN_DOMAINS],
    }
    split_totals = {"train": train_images, "test_prelim": prelim_images, "test": test_images}

    quotas: dict[str, dict[str, int]] = {}
    for split, domains in split_domains.items():
        quotas[split] = dict(zip(domains, distribute(split_totals[split], len(domains)), strict=True))

    splits: dict[str, list[ImageSample]] = {split: [] for split in split_domains}
    for domain_id, spec in by_id.items():
        needed = sum(q.get(domain_id, 0) for q in quotas.values())
        if needed == 0:
            continue
        pool = generator.generate_domain(spec, needed)
        cursor = 0
        for split in split_domains:
            take = quotas[split].get(domain_id, 0)
            splits[split].extend(pool[cursor : cursor + take])
            cursor += take

    for split, samples in splits.items():
        samples.sort(key=lambda s: s.sample_id)
        logger.info(f"Split {split}: {len(samples)} images across {len({s.domain_id for s in samples})} domains")
    return splits
