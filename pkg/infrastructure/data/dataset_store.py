"""Dataset directories: ``images/<id>.png`` + ``masks/<id>.png`` (+ ``domains.csv``)."""

import csv
from collections.abc import Iterable
from pathlib import Path

import numpy as np
from PIL import Image

from core.domain.constants import (
    DOMAINS_FILENAME,
    IMAGES_DIRNAME,
    MASK_FOREGROUND_VALUE,
    MASKS_DIRNAME,
    UNKNOWN_DOMAIN,
)
from core.domain.errors import IngestionError
from core.domain.models import ImageSample
from utils.logging_config import get_logger

logger = get_logger(__name__)

IMAGE_SUFFIX = ".png"


def read_image(path: Path) -> np.ndarray:
    """8-bit RGB PNG -> H x W x 3 float32 in [0, 1]."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0


def read_mask(path: Path) -> np.ndarray:
    """8-bit gray PNG -> boolean mask, foreground = pixels > 0."""
    with Image.open(path) as img:
        return np.asarray(img.convert("L")) > 0


def write_image(path: Path, image: np.ndarray) -> None:
    pixels = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(pixels).save(path, format="PNG")


def write_mask(path: Path, mask: np.ndarray) -> None:
    pixels = np.where(mask.astype(bool), MASK_FOREGROUND_VALUE, 0).astype(np.uint8)
    Image.fromarray(pixels).save(path, format="PNG")


def mask_stems(directory: Path) -> dict[str, Path]:
    """Map stem -> mask file; accepts a dataset dir (uses its masks/) or a flat dir."""
    directory = Path(directory)
    if (directory / MASKS_DIRNAME).is_dir():
        directory = directory / MASKS_DIRNAME
    if not directory.is_dir():
        raise IngestionError(f"Mask directory not found: {directory}")
    return {p.stem: p for p in sorted(directory.glob(f"*{IMAGE_SUFFIX}"))}


def read_domains(path: Path) -> dict[str, str]:
    """Read ``sample_id,domain_id`` rows; a missing file yields an empty map."""
    path = Path(path)
    if not path.exists():
        return {}
    with open(path, encoding="utf-8", newline="") as f:
        return {row["sample_id"]: row["domain_id"] for row in csv.DictReader(f)}


def write_domains(path: Path, samples: Iterable[ImageSample]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["sample_id", "domain_id"])
        for sample in samples:
            writer.writerow([sample.sample_id, sample.domain_id])


def load_dataset_dir(path: Path) -> list[ImageSample]:
    """Load every image/mask pair of a dataset directory, sorted by stem.

    Raises:
        IngestionError: If the layout is missing or an image has no mask
    """
    path = Path(path)
    images_dir = path / IMAGES_DIRNAME
    masks_dir = path / MASKS_DIRNAME
    if not images_dir.is_dir():
        raise IngestionError(f"Dataset directory has no {IMAGES_DIRNAME}/: {path}")

    image_paths = sorted(images_dir.glob(f"*{IMAGE_SUFFIX}"))
    if not image_paths:
        raise IngestionError(f"No {IMAGE_SUFFIX} images in {images_dir}")

    missing = [p.name for p in image_paths if not (masks_dir / p.name).exists()]
    if missing:
        raise IngestionError(f"Images without masks in {masks_dir}: {', '.join(missing)}")

    domains = read_domains(path / DOMAINS_FILENAME)
    samples = [
        ImageSample(
            image=read_image(image_path),
            mask=read_mask(masks_dir / image_path.name),
            domain_id=domains.get(image_path.stem, UNKNOWN_DOMAIN),
            sample_id=image_path.stem,
        )
        for image_path in image_paths
    ]
    logger.info(f"Loaded {len(samples)} samples from {path}")
    return samples


def save_dataset_dir(samples: Iterable[ImageSample], path: Path) -> None:
    """Write samples in the dataset layout, including ``domains.csv``."""
    path = Path(path)
    images_dir = path / IMAGES_DIRNAME
    masks_dir = path / MASKS_DIRNAME
    images_dir.mkdir(parents=True, exist_ok=True)
    masks_dir.mkdir(parents=True, exist_ok=True)

    samples = list(samples)
    for sample in samples:
        write_image(images_dir / f"{sample.sample_id}{IMAGE_SUFFIX}", sample.image)
        write_mask(masks_dir / f"{sample.sample_id}{IMAGE_SUFFIX}", sample.mask)
    write_domains(path / DOMAINS_FILENAME, samples)
    logger.debug(f"Wrote {len(samples)} samples to {path}")
