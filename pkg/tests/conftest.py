"""Shared fixtures: tiny configurations that build and train in well under a second."""

from typing import Any

import numpy as np
import pytest

from config.run_config import resolve_run_config
from core.domain.models import ImageSample, RunConfig

TINY_SECTIONS: dict[str, dict[str, Any]] = {
    "backbone": {"layers": 2, "width": 16, "patch_size": 4, "num_heads": 2, "mlp_ratio": 2},
    "rein": {"num_tokens": 4, "rank": 2, "query_width": 8},
    "data": {"image_size": 24, "train_images": 12, "prelim_images": 4, "test_images": 6},
    "train": {"iterations": 10, "batch_size": 2, "crop_size": 16, "log_every": 5},
}


def tiny_config(**sections: dict[str, Any]) -> RunConfig:
    """TINY_SECTIONS with per-section keys replaced by ``sections``."""
    merged = {name: dict(values) for name, values in TINY_SECTIONS.items()}
    for name, values in sections.items():
        merged.setdefault(name, {}).update(values)
    return resolve_run_config(merged)


def make_sample(sample_id: str, domain_id: str = "A", size: int = 24, seed: int = 0) -> ImageSample:
    """Bright background with a dark square; the mask marks the square."""
    rng = np.random.default_rng(seed)
    image = np.full((size, size, 3), 0.85, dtype=np.float32)
    mask = np.zeros((size, size), dtype=bool)
    top, left = rng.integers(0, size // 2, size=2)
    mask[top : top + size // 3, left : left + size // 3] = True
    image[mask] = 0.3
    return ImageSample(image=image, mask=mask, domain_id=domain_id, sample_id=sample_id)


@pytest.fixture
def tiny_cfg() -> RunConfig:
    return tiny_config()


@pytest.fixture
def toy_dataset() -> list[ImageSample]:
    return [
        make_sample(f"{domain}_{index:04d}", domain, seed=10 * ord(domain) + index)
        for domain in "ABC"
        for index in range(4)
    ]
