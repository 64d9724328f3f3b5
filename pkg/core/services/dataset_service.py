"""Dataset service: writes the synthetic cross-domain protocol to disk."""

import json
import shutil
from pathlib import Path
from typing import Any

from config.settings import Settings
from config.settings import settings as default_settings
from core.domain.constants import PROTOCOL_FILENAME, SEEN_DOMAINS, UNSEEN_DOMAINS
from core.domain.errors import DatasetExistsError
from core.domain.models import RunConfig
from infrastructure.data.dataset_store import save_dataset_dir
from infrastructure.data.synthetic_generator import (
    SyntheticGenerator,
    build_protocol_splits,
    default_protocol,
)
from utils.logging_config import get_logger


def load_seen_domains(dataset_dir: Path) -> set[str]:
    """Seen domain ids recorded in protocol.json, searching up to the dataset root."""
    for directory in (Path(dataset_dir), Path(dataset_dir).parent):
        path = directory / PROTOCOL_FILENAME
        if path.exists():
            return set(json.loads(path.read_text(encoding="utf-8"))["seen"])
    return set(SEEN_DOMAINS)


class DatasetService:
    """Generates train / test_prelim / test splits plus protocol.json."""

    def __init__(self, app_settings: Settings | None = None) -> None:
        self.settings = app_settings or default_settings
        self.logger = get_logger(__name__)

    def generate(self, cfg: RunConfig, out_dir: Path, force: bool = False) -> dict[str, Any]:
        """Write the dataset under ``out_dir``.

        Raises:
            DatasetExistsError: If ``out_dir`` is non-empty and ``force`` is False
        """
        out_dir = Path(out_dir)
        if out_dir.exists() and any(out_dir.iterdir()):
            if not force:
                raise DatasetExistsError(f"{out_dir} is not empty; pass --force to regenerate")
            self.logger.warning(f"Removing existing dataset at {out_dir}")
            shutil.rmtree(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

        data = cfg.data
        protocol = default_protocol(data.task, cfg.image_size, data.seed)
        splits = build_protocol_splits(
            protocol,
            train_images=data.train_images,
            prelim_images=data.prelim_images,
            test_images=data.test_images,
            generator=SyntheticGenerator(app_settings=self.settings),
        )
        for split, samples in splits.items():
            save_dataset_dir(samples, out_dir / split)

        manifest = {
            "task": data.task,
            "image_size": cfg.image_size,
            "seed": data.seed,
            "seen": list(SEEN_DOMAINS),
            "unseen": list(UNSEEN_DOMAINS),
            "domains": [spec.model_dump(mode="json") for spec in protocol],
        }
        (out_dir / PROTOCOL_FILENAME).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        self.logger.info(f"Generated {sum(len(s) for s in splits.values())} images in {out_dir}")

        return {
            "command": "gen-data",
            "out": str(out_dir),
            "task": data.task,
            "splits": {
                split: {
                    "images": len(samples),
                    "domains": sorted({s.domain_id for s in samples}),
                }
                for split, samples in splits.items()
            },
        }
