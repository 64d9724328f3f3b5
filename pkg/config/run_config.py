"""Experiment configuration loading.

Resolution order: JSON config file, preset defaults, ``--set section.key=value``
overrides, then ``--seed``. The resolved RunConfig is snapshotted into every
run directory.
"""

import json
from pathlib import Path
from typing import Any

from core.domain.errors import ConfigurationError
from core.domain.models import RunConfig, RunSpec
from utils.logging_config import get_logger

logger = get_logger(__name__)

SECTIONS = tuple(RunConfig.model_fields)
SEEDED_SECTIONS = ("backbone", "rein", "head", "data", "train")


def parse_override(text: str) -> tuple[str, str, Any]:
    """Split ``section.key=value``; the value is read as a JSON literal when possible."""
    target, sep, raw = text.partition("=")
    section, dot, key = target.strip().partition(".")
    if not sep or not dot or not section or not key:
        raise ConfigurationError(f"override must look like section.key=value, got {text!r}")
    if section not in SECTIONS:
        raise ConfigurationError(f"unknown config section {section!r} in override {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return section, key, value


def read_config_file(path: Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigurationError(f"unknown config sections: {', '.join(unknown)}")
    return data


def resolve_run_config(
    base: dict[str, Any] | None = None,
    preset: str | None = None,
    overrides: tuple[str, ...] | list[str] = (),
    seed: int | None = None,
) -> RunConfig:
    """Apply preset, overrides and seed to a raw mapping and validate it."""
    data: dict[str, dict[str, Any]] = {
        section: dict((base or {}).get(section) or {}) for section in SECTIONS
    }
    if preset is not None:
        data["train"]["preset"] = preset
    for text in overrides:
        section, key, value = parse_override(text)
        data[section][key] = value
    if seed is not None:
        for section in SEEDED_SECTIONS:
            data[section]["seed"] = seed
    return RunConfig.from_mapping(data)


def load_run_config(spec: RunSpec) -> RunConfig:
    """Build the RunConfig described by one CLI invocation."""
    base = read_config_file(Path(spec.config_path)) if spec.config_path else {}
    cfg = resolve_run_config(base, spec.preset, spec.overrides, spec.seed)
    logger.debug(f"Resolved run config (preset={cfg.train.preset}, seed={cfg.train.seed})")
    return cfg


def config_snapshot(cfg: RunConfig) -> dict[str, Any]:
    return cfg.model_dump(mode="json")


def save_config_snapshot(cfg: RunConfig, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config_snapshot(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def config_from_snapshot(snapshot: dict[str, Any]) -> RunConfig:
    return RunConfig.from_mapping(snapshot)
