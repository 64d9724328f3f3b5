"""Versioned binary checkpoint blob.

Layout: magic, uint32 version, uint64 header length, a canonical JSON header
(manifest, config snapshot, iteration, frozen digest) and the raw little-endian
arrays in manifest order. Serialisation is canonical, so save -> load -> save
reproduces the same bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch
from torch import nn

from core.algorithms.backbone import ParamGroup, parameter_digest
from core.domain.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from core.domain.errors import CheckpointError

_PREAMBLE = struct.Struct("<IQ")
BACKBONE_PREFIX = "backbone."


@dataclass(frozen=True)
class TensorEntry:
    """Manifest line for one stored array."""

    name: str
    shape: tuple[int, ...]
    dtype: str
    group: str
    trainable: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "shape": list(self.shape),
            "dtype": self.dtype,
            "group": self.group,
            "trainable": self.trainable,
        }


@dataclass
class Checkpoint:
    """Parameter arrays plus everything needed to rebuild and audit a run."""

    manifest: list[TensorEntry]
    arrays: dict[str, np.ndarray]
    config: dict[str, Any] = field(default_factory=dict)
    iteration: int = 0
    frozen_digest: str | None = None

    @classmethod
    def from_module(
        cls,
        module: nn.Module,
        groups: list[ParamGroup],
        config: dict[str, Any] | None = None,
        iteration: int = 0,
        frozen_digest: str | None = None,
    ) -> Checkpoint:
        """Snapshot every parameter of ``module`` tagged with its group."""
        membership = {id(t): group for group in groups for t in group.tensors}
        manifest: list[TensorEntry] = []
        arrays: dict[str, np.ndarray] = {}
        for name, tensor in module.named_parameters():
            group = membership.get(id(tensor))
            array = tensor.detach().cpu().numpy().copy()
            arrays[name] = array
            manifest.append(
                TensorEntry(
                    name=name,
                    shape=tuple(array.shape),
                    dtype=array.dtype.newbyteorder("<").str,
                    group=group.name if group else "ungrouped",
                    trainable=bool(group.trainable) if group else False,
                )
            )
        return cls(
            manifest=manifest,
            arrays=arrays,
            config=config or {},
            iteration=iteration,
            frozen_digest=frozen_digest,
        )

    def group_names(self) -> list[str]:
        return sorted({entry.group for entry in self.manifest})

    def backbone_digest(self) -> str:
        """Digest of the stored backbone arrays, comparable to freeze()'s digest."""
        named = (
            (entry.name.removeprefix(BACKBONE_PREFIX), torch.from_numpy(self.arrays[entry.name]))
            for entry in self.manifest
            if entry.group == "backbone"
        )
        return parameter_digest(named)

    def apply_to(self, module: nn.Module) -> None:
        """Copy the stored arrays into ``module``'s parameters in place."""
        parameters = dict(module.named_parameters())
        missing = [entry.name for entry in self.manifest if entry.name not in parameters]
        if missing:
            raise CheckpointError(f"Checkpoint parameters not in model: {', '.join(missing)}")
        with torch.no_grad():
            for entry in self.manifest:
                target = parameters[entry.name]
                if tuple(target.shape) != entry.shape:
                    raise CheckpointError(
                        f"Shape mismatch for {entry.name}: expected {tuple(target.shape)}, "
                        f"got {entry.shape}"
                    )
                target.copy_(torch.from_numpy(self.arrays[entry.name]).to(target.dtype))

    def to_bytes(self) -> bytes:
        header = {
            "config": self.config,
            "frozen_digest": self.frozen_digest,
            "iteration": self.iteration,
            "manifest": [entry.to_dict() for entry in self.manifest],
        }
        header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        payload = b"".join(
            np.ascontiguousarray(self.arrays[entry.name], dtype=np.dtype(entry.dtype)).tobytes()
            for entry in self.manifest
        )
        return (
            CHECKPOINT_MAGIC
            + _PREAMBLE.pack(CHECKPOINT_VERSION, len(header_bytes))
            + header_bytes
            + payload
        )

    @classmethod
    def from_bytes(cls, blob: bytes) -> Checkpoint:
        magic_size = len(CHECKPOINT_MAGIC)
        if blob[:magic_size] != CHECKPOINT_MAGIC:
            raise CheckpointError("Not a rein-seg checkpoint (bad magic)")
        try:
            version, header_size = _PREAMBLE.unpack_from(blob, magic_size)
        except struct.error as e:
            raise CheckpointError("Truncated checkpoint preamble") from e
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"Unsupported checkpoint version {version}")

        start = magic_size + _PREAMBLE.size
        try:
            header = json.loads(blob[start : start + header_size])
        except json.JSONDecodeError as e:
            raise CheckpointError(f"Corrupt checkpoint header: {e}") from e

        offset = start + header_size
        manifest: list[TensorEntry] = []
        arrays: dict[str, np.ndarray] = {}
        for item in header["manifest"]:
            entry = TensorEntry(
                name=item["name"],
                shape=tuple(item["shape"]),
                dtype=item["dtype"],
                group=item["group"],
                trainable=item["trainable"],
            )
            dtype = np.dtype(entry.dtype)
            count = int(np.prod(entry.shape)) if entry.shape else 1
            nbytes = count * dtype.itemsize
            if offset + nbytes > len(blob):
                raise CheckpointError(f"Truncated checkpoint payload at {entry.name}")
            array = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
            arrays[entry.name] = array.reshape(entry.shape).copy()
            manifest.append(entry)
            offset += nbytes
        if offset != len(blob):
            raise CheckpointError("Trailing bytes after checkpoint payload")

        return cls(
            manifest=manifest,
            arrays=arrays,
            config=header["config"],
            iteration=header["iteration"],
            frozen_digest=header["frozen_digest"],
        )

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: Path) -> Checkpoint:
        path = Path(path)
        if not path.exists():
            raise CheckpointError(f"Checkpoint not found: {path}")
        return cls.from_bytes(path.read_bytes())
