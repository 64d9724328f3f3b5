"""Flat weight manifest: a text index plus one raw float32 file per tensor.

Layout::

    <dir>/index.txt          one "<parameter name>\\t<file name>" line per tensor
    <dir>/<file name>        "shape: d0,d1,...\\n" header, then little-endian float32
"""

from pathlib import Path

import numpy as np

from core.domain.constants import WEIGHT_INDEX_FILENAME
from core.domain.errors import CheckpointError

_FLOAT32_LE = np.dtype("<f4")


def _file_name_for(name: str) -> str:
    return name.replace("/", "_") + ".bin"


def write_weight_manifest(arrays: dict[str, np.ndarray], directory: Path) -> None:
    """Write ``arrays`` as a weight manifest under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index_lines = []
    for name, array in arrays.items():
        file_name = _file_name_for(name)
        shape = ",".join(str(dim) for dim in array.shape)
        with open(directory / file_name, "wb") as f:
            f.write(f"shape: {shape}\n".encode())
            f.write(np.ascontiguousarray(array, dtype=_FLOAT32_LE).tobytes())
        index_lines.append(f"{name}\t{file_name}")
    (directory / WEIGHT_INDEX_FILENAME).write_text("\n".join(index_lines) + "\n", encoding="utf-8")


def read_weight_manifest(directory: Path) -> dict[str, np.ndarray]:
    """Read every tensor listed in the manifest index.

    Raises:
        CheckpointError: If the index or a listed file is missing or malformed
    """
    directory = Path(directory)
    index_path = directory / WEIGHT_INDEX_FILENAME
    if not index_path.exists():
        raise CheckpointError(f"Weight manifest index not found: {index_path}")

    arrays: dict[str, np.ndarray] = {}
    for line_number, line in enumerate(index_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            name, file_name = line.split("\t")
        except ValueError as e:
            raise CheckpointError(f"{index_path}:{line_number}: malformed index line") from e
        arrays[name] = _read_tensor_file(directory / file_name)
    return arrays


def _read_tensor_file(path: Path) -> np.ndarray:
    if not path.exists():
        raise CheckpointError(f"Weight file not found: {path}")
    raw = path.read_bytes()
    header, _, payload = raw.partition(b"\n")
    text = header.decode("utf-8", errors="replace")
    if not text.startswith("shape:"):
        raise CheckpointError(f"{path}: missing shape header")
    dims = text.removeprefix("shape:").strip()
    shape = tuple(int(dim) for dim in dims.split(",")) if dims else ()
    array = np.frombuffer(payload, dtype=_FLOAT32_LE)
    expected = int(np.prod(shape)) if shape else 1
    if array.size != expected:
        raise CheckpointError(f"{path}: expected {expected} values, found {array.size}")
    return array.reshape(shape).astype(np.float32)
