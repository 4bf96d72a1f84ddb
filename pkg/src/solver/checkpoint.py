from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np

from src.errors import CheckpointFormatError
from src.solver.lanczos import EigenSolution

logger = logging.getLogger(__name__)

MAGIC = b"DSTK1"
_HEADER = struct.Struct("<5sQQQI")


@dataclass(frozen=True, eq=False)
class Checkpoint:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    seed: int
    hashes: Dict[str, str]


def save_checkpoint(
    path: Union[str, Path], solution: EigenSolution, *, seed: int, hashes: Dict[str, str]
) -> Path:
    """Binary dump: header, eigenvalues, then column vectors as interleaved (re, im) float64, little-endian."""
    file_path = Path(path)
    meta = json.dumps(hashes, sort_keys=True, separators=(",", ":")).encode("utf-8")
    vectors = np.asfortranarray(solution.eigenvectors, dtype=np.complex128)
    with file_path.open("wb") as handle:
        handle.write(_HEADER.pack(MAGIC, solution.dimension, solution.n_states, int(seed), len(meta)))
        handle.write(meta)
        handle.write(np.asarray(solution.eigenvalues, dtype="<f8").tobytes())
        for column in range(solution.n_states):
            pairs = np.empty((solution.dimension, 2), dtype="<f8")
            pairs[:, 0] = vectors[:, column].real
            pairs[:, 1] = vectors[:, column].imag
            handle.write(pairs.tobytes())
    logger.info("Wrote checkpoint %s (%d vectors of dimension %d)", file_path, solution.n_states, solution.dimension)
    return file_path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size or data[: len(MAGIC)] != MAGIC:
        raise CheckpointFormatError("not a DSTK1 checkpoint", details={"path": str(path)})
    _, dimension, count, seed, meta_length = _HEADER.unpack_from(data, 0)
    offset = _HEADER.size
    expected = offset + meta_length + 8 * count + 16 * dimension * count
    if len(data) != expected:
        raise CheckpointFormatError(
            "checkpoint payload has the wrong size", details={"expected": expected, "actual": len(data)}
        )
    try:
        hashes = json.loads(data[offset : offset + meta_length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError("checkpoint header metadata is not valid JSON") from exc
    offset += meta_length
    eigenvalues = np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64)
    offset += 8 * count
    pairs = np.frombuffer(data, dtype="<f8", count=2 * dimension * count, offset=offset).reshape(count, dimension, 2)
    eigenvectors = (pairs[:, :, 0] + 1j * pairs[:, :, 1]).T.copy()
    return Checkpoint(eigenvalues=eigenvalues, eigenvectors=eigenvectors, seed=int(seed), hashes=hashes)


__all__ = ["Checkpoint", "MAGIC", "load_checkpoint", "save_checkpoint"]
