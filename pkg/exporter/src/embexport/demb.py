"""Writer for the shared DEMB embedding container.

Byte layout (integers little-endian): magic b"DEMB", version uint32 (1),
dim uint32, count uint64, then count x dim float32 row-major. Row ids go
to a UTF-8 sidecar file, one per line, same order. This must stay
bit-compatible with the retrieval toolkit that consumes these files; the
format is the only coupling between the two packages.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"DEMB"
VERSION = 1
HEADER = struct.Struct("<4sIIQ")


def ids_path_for(path: str | Path) -> Path:
    return Path(path).with_suffix(".ids")


def write_embeddings(path: str | Path, ids: list[str], matrix: np.ndarray,
                     ids_path: str | Path | None = None) -> None:
    if matrix.ndim != 2:
        raise ValueError(f"embedding matrix must be 2-D, got shape {matrix.shape}")
    if len(ids) != matrix.shape[0]:
        raise ValueError(f"{len(ids)} ids for {matrix.shape[0]} embedding rows")
    ids_path = Path(ids_path) if ids_path else ids_path_for(path)
    payload = np.ascontiguousarray(matrix, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, matrix.shape[1], matrix.shape[0]))
        fh.write(payload.tobytes())
    ids_path.write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")
