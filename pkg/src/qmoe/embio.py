"""Shared binary embedding container and the in-memory store.

Layout (all integers little-endian):

    bytes 0-3    magic b"DEMB"
    bytes 4-7    format version, uint32 (currently 1)
    bytes 8-11   embedding dimension, uint32
    bytes 12-19  row count, uint64
    bytes 20-    count x dim float32 little-endian, row-major

Row ids live in a sidecar UTF-8 text file, one id per line, same order.
Anything that writes this format (including external encoders) must match
it bit-exactly; the reader validates magic, version, and payload size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

MAGIC = b"DEMB"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


@dataclass
class EmbeddingStore:
    """Ordered ids plus their (N, d) float32 embedding matrix."""
    ids: list[str]
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise InputError(f"embedding matrix must be 2-D, got {self.matrix.shape}")
        if len(self.ids) != self.matrix.shape[0]:
            raise InputError(f"{len(self.ids)} ids for {self.matrix.shape[0]} rows")
        if len(set(self.ids)) != len(self.ids):
            raise InputError("duplicate ids in embedding store")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def row(self, doc_id: str) -> np.ndarray:
        try:
            return self.matrix[self.ids.index(doc_id)]
        except ValueError:
            raise InputError(f"unknown id {doc_id!r}") from None

    def index_map(self) -> dict[str, int]:
        return {doc_id: i for i, doc_id in enumerate(self.ids)}


def ids_path_for(path: str | Path) -> Path:
    return Path(path).with_suffix(".ids")


def write_embeddings(path: str | Path, store: EmbeddingStore,
                     ids_path: str | Path | None = None) -> None:
    path = Path(path)
    ids_path = Path(ids_path) if ids_path else ids_path_for(path)
    matrix = np.ascontiguousarray(store.matrix, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, store.dim, len(store)))
        fh.write(matrix.tobytes())
    ids_path.write_text("".join(f"{i}\n" for i in store.ids), encoding="utf-8")


def read_embeddings(path: str | Path, ids_path: str | Path | None = None) -> EmbeddingStore:
    path = Path(path)
    ids_path = Path(ids_path) if ids_path else ids_path_for(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if len(data) < _HEADER.size:
        raise InputError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, dim, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise InputError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise InputError(f"{path}: unsupported format version {version}")
    expected = _HEADER.size + 4 * dim * count
    if len(data) != expected:
        raise InputError(f"{path}: payload is {len(data) - _HEADER.size} bytes, "
                         f"expected {expected - _HEADER.size} for {count}x{dim}")
    matrix = np.frombuffer(data, dtype="<f4", count=dim * count,
                           offset=_HEADER.size).reshape(count, dim).copy()
    try:
        ids = ids_path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read ids sidecar {ids_path}: {exc}") from exc
    if len(ids) != count:
        raise InputError(f"{ids_path}: {len(ids)} ids for {count} embedding rows")
    return EmbeddingStore(ids=ids, matrix=matrix)
