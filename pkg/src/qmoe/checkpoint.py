"""Versioned binary container for model parameters.

Layout (all integers little-endian):

    bytes 0-3    magic b"DMOE"
    bytes 4-7    format version, uint32 (currently 1)
    bytes 8-11   embedding dimension, uint32
    bytes 12-15  number of domains, uint32
    byte  16     pool mode flag (0 = weighted, 1 = top1)
    byte  17     gate normalization flag (0 = none, 1 = sum)
    bytes 18-19  reserved, zero
    bytes 20-    parameter matrices as float32 little-endian, row-major,
                 in the order given by model.named_arrays()

A mismatched magic or version fails loudly rather than guessing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .model import (GATE_NORMALIZATIONS, POOL_MODES, MoEParams, named_arrays,
                    zero_params)

MAGIC = b"DMOE"
VERSION = 1
_HEADER = struct.Struct("<4sIIIBBxx")


@dataclass
class CheckpointMeta:
    pool_mode: str = "weighted"
    gate_normalization: str = "none"


def save_checkpoint(path: str | Path, params: MoEParams,
                    meta: CheckpointMeta | None = None) -> None:
    meta = meta or CheckpointMeta()
    if meta.pool_mode not in POOL_MODES:
        raise CheckpointError(f"unknown pool mode {meta.pool_mode!r}")
    if meta.gate_normalization not in GATE_NORMALIZATIONS:
        raise CheckpointError(f"unknown gate normalization {meta.gate_normalization!r}")
    header = _HEADER.pack(MAGIC, VERSION, params.dim, params.num_domains,
                          POOL_MODES.index(meta.pool_mode),
                          GATE_NORMALIZATIONS.index(meta.gate_normalization))
    with open(path, "wb") as fh:
        fh.write(header)
        for _, arr in named_arrays(params):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> tuple[MoEParams, CheckpointMeta]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, dim, num_domains, pool_flag, norm_flag = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    if pool_flag >= len(POOL_MODES) or norm_flag >= len(GATE_NORMALIZATIONS):
        raise CheckpointError(f"{path}: unknown mode flags ({pool_flag}, {norm_flag})")

    # Template gives the shapes; payload fills them in declared order.
    params = zero_params(dim, num_domains)
    offset = _HEADER.size
    for name, arr in named_arrays(params):
        nbytes = arr.size * 4
        if offset + nbytes > len(data):
            raise CheckpointError(f"{path}: truncated payload at {name}")
        flat = np.frombuffer(data, dtype="<f4", count=arr.size, offset=offset)
        arr[...] = flat.reshape(arr.shape)
        offset += nbytes
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")
    meta = CheckpointMeta(pool_mode=POOL_MODES[pool_flag],
                          gate_normalization=GATE_NORMALIZATIONS[norm_flag])
    return params, meta
