"""Batch export of an id/text file to the DEMB container.

The exporter writes base embeddings only; any query-side specialization
belongs to the retrieval toolkit that consumes the files. Rows are written
in input order, so row i of the payload always corresponds to line i of
the input.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .demb import write_embeddings
from .encoders import resolve_encoder


class ExportError(Exception):
    """Malformed input file or unwritable output."""


@dataclass
class ExportJob:
    model: str
    input_path: str
    output_path: str
    ids_path: str | None = None
    batch_size: int = 32
    device: str | None = None
    max_tokens: int = 256


@dataclass
class ExportReport:
    count: int
    dim: int
    truncated: int

    def summary(self) -> str:
        return (f"exported {self.count} embeddings of dimension {self.dim}"
                + (f"; {self.truncated} inputs truncated" if self.truncated else ""))


def read_id_text_file(path: str | Path) -> tuple[list[str], list[str]]:
    """Parse "id<TAB>text" lines; empty ids, missing tabs, and duplicate
    ids are rejected with the offending line number."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ExportError(f"cannot read {path}: {exc}") from exc
    ids: list[str] = []
    texts: list[str] = []
    seen: set[str] = set()
    for lineno, line in enumerate(raw.splitlines(), 1):
        if not line.strip():
            continue
        item_id, sep, text = line.partition("\t")
        if not sep or not item_id:
            raise ExportError(f"{path}:{lineno}: expected 'id<TAB>text'")
        if item_id in seen:
            raise ExportError(f"{path}:{lineno}: duplicate id {item_id!r}")
        seen.add(item_id)
        ids.append(item_id)
        texts.append(text)
    if not ids:
        raise ExportError(f"{path}: no input lines")
    return ids, texts


def run_export(job: ExportJob) -> ExportReport:
    if job.batch_size < 1:
        raise ExportError(f"batch size must be >= 1, got {job.batch_size}")
    ids, texts = read_id_text_file(job.input_path)
    encoder = resolve_encoder(job.model, device=job.device,
                              max_tokens=job.max_tokens)
    blocks = [encoder.encode(texts[i:i + job.batch_size])
              for i in range(0, len(texts), job.batch_size)]
    matrix = np.vstack(blocks)
    write_embeddings(job.output_path, ids, matrix, ids_path=job.ids_path)
    return ExportReport(count=len(ids), dim=matrix.shape[1],
                        truncated=encoder.truncated)
