"""Run an encoder over a requirements CSV and write an embedding file.

Input is the requirements CSV schema (header ``id,text,conflict,
conflict_label``; only the first two columns are used here). Output is one
JSON record per line: ``{"id": ..., "model": ..., "vector": [...]}``, in input
row order, with a constant vector dimension. Vectors are written as produced;
normalization is the consumer's concern.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import get_encoder

REQUIRED_COLUMNS = ("id", "text")


class ExportError(Exception):
    pass


@dataclass
class ExportJob:
    input_path: str
    model: str
    output_path: str
    batch_size: int = 32

    def __post_init__(self):
        if not self.model:
            raise ExportError("model name must be non-empty")
        if self.batch_size < 1:
            raise ExportError(f"batch size must be >= 1, got {self.batch_size}")


def read_rows(text: str) -> list[tuple[str, str]]:
    """(id, text) pairs in row order; duplicate or empty ids are rejected."""
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise ExportError(f"input CSV is missing columns: {', '.join(missing)}")
    rows: list[tuple[str, str]] = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        rid = (row.get("id") or "").strip()
        body = (row.get("text") or "").strip()
        if not rid:
            raise ExportError(f"row {lineno}: empty id")
        if not body:
            raise ExportError(f"row {lineno}: empty text for id {rid!r}")
        if rid in seen:
            raise ExportError(f"row {lineno}: duplicate id {rid!r}")
        seen.add(rid)
        rows.append((rid, body))
    return rows


def _batches(rows: list[tuple[str, str]], size: int):
    for start in range(0, len(rows), size):
        yield rows[start : start + size]


def export(job: ExportJob) -> int:
    """Write one embedding record per CSV row; returns the record count."""
    try:
        text = Path(job.input_path).read_text("utf-8")
    except OSError as e:
        raise ExportError(f"cannot read {job.input_path}: {e}") from None
    rows = read_rows(text)  # full validation before any inference
    encoder = get_encoder(job.model)

    dim: int | None = None
    lines: list[str] = []
    for batch in _batches(rows, job.batch_size):
        vectors = np.asarray(encoder([body for _, body in batch]), dtype=float)
        if vectors.ndim != 2 or vectors.shape[0] != len(batch):
            raise ExportError(
                f"encoder returned shape {vectors.shape} for a batch of {len(batch)}"
            )
        if not np.all(np.isfinite(vectors)):
            raise ExportError(f"encoder produced non-finite values with model {job.model!r}")
        if dim is None:
            dim = vectors.shape[1]
        elif vectors.shape[1] != dim:
            raise ExportError(
                f"dimension drift: expected {dim}, got {vectors.shape[1]} mid-run"
            )
        for (rid, _), vec in zip(batch, vectors):
            lines.append(json.dumps({"id": rid, "model": job.model, "vector": vec.tolist()}))
    out = Path(job.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return len(lines)
