"""Pairwise cosine similarity matrix and nearest-requirement queries."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingTable


@dataclass
class SimilarityMatrix:
    ids: list[str]
    values: np.ndarray  # square, symmetric, entries in [-1, 1]

    def __post_init__(self):
        self._index = {rid: i for i, rid in enumerate(self.ids)}

    def index(self, rid: str) -> int:
        try:
            return self._index[rid]
        except KeyError:
            raise KeyError(f"unknown requirement id {rid!r}") from None

    def value(self, a: str, b: str) -> float:
        return float(self.values[self.index(a), self.index(b)])


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """dot(u, v) / (|u| |v|), clamped to [-1, 1] against floating-point drift."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine is undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def pairwise_matrix(table: EmbeddingTable) -> SimilarityMatrix:
    ids = table.ids
    if not ids:
        raise ValueError("empty embedding table")
    x = table.matrix(ids)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        bad = [ids[i] for i in np.flatnonzero(norms == 0.0)]
        raise ValueError(f"zero vectors for ids {bad}")
    unit = x / norms[:, None]
    values = np.clip(unit @ unit.T, -1.0, 1.0)
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(ids=ids, values=values)


def max_similarity(m: SimilarityMatrix, rid: str) -> tuple[str, float]:
    """Most similar other requirement; exact ties break to the earliest id order."""
    if len(m.ids) < 2:
        raise ValueError("need at least 2 requirements")
    i = m.index(rid)
    row = m.values[i].copy()
    row[i] = -np.inf
    j = int(np.argmax(row))  # argmax returns the first maximum
    return m.ids[j], float(row[j])


def top_m(m: SimilarityMatrix, rid: str, m_count: int) -> list[str]:
    """The m_count ids most similar to rid (self excluded), descending; ties by id order."""
    if m_count < 1:
        raise ValueError(f"m_count must be >= 1, got {m_count}")
    i = m.index(rid)
    others = [j for j in range(len(m.ids)) if j != i]
    # stable sort on negated similarity keeps id (position) order on ties
    others.sort(key=lambda j: -m.values[i, j])
    return [m.ids[j] for j in others[:m_count]]


def dump_matrix_csv(m: SimilarityMatrix) -> str:
    out = io.StringIO()
    out.write("," + ",".join(m.ids) + "\n")
    for rid, row in zip(m.ids, m.values):
        out.write(rid + "," + ",".join(f"{v:.6f}" for v in row) + "\n")
    return out.getvalue()
