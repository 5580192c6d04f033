"""Requirement sentence vectors: TFIDF, externally supplied tables, and fusion.

Transformer encoders never run here; their vectors arrive through the
newline-delimited embedding file format (one JSON object per line with
``id``, ``model`` and ``vector`` fields) and are fused with TFIDF by
concatenation plus a pluggable dimensionality reducer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, IO

import numpy as np

from .corpus import RequirementSet
from .tokens import tokenize


class EmbeddingError(ValueError):
    pass


@dataclass
class TfidfModel:
    vocabulary: dict[str, int]  # term -> dense column index, lexicographic
    idf: np.ndarray
    n_docs: int


@dataclass
class EmbeddingTable:
    source: str  # "tfidf" | "external:<model>" | "fused"
    vectors: dict[str, np.ndarray]

    def __post_init__(self):
        dims = {v.shape[0] for v in self.vectors.values()}
        if len(dims) > 1:
            raise EmbeddingError(f"inconsistent vector dimensions: {sorted(dims)}")

    @property
    def dim(self) -> int:
        return next(iter(self.vectors.values())).shape[0]

    @property
    def ids(self) -> list[str]:
        return list(self.vectors)

    def matrix(self, ids: list[str] | None = None) -> np.ndarray:
        ids = self.ids if ids is None else ids
        return np.stack([self.vectors[i] for i in ids])


def fit_tfidf(corpus: RequirementSet) -> TfidfModel:
    """Fit vocabulary and smoothed idf = ln((1+N)/(1+df)) + 1 over the whole set."""
    docs = [[t.surface for t in tokenize(r.text)] for r in corpus]
    if all(not d for d in docs):
        raise EmbeddingError("corpus has no tokenizable text")
    df: dict[str, int] = {}
    for doc in docs:
        for term in set(doc):
            df[term] = df.get(term, 0) + 1
    vocabulary = {term: i for i, term in enumerate(sorted(df))}
    n = len(docs)
    idf = np.empty(len(vocabulary))
    for term, i in vocabulary.items():
        idf[i] = math.log((1 + n) / (1 + df[term])) + 1.0
    return TfidfModel(vocabulary=vocabulary, idf=idf, n_docs=n)


def embed_tfidf(model: TfidfModel, text: str) -> np.ndarray:
    """Raw count x idf, L2-normalized. Raises on fully out-of-vocabulary text."""
    vec = np.zeros(len(model.vocabulary))
    for tok in tokenize(text):
        col = model.vocabulary.get(tok.surface)
        if col is not None:
            vec[col] += model.idf[col]
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise EmbeddingError(f"text has no in-vocabulary tokens: {text!r}")
    return vec / norm


def tfidf_table(model: TfidfModel, corpus: RequirementSet) -> EmbeddingTable:
    return EmbeddingTable(
        source="tfidf", vectors={r.id: embed_tfidf(model, r.text) for r in corpus}
    )


def load_external_embeddings(stream: IO[bytes] | bytes) -> EmbeddingTable:
    """Read a newline-delimited embedding file, validating as it goes."""
    if isinstance(stream, bytes):
        lines = stream.decode("utf-8").splitlines()
    else:
        lines = stream.read().decode("utf-8").splitlines()
    vectors: dict[str, np.ndarray] = {}
    model_name: str | None = None
    dim: int | None = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise EmbeddingError(f"line {lineno}: invalid JSON ({e})") from None
        try:
            rid, model, vector = record["id"], record["model"], record["vector"]
        except (KeyError, TypeError):
            raise EmbeddingError(
                f"line {lineno}: record must have id, model and vector fields"
            ) from None
        if model_name is None:
            model_name = model
        elif model != model_name:
            raise EmbeddingError(
                f"line {lineno}: model {model!r} differs from {model_name!r}"
            )
        vec = np.asarray(vector, dtype=float)
        if vec.ndim != 1 or vec.size == 0:
            raise EmbeddingError(f"line {lineno}: vector must be a non-empty array")
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise EmbeddingError(
                f"line {lineno}: vector dimension {vec.size} differs from {dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise EmbeddingError(f"line {lineno}: vector contains NaN or infinity")
        if rid in vectors:
            raise EmbeddingError(f"line {lineno}: duplicate id {rid!r}")
        vectors[rid] = vec
    if not vectors:
        raise EmbeddingError("embedding file contains no records")
    return EmbeddingTable(source=f"external:{model_name}", vectors=vectors)


def check_covers(table: EmbeddingTable, corpus: RequirementSet) -> None:
    missing = set(corpus.ids) - set(table.vectors)
    extra = set(table.vectors) - set(corpus.ids)
    if missing or extra:
        raise EmbeddingError(
            f"embedding ids do not match requirement set "
            f"(missing: {sorted(missing)}, extra: {sorted(extra)})"
        )


# A reducer maps an (n, d) matrix to (n, target_dim), deterministically for a seed.
Reducer = Callable[[np.ndarray, int, int], np.ndarray]


def identity_reduce(x: np.ndarray, target_dim: int, seed: int) -> np.ndarray:
    if target_dim != x.shape[1]:
        raise EmbeddingError(
            f"identity reducer requires target_dim == {x.shape[1]}, got {target_dim}"
        )
    return x


def pca_reduce(x: np.ndarray, target_dim: int, seed: int) -> np.ndarray:
    """Centered principal-component projection via SVD.

    Deterministic regardless of seed: component signs are fixed by forcing
    each component's largest-magnitude loading positive.
    """
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:target_dim]
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return centered @ components.T


def fuse(
    a: EmbeddingTable,
    b: EmbeddingTable,
    target_dim: int,
    seed: int,
    reducer: Reducer = pca_reduce,
) -> EmbeddingTable:
    """Per-id concatenation [a||b], reduced to target_dim, rows unit-normalized."""
    if set(a.vectors) != set(b.vectors):
        raise EmbeddingError("fuse requires identical id sets")
    n = len(a.vectors)
    total = a.dim + b.dim
    if not (1 <= target_dim <= min(n, total)):
        raise EmbeddingError(
            f"target_dim must be in [1, min(n={n}, dims={total})], got {target_dim}"
        )
    ids = a.ids
    concat = np.hstack([a.matrix(ids), b.matrix(ids)])
    reduced = reducer(concat, target_dim, seed)
    norms = np.linalg.norm(reduced, axis=1)
    if np.any(norms == 0.0):
        bad = [ids[i] for i in np.flatnonzero(norms == 0.0)]
        raise EmbeddingError(f"reduced vectors are zero for ids {bad}")
    reduced = reduced / norms[:, None]
    return EmbeddingTable(source="fused", vectors=dict(zip(ids, reduced)))
