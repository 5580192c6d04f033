"""Sentence encoders addressed by model name.

Built-in ``hash-<dim>`` encoders embed text by signed feature hashing and run
fully offline; any other name is treated as a sentence-transformers checkpoint
and loaded on demand. Both routes are batched and return one fixed-length
vector per input text.
"""

from __future__ import annotations

import hashlib
import re
from typing import Callable, Sequence

import numpy as np

Encoder = Callable[[Sequence[str]], np.ndarray]


class EncoderError(Exception):
    pass


_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")
_HASH_NAME_RE = re.compile(r"^hash-(\d+)$")


def _hash_encode_batch(texts: Sequence[str], dim: int) -> np.ndarray:
    out = np.zeros((len(texts), dim))
    for row, text in enumerate(texts):
        for tok in _TOKEN_RE.findall(text.lower()):
            digest = hashlib.sha256(tok.encode("utf-8")).digest()
            index = int.from_bytes(digest[:8], "big") % dim
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            out[row, index] += sign
    return out


def _sentence_transformer_encoder(name: str) -> Encoder:
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError:
        raise EncoderError(
            f"unknown model {name!r}: not a built-in hash-<dim> encoder and "
            "sentence-transformers is not installed"
        ) from None
    try:
        model = SentenceTransformer(name)
    except Exception as e:
        raise EncoderError(f"cannot load model {name!r}: {e}") from e

    def encode(texts: Sequence[str]) -> np.ndarray:
        return np.asarray(model.encode(list(texts), show_progress_bar=False), dtype=float)

    return encode


def get_encoder(name: str) -> Encoder:
    if not name:
        raise EncoderError("model name must be non-empty")
    match = _HASH_NAME_RE.match(name)
    if match:
        dim = int(match.group(1))
        if dim < 1:
            raise EncoderError(f"bad hash encoder dimension in {name!r}")
        return lambda texts: _hash_encode_batch(texts, dim)
    return _sentence_transformer_encoder(name)
