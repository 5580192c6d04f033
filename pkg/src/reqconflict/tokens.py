"""Sentence tokenization shared by the embedding and tagging layers."""

from __future__ import annotations

import re
from dataclasses import dataclass

# alphanumeric runs, keeping internal hyphens ("pilot-directed" is one token)
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:-[A-Za-z0-9]+)*")


@dataclass(frozen=True)
class Token:
    surface: str  # lowercased form
    position: int
    original: str  # as written, for orthographic features

    def __post_init__(self):
        if not self.surface:
            raise ValueError("empty token surface")


def tokenize(text: str) -> list[Token]:
    """Lowercased tokens split on non-alphanumerics except internal hyphens.

    Numeric tokens are kept and no stopwords are removed; IDF weighting
    downweights ubiquitous words like "shall" on its own.
    """
    return [
        Token(m.group(0).lower(), i, m.group(0))
        for i, m in enumerate(_TOKEN_RE.finditer(text))
    ]
