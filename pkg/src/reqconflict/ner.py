"""Entity extraction types and the rule-based general noun/verb tagger.

Two tagging routes feed the semantic filter: the trainable sequence model in
``crf.py`` over six software entity types, and the self-contained general
tagger here that emits single-token Noun/Verb spans from a bundled lexicon
plus suffix and post-modal rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .tokens import Token, tokenize

ENTITY_TYPES = ("Actor", "Action", "Object", "Property", "Metric", "Operator")


@dataclass(frozen=True)
class TagSet:
    entity_types: tuple[str, ...] = ENTITY_TYPES

    @property
    def labels(self) -> list[str]:
        out = ["O"]
        for e in self.entity_types:
            out += [f"B-{e}", f"I-{e}"]
        return out


SOFTWARE_TAGSET = TagSet()
GENERAL_TAGSET = TagSet(entity_types=("Noun", "Verb"))


class BioError(ValueError):
    pass


def validate_bio(labels: list[str], tagset: TagSet) -> None:
    valid = set(tagset.labels)
    prev = "O"
    for i, lab in enumerate(labels):
        if lab not in valid:
            raise BioError(f"position {i}: unknown label {lab!r}")
        if lab.startswith("I-"):
            etype = lab[2:]
            if prev not in (f"B-{etype}", f"I-{etype}"):
                raise BioError(f"position {i}: {lab} cannot follow {prev}")
        prev = lab


@dataclass
class AnnotatedSentence:
    tokens: list[Token]
    labels: list[str]

    def __post_init__(self):
        if len(self.tokens) != len(self.labels):
            raise BioError(
                f"{len(self.tokens)} tokens but {len(self.labels)} labels"
            )


@dataclass(frozen=True)
class EntitySpan:
    entity_type: str
    start: int
    end: int  # exclusive
    surface: str


def spans_from_tags(tokens: list[Token], labels: list[str]) -> list[EntitySpan]:
    """Maximal B-X (I-X)* runs; a stray I-X without its B-X is repaired to B-X."""
    if len(tokens) != len(labels):
        raise BioError(f"{len(tokens)} tokens but {len(labels)} labels")
    spans: list[EntitySpan] = []
    start = None
    etype = None
    for i, lab in enumerate(labels + ["O"]):
        continues = lab.startswith("I-") and etype == lab[2:]
        if start is not None and not continues:
            spans.append(
                EntitySpan(etype, start, i, " ".join(t.original for t in tokens[start:i]))
            )
            start, etype = None, None
        if lab.startswith("B-") or (lab.startswith("I-") and start is None):
            start, etype = i, lab[2:]
    return spans


def tags_from_spans(n_tokens: int, spans: list[EntitySpan]) -> list[str]:
    labels = ["O"] * n_tokens
    for span in spans:
        labels[span.start] = f"B-{span.entity_type}"
        for i in range(span.start + 1, span.end):
            labels[i] = f"I-{span.entity_type}"
    return labels


def parse_annotated_corpus(text: str, tagset: TagSet = SOFTWARE_TAGSET) -> list[AnnotatedSentence]:
    """token<TAB>label lines, blank line between sentences."""
    sentences: list[AnnotatedSentence] = []
    toks: list[Token] = []
    labs: list[str] = []

    def flush(lineno: int):
        if toks:
            try:
                validate_bio(labs, tagset)
            except BioError as e:
                raise BioError(f"sentence ending at line {lineno}: {e}") from None
            sentences.append(AnnotatedSentence(list(toks), list(labs)))
            toks.clear()
            labs.clear()

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            flush(lineno)
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise BioError(f"line {lineno}: expected token<TAB>label, got {line!r}")
        word, label = parts
        toks.append(Token(word.lower(), len(toks), word))
        labs.append(label.strip())
    flush(lineno + 1 if sentences or toks else 0)
    return sentences


def serialize_annotated_corpus(sentences: list[AnnotatedSentence]) -> str:
    blocks = []
    for s in sentences:
        blocks.append("\n".join(f"{t.original}\t{lab}" for t, lab in zip(s.tokens, s.labels)))
    return "\n\n".join(blocks) + "\n"


def load_toy_corpus() -> list[AnnotatedSentence]:
    text = resources.files("reqconflict.data").joinpath("ner_toy.tsv").read_text("utf-8")
    return parse_annotated_corpus(text)


# --- general Noun/Verb tagger -----------------------------------------------

_MODALS = {"shall", "will", "should", "must", "may", "can", "might", "would", "could"}
_NOUN_SUFFIXES = ("tion", "ment", "ity", "ness")
_VERB_SUFFIXES = ("ize", "ate", "ify")


def _load_lexicon() -> dict[str, str]:
    lex: dict[str, str] = {}
    text = resources.files("reqconflict.data").joinpath("tag_lexicon.txt").read_text("utf-8")
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, tag = line.split("\t")
        lex[word] = tag
    return lex


_LEXICON: dict[str, str] | None = None


def _lexicon() -> dict[str, str]:
    global _LEXICON
    if _LEXICON is None:
        _LEXICON = _load_lexicon()
    return _LEXICON


def general_tag(tokens: list[Token]) -> list[EntitySpan]:
    """Single-token Noun/Verb spans from lexicon, suffix and post-modal rules.

    Unknown alphabetic words default to Noun; digits, function words and
    adverbs carry no span.
    """
    lex = _lexicon()
    spans: list[EntitySpan] = []
    after_modal = False
    for i, tok in enumerate(tokens):
        w = tok.surface
        tag: str | None
        if any(c.isdigit() for c in w):
            tag = None
        elif w in _MODALS:
            tag = None
        elif w in lex:
            entry = lex[w]
            tag = {"noun": "Noun", "verb": "Verb"}.get(entry)
        elif w.endswith("ly"):
            tag = None  # adverb heuristic; keeps post-modal scanning open
        elif after_modal:
            tag = "Verb"
        elif w.endswith(_NOUN_SUFFIXES):
            tag = "Noun"
        elif w.endswith(_VERB_SUFFIXES):
            tag = "Verb"
        else:
            tag = "Noun"
        if w in _MODALS:
            after_modal = True
        elif not w.endswith("ly"):
            after_modal = False
        if tag is not None:
            spans.append(EntitySpan(tag, i, i + 1, tok.original))
    return spans


def general_tag_text(text: str) -> list[EntitySpan]:
    return general_tag(tokenize(text))
