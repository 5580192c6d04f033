"""Phase II: entity-overlap filtering of the candidate conflict set.

Each candidate is compared against its m most similar requirements. The
overlap count matches tokens case-insensitively, with one widening rule:
two different unit words both tagged Metric also count as a match
(kilometers vs miles). The candidate survives when
max overlap / unique entity count >= the overlap threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Callable

from .corpus import RequirementSet
from .ner import EntitySpan
from .similarity import SimilarityMatrix, top_m
from .threshold import CandidateConflictSet

# A tagger maps requirement text to entity spans.
Tagger = Callable[[str], list[EntitySpan]]


def _load_unit_words() -> frozenset[str]:
    text = resources.files("reqconflict.data").joinpath("unit_words.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


_UNIT_WORDS: frozenset[str] | None = None


def unit_words() -> frozenset[str]:
    global _UNIT_WORDS
    if _UNIT_WORDS is None:
        _UNIT_WORDS = _load_unit_words()
    return _UNIT_WORDS


@dataclass
class EntityProfile:
    requirement_id: str
    entity_tokens: frozenset[tuple[str, str]]  # (lowercased token, entity type)


@dataclass
class OverlapResult:
    candidate_id: str
    best_match: str
    overlaps: dict[str, int]  # neighbor id -> overlap count
    best_overlap: int
    n_unique: int
    ratio: float  # min(best_overlap / n_unique, 1), or 0 when n_unique == 0
    matched_tokens: list[str]  # candidate tokens matched in the best neighbor


@dataclass
class FinalConflictSet:
    members: set[str]
    provenance: dict[str, OverlapResult]


def profile_from_spans(requirement_id: str, spans: list[EntitySpan]) -> EntityProfile:
    """Token-level entity profile: every token inside a span, lowercased."""
    toks = set()
    for span in spans:
        for word in span.surface.split(" "):
            toks.add((word.lower(), span.entity_type))
    return EntityProfile(requirement_id=requirement_id, entity_tokens=frozenset(toks))


def unique_entities(profile: EntityProfile) -> int:
    return len(profile.entity_tokens)


def _matches(c_tok: tuple[str, str], r_profile: EntityProfile) -> bool:
    word, etype = c_tok
    for r_word, r_type in r_profile.entity_tokens:
        if word == r_word:
            return True
        if (
            etype == "Metric"
            and r_type == "Metric"
            and word in unit_words()
            and r_word in unit_words()
        ):
            return True
    return False


def overlap(c: EntityProfile, r: EntityProfile) -> int:
    """Number of c's entity tokens matched in r (exact or Metric-unit compatible)."""
    return sum(1 for tok in c.entity_tokens if _matches(tok, r))


def overlap_ratio(c: EntityProfile, neighbors: list[EntityProfile]) -> float:
    if not neighbors:
        raise ValueError("empty neighbor list")
    denom = unique_entities(c)
    if denom == 0:
        return 0.0  # no entity evidence: cannot confirm a conflict
    best = max(overlap(c, r) for r in neighbors)
    return min(best / denom, 1.0)


def display_ratio(ratio: float) -> str:
    """Two-decimal display by truncation (5/7 -> 0.71, 2/7 -> 0.28)."""
    return f"{math.floor(ratio * 100) / 100:.2f}"


def phase2_filter(
    candidates: CandidateConflictSet,
    reqset: RequirementSet,
    matrix: SimilarityMatrix,
    tagger: Tagger,
    m_count: int = 5,
    t_o: float = 1.0,
) -> FinalConflictSet:
    """Keep each Phase I candidate whose overlap ratio reaches t_o."""
    profiles: dict[str, EntityProfile] = {}

    def profile(rid: str) -> EntityProfile:
        if rid not in profiles:
            try:
                spans = tagger(reqset[rid].text)
            except Exception as e:
                raise RuntimeError(f"tagger failed on requirement {rid!r}: {e}") from e
            profiles[rid] = profile_from_spans(rid, spans)
        return profiles[rid]

    members: set[str] = set()
    provenance: dict[str, OverlapResult] = {}
    for cid in sorted(candidates.members):
        neighbors = top_m(matrix, cid, m_count)
        c_prof = profile(cid)
        overlaps = {rid: overlap(c_prof, profile(rid)) for rid in neighbors}
        denom = unique_entities(c_prof)
        best_match = max(neighbors, key=lambda rid: overlaps[rid])  # first max on ties
        ratio = 0.0 if denom == 0 else min(overlaps[best_match] / denom, 1.0)
        result = OverlapResult(
            candidate_id=cid,
            best_match=best_match,
            overlaps=overlaps,
            best_overlap=overlaps[best_match],
            n_unique=denom,
            ratio=ratio,
            matched_tokens=sorted(
                w for (w, _t) in c_prof.entity_tokens if _matches((w, _t), profile(best_match))
            ),
        )
        provenance[cid] = result
        if ratio >= t_o:
            members.add(cid)
    return FinalConflictSet(members=members, provenance=provenance)


def conflict_report_csv(final: FinalConflictSet) -> str:
    """One record per candidate: id, decision, exact and display ratio, best match."""
    lines = ["id,kept,ratio,ratio_display,best_match,overlapping_tokens"]
    for cid in sorted(final.provenance):
        r = final.provenance[cid]
        kept = "yes" if cid in final.members else "no"
        toks = " ".join(r.matched_tokens)
        exact = f"{r.best_overlap}/{r.n_unique}" if r.n_unique else "0/0"
        lines.append(
            f"{cid},{kept},{exact},{display_ratio(r.ratio)},{r.best_match},{toks}"
        )
    return "\n".join(lines) + "\n"
