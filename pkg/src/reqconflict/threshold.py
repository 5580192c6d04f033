"""Phase I: ROC-driven cosine cutoff selection and candidate conflict detection.

A requirement is labeled a candidate conflict when its highest cosine
similarity to any other requirement reaches the cutoff. The cutoff is chosen
on training-fold ids by maximizing Youden's J = TPR - FPR over the grid
{0.01, ..., 1.00}; the literal objective TPR + FPR - 1 is kept behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import FoldAssignment, RequirementSet
from .similarity import SimilarityMatrix, max_similarity

GRID = [round(k / 100.0, 2) for k in range(1, 101)]


@dataclass(frozen=True)
class RocPoint:
    k: float
    tpr: float
    fpr: float


@dataclass
class CutoffSelection:
    delta: float
    grid: list[float]
    points: list[RocPoint]


@dataclass
class CandidateConflictSet:
    members: set[str]
    evidence: dict[str, tuple[str, float]]  # member -> (most similar id, similarity)


def predict_labels(
    m: SimilarityMatrix, ids: list[str], k: float, scope_ids: list[str] | None = None
) -> dict[str, bool]:
    """Label each id conflicting iff its max similarity (self excluded) >= k.

    By default the max ranges over the full matrix; pass scope_ids to restrict
    the comparison pool (strict-fold mode).
    """
    if scope_ids is None:
        return {rid: max_similarity(m, rid)[1] >= k for rid in ids}
    pool = set(scope_ids)
    out = {}
    for rid in ids:
        best = max(
            (m.value(rid, other) for other in pool if other != rid), default=float("-inf")
        )
        out[rid] = best >= k
    return out


def roc_points(
    m: SimilarityMatrix,
    gold: dict[str, bool],
    grid: list[float] = GRID,
    scope_ids: list[str] | None = None,
) -> list[RocPoint]:
    ids = list(gold)
    n_pos = sum(gold[i] for i in ids)
    n_neg = len(ids) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC requires at least one positive and one negative")
    # max similarity per id is threshold-independent; compute once
    scores = {
        rid: (
            max_similarity(m, rid)[1]
            if scope_ids is None
            else max(m.value(rid, o) for o in scope_ids if o != rid)
        )
        for rid in ids
    }
    points = []
    for k in grid:
        tp = sum(1 for rid in ids if scores[rid] >= k and gold[rid])
        fp = sum(1 for rid in ids if scores[rid] >= k and not gold[rid])
        points.append(RocPoint(k=k, tpr=tp / n_pos, fpr=fp / n_neg))
    return points


def select_cutoff(points: list[RocPoint], objective: str = "youden") -> CutoffSelection:
    """argmax of the objective over the grid; ties break to the smallest k."""
    if not points:
        raise ValueError("no ROC points")
    if objective == "youden":
        score = lambda p: p.tpr - p.fpr
    elif objective == "literal":
        # TPR - (1 - FPR) as printed; rewards false positives, kept for comparison
        score = lambda p: p.tpr - (1.0 - p.fpr)
    else:
        raise ValueError(f"unknown objective {objective!r}")
    best = max(points, key=lambda p: (score(p), -p.k))
    return CutoffSelection(delta=best.k, grid=[p.k for p in points], points=points)


def phase1_detect(
    reqset: RequirementSet,
    m: SimilarityMatrix,
    folds: FoldAssignment,
    test_fold: int,
    objective: str = "youden",
    scope: str = "global",
) -> tuple[CutoffSelection, CandidateConflictSet]:
    """Select the cutoff on training folds, apply it to the test fold."""
    train_ids = folds.train_ids(test_fold)
    test_ids = folds.fold_ids(test_fold)
    gold = {rid: reqset[rid].gold_conflict for rid in train_ids}
    scope_ids = None if scope == "global" else train_ids
    points = roc_points(m, gold, scope_ids=scope_ids)
    selection = select_cutoff(points, objective=objective)
    test_scope = None if scope == "global" else test_ids
    members = set()
    evidence = {}
    for rid in test_ids:
        if test_scope is None:
            partner, value = max_similarity(m, rid)
        else:
            partner, value = max(
                ((o, m.value(rid, o)) for o in test_ids if o != rid),
                key=lambda t: t[1],
            )
        if value >= selection.delta:
            members.add(rid)
            evidence[rid] = (partner, value)
    return selection, CandidateConflictSet(members=members, evidence=evidence)


def roc_csv(points: list[RocPoint]) -> str:
    lines = ["k,tpr,fpr"]
    lines += [f"{p.k:.2f},{p.tpr:.6f},{p.fpr:.6f}" for p in points]
    return "\n".join(lines) + "\n"
