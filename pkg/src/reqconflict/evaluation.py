"""Scoring against gold conflict labels and fold aggregation.

Conflict is the positive class throughout. Undefined rates (zero denominator)
follow the 0-convention and are annotated in reports rather than emitted as
NaN.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def population(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    undefined: list[str] = field(default_factory=list)  # which rates hit a 0 denominator


@dataclass
class MetricSummary:
    conflict: ClassMetrics
    no_conflict: ClassMetrics
    macro_precision: float
    macro_recall: float
    macro_f1: float


def confusion(pred: dict[str, bool], gold: dict[str, bool]) -> ConfusionMatrix:
    if set(pred) != set(gold):
        raise ValueError("prediction and gold id domains differ")
    tp = fp = fn = tn = 0
    for rid, p in pred.items():
        g = gold[rid]
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif not p and g:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float, list[str]]:
    undefined = []
    if tp + fp == 0:
        precision, und_p = 0.0, True
    else:
        precision, und_p = tp / (tp + fp), False
    if tp + fn == 0:
        recall, und_r = 0.0, True
    else:
        recall, und_r = tp / (tp + fn), False
    if und_p:
        undefined.append("precision")
    if und_r:
        undefined.append("recall")
    if precision + recall == 0:
        f1 = 0.0
        if und_p and und_r:
            undefined.append("f1")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1, undefined


def macro_metrics(cm: ConfusionMatrix) -> MetricSummary:
    if cm.population == 0:
        raise ValueError("empty population")
    p_pos, r_pos, f_pos, und_pos = _prf(cm.tp, cm.fp, cm.fn)
    # non-conflict class: swap positives and negatives
    p_neg, r_neg, f_neg, und_neg = _prf(cm.tn, cm.fn, cm.fp)
    conflict = ClassMetrics(p_pos, r_pos, f_pos, cm.tp + cm.fn, und_pos)
    no_conflict = ClassMetrics(p_neg, r_neg, f_neg, cm.tn + cm.fp, und_neg)
    return MetricSummary(
        conflict=conflict,
        no_conflict=no_conflict,
        macro_precision=(p_pos + p_neg) / 2,
        macro_recall=(r_pos + r_neg) / 2,
        macro_f1=(f_pos + f_neg) / 2,
    )


@dataclass
class AggregateMetrics:
    mean: dict[str, float]
    std: dict[str, float]  # population standard deviation across folds


_AGG_KEYS = (
    "macro_precision",
    "macro_recall",
    "macro_f1",
    "conflict_precision",
    "conflict_recall",
    "conflict_f1",
    "conflict_support",
)


def _flatten(s: MetricSummary) -> dict[str, float]:
    return {
        "macro_precision": s.macro_precision,
        "macro_recall": s.macro_recall,
        "macro_f1": s.macro_f1,
        "conflict_precision": s.conflict.precision,
        "conflict_recall": s.conflict.recall,
        "conflict_f1": s.conflict.f1,
        "conflict_support": float(s.conflict.support),
    }


def aggregate_folds(summaries: list[MetricSummary]) -> AggregateMetrics:
    if not summaries:
        raise ValueError("no folds to aggregate")
    rows = [_flatten(s) for s in summaries]
    mean = {k: float(np.mean([r[k] for r in rows])) for k in _AGG_KEYS}
    std = {k: float(np.std([r[k] for r in rows])) for k in _AGG_KEYS}
    return AggregateMetrics(mean=mean, std=std)


def format_delta(phase1_f1: float, phase2_f1: float) -> str:
    """Phase II vs Phase I change, absolute and relative, e.g. "↑ 0.04 / 9.30%"."""
    abs_change = phase2_f1 - phase1_f1
    if abs_change == 0.0:
        return "0.00 / 0.00%"
    rel = 100.0 * abs_change / phase1_f1 if phase1_f1 != 0 else float("inf")
    arrow = "↑" if abs_change > 0 else "↓"
    return f"{arrow} {abs(abs_change):.2f} / {rel:.2f}%"


def normalized_confusion_csv(cm: ConfusionMatrix) -> str:
    """Row-normalized 2x2 matrix, conflict first; zero rows render as 0."""
    lines = [",pred_conflict,pred_no_conflict"]
    for name, a, b in (("conflict", cm.tp, cm.fn), ("no_conflict", cm.fp, cm.tn)):
        total = a + b
        if total == 0:
            lines.append(f"{name},0.000000,0.000000")
        else:
            lines.append(f"{name},{a / total:.6f},{b / total:.6f}")
    return "\n".join(lines) + "\n"
