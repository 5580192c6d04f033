"""Linear-chain sequence tagger with handcrafted features.

Training maximizes the L1/L2-regularized conditional log-likelihood with the
limited-memory quasi-Newton optimizer in ``optim``; decoding is exact Viterbi
via the kernels module. Weights start at zero and gradient accumulation order
is fixed, so training is deterministic for a fixed corpus order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .ner import AnnotatedSentence, SOFTWARE_TAGSET, TagSet, validate_bio
from .tokens import Token

DEFAULT_HYPERPARAMS = {"algorithm": "lbfgs", "c1": 0.1, "c2": 0.1, "max_iterations": 100}

MODEL_FORMAT_VERSION = 1


def extract_features(tokens: list[Token], i: int) -> list[str]:
    """Deterministic feature strings for position i.

    Covers the token itself, its [-1, 1] context with boundary markers,
    character-level digit/alpha cues, short prefixes/suffixes and
    capitalization (abbreviation) cues.
    """
    if not 0 <= i < len(tokens):
        raise IndexError(f"position {i} out of range for {len(tokens)} tokens")
    tok = tokens[i]
    w = tok.surface
    feats = [f"word={w}"]
    if i == 0:
        feats.append("BOS")
    else:
        feats.append(f"prev={tokens[i - 1].surface}")
    if i == len(tokens) - 1:
        feats.append("EOS")
    else:
        feats.append(f"next={tokens[i + 1].surface}")
    if tok.original.isdigit():
        feats.append("isdigit")
    if any(c.isdigit() for c in tok.original):
        feats.append("hasdigit")
    if tok.original.isalpha():
        feats.append("isalpha")
    for n in (1, 2, 3):
        if len(w) >= n:
            feats.append(f"pre{n}={w[:n]}")
            feats.append(f"suf{n}={w[-n:]}")
    if tok.original[0].isupper():
        feats.append("initcap")
    if tok.original.isupper() and len(tok.original) > 1:
        feats.append("allcaps")
    return feats


@dataclass
class CrfModel:
    tagset: TagSet
    feature_index: dict[str, int]
    state_weights: np.ndarray  # (n_features, n_labels)
    trans_weights: np.ndarray  # (n_labels, n_labels)
    hyperparams: dict = field(default_factory=lambda: dict(DEFAULT_HYPERPARAMS))

    @property
    def labels(self) -> list[str]:
        return self.tagset.labels

    def feature_weight(self, feature: str, label: str) -> float:
        row = self.feature_index.get(feature)
        if row is None:
            return 0.0
        return float(self.state_weights[row, self.labels.index(label)])

    def transition_weight(self, prev: str, label: str) -> float:
        return float(self.trans_weights[self.labels.index(prev), self.labels.index(label)])

    def unary_scores(self, tokens: list[Token]) -> np.ndarray:
        n_lab = len(self.labels)
        unary = np.zeros((len(tokens), n_lab))
        for t in range(len(tokens)):
            for feat in extract_features(tokens, t):
                row = self.feature_index.get(feat)
                if row is not None:  # unknown features contribute zero
                    unary[t] += self.state_weights[row]
        return unary

    def save(self, path: str) -> None:
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "entity_types": list(self.tagset.entity_types),
            "hyperparams": self.hyperparams,
            "features": list(self.feature_index),
            "state_weights": self.state_weights.tolist(),
            "trans_weights": self.trans_weights.tolist(),
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(doc, f)

    @classmethod
    def load(cls, path: str) -> "CrfModel":
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {doc.get('format_version')!r}")
        return cls(
            tagset=TagSet(entity_types=tuple(doc["entity_types"])),
            feature_index={f: i for i, f in enumerate(doc["features"])},
            state_weights=np.array(doc["state_weights"], dtype=float),
            trans_weights=np.array(doc["trans_weights"], dtype=float),
            hyperparams=doc["hyperparams"],
        )


def _encode_corpus(corpus: list[AnnotatedSentence], tagset: TagSet):
    label_ids = {lab: i for i, lab in enumerate(tagset.labels)}
    feature_index: dict[str, int] = {}
    encoded = []
    for sent in corpus:
        validate_bio(sent.labels, tagset)
        fids = []
        for t in range(len(sent.tokens)):
            ids = []
            for feat in extract_features(sent.tokens, t):
                if feat not in feature_index:
                    feature_index[feat] = len(feature_index)
                ids.append(feature_index[feat])
            fids.append(np.array(ids, dtype=np.int64))
        y = np.array([label_ids[lab] for lab in sent.labels], dtype=np.int64)
        encoded.append((fids, y))
    return feature_index, encoded


def neg_log_likelihood_and_grad(
    w: np.ndarray,
    encoded,
    n_features: int,
    n_labels: int,
    c2: float,
) -> tuple[float, np.ndarray]:
    """Total NLL over the corpus plus c2 ||w||^2, with analytic gradient."""
    state = w[: n_features * n_labels].reshape(n_features, n_labels)
    trans = w[n_features * n_labels :].reshape(n_labels, n_labels)
    grad_state = np.zeros_like(state)
    grad_trans = np.zeros_like(trans)
    nll = 0.0
    for fids, y in encoded:
        t_len = len(fids)
        unary = np.zeros((t_len, n_labels))
        for t, ids in enumerate(fids):
            unary[t] = state[ids].sum(axis=0)
        log_z, node, edge = kernels.forward_backward(unary, trans)
        gold = unary[np.arange(t_len), y].sum() + trans[y[:-1], y[1:]].sum()
        nll += log_z - gold
        for t, ids in enumerate(fids):
            np.add.at(grad_state, ids, node[t][None, :])
            grad_state[ids, y[t]] -= 1.0
        if t_len > 1:
            grad_trans += edge.sum(axis=0)
            np.add.at(grad_trans, (y[:-1], y[1:]), -1.0)
    value = nll + c2 * float(np.dot(w, w))
    grad = np.concatenate([grad_state.ravel(), grad_trans.ravel()]) + 2.0 * c2 * w
    return value, grad


def train_crf(
    corpus: list[AnnotatedSentence],
    hyperparams: dict | None = None,
    tagset: TagSet = SOFTWARE_TAGSET,
) -> CrfModel:
    if not corpus:
        raise ValueError("empty training corpus")
    hp = dict(DEFAULT_HYPERPARAMS)
    if hyperparams:
        hp.update(hyperparams)
    feature_index, encoded = _encode_corpus(corpus, tagset)
    n_features = len(feature_index)
    n_labels = len(tagset.labels)
    w0 = np.zeros(n_features * n_labels + n_labels * n_labels)

    from .optim import minimize

    def fun_grad(w):
        return neg_log_likelihood_and_grad(w, encoded, n_features, n_labels, hp["c2"])

    w, _ = minimize(fun_grad, w0, l1=hp["c1"], max_iter=hp["max_iterations"])
    return CrfModel(
        tagset=tagset,
        feature_index=feature_index,
        state_weights=w[: n_features * n_labels].reshape(n_features, n_labels),
        trans_weights=w[n_features * n_labels :].reshape(n_labels, n_labels),
        hyperparams=hp,
    )


def viterbi_decode(model: CrfModel, tokens: list[Token]) -> list[str]:
    """Exact argmax label sequence; ties resolve to label order in the tagset."""
    if not tokens:
        raise ValueError("cannot decode an empty sentence")
    unary = model.unary_scores(tokens)
    path = kernels.viterbi_path(unary, model.trans_weights)
    labels = model.labels
    return [labels[i] for i in path]


def brute_force_decode(model: CrfModel, tokens: list[Token]) -> list[str]:
    """Exhaustive enumeration oracle; exponential, test-sized inputs only."""
    import itertools

    unary = model.unary_scores(tokens)
    trans = model.trans_weights
    n_lab = len(model.labels)
    best_score = -np.inf
    best = None
    for seq in itertools.product(range(n_lab), repeat=len(tokens)):
        score = sum(unary[t, l] for t, l in enumerate(seq))
        score += sum(trans[a, b] for a, b in zip(seq, seq[1:]))
        if score > best_score:
            best_score = score
            best = seq
    return [model.labels[i] for i in best]


def token_accuracy(model: CrfModel, corpus: list[AnnotatedSentence]) -> float:
    correct = 0
    total = 0
    for sent in corpus:
        pred = viterbi_decode(model, sent.tokens)
        correct += sum(p == g for p, g in zip(pred, sent.labels))
        total += len(sent.labels)
    return correct / total


def _entity_of(label: str) -> str | None:
    return label[2:] if label != "O" else None


def _fold_metrics(
    pred: list[list[str]], gold: list[list[str]], entity_types: tuple[str, ...]
) -> dict:
    """Token-level precision/recall/F1 per entity type for one fold."""
    per_type = {}
    for etype in entity_types:
        tp = fp = fn = 0
        for p_seq, g_seq in zip(pred, gold):
            for p, g in zip(p_seq, g_seq):
                p_is = _entity_of(p) == etype
                g_is = _entity_of(g) == etype
                tp += p_is and g_is
                fp += p_is and not g_is
                fn += g_is and not p_is
        support = tp + fn
        if support == 0:
            continue  # type absent from this fold: metrics undefined
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / support
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_type[etype] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": support,
            "tp": tp,
            "fp": fp,
            "fn": fn,
        }
    return per_type


def _averages(per_type: dict) -> dict:
    if not per_type:
        return {}
    tp = sum(m["tp"] for m in per_type.values())
    fp = sum(m["fp"] for m in per_type.values())
    fn = sum(m["fn"] for m in per_type.values())
    support = sum(m["support"] for m in per_type.values())
    micro_p = tp / (tp + fp) if tp + fp else 0.0
    micro_r = tp / (tp + fn) if tp + fn else 0.0
    micro_f = 2 * micro_p * micro_r / (micro_p + micro_r) if micro_p + micro_r else 0.0
    n = len(per_type)
    out = {
        "micro": {"precision": micro_p, "recall": micro_r, "f1": micro_f, "support": support},
        "macro": {
            "precision": sum(m["precision"] for m in per_type.values()) / n,
            "recall": sum(m["recall"] for m in per_type.values()) / n,
            "f1": sum(m["f1"] for m in per_type.values()) / n,
            "support": support,
        },
        "weighted": {
            key: sum(m[key] * m["support"] for m in per_type.values()) / support
            for key in ("precision", "recall", "f1")
        },
    }
    out["weighted"]["support"] = support
    return out


def evaluate_ner(
    corpus: list[AnnotatedSentence],
    n_folds: int = 5,
    seed: int = 0,
    hyperparams: dict | None = None,
    tagset: TagSet = SOFTWARE_TAGSET,
) -> dict:
    """Cross-validated token-level entity metrics, mean +/- population std per fold."""
    import random as _random

    if len(corpus) < n_folds:
        raise ValueError(f"corpus of {len(corpus)} sentences too small for {n_folds} folds")
    order = list(range(len(corpus)))
    _random.Random(seed).shuffle(order)
    folds = [order[i::n_folds] for i in range(n_folds)]
    fold_results = []
    warnings: list[str] = []
    for fi, test_idx in enumerate(folds):
        test_set = set(test_idx)
        train = [corpus[i] for i in order if i not in test_set]
        test = [corpus[i] for i in test_idx]
        model = train_crf(train, hyperparams=hyperparams, tagset=tagset)
        pred = [viterbi_decode(model, s.tokens) for s in test]
        gold = [s.labels for s in test]
        per_type = _fold_metrics(pred, gold, tagset.entity_types)
        missing = [e for e in tagset.entity_types if e not in per_type]
        if missing:
            warnings.append(f"fold {fi}: no gold tokens for {', '.join(missing)}")
        fold_results.append({"per_type": per_type, "averages": _averages(per_type)})

    def agg(values: list[float]) -> dict:
        mean = float(np.mean(values))
        std = float(np.std(values))  # population std
        return {"mean": mean, "std": std}

    summary: dict = {"per_type": {}, "averages": {}, "warnings": warnings, "folds": fold_results}
    for etype in tagset.entity_types:
        present = [f["per_type"][etype] for f in fold_results if etype in f["per_type"]]
        if not present:
            continue
        summary["per_type"][etype] = {
            key: agg([m[key] for m in present]) for key in ("precision", "recall", "f1")
        }
        summary["per_type"][etype]["support"] = float(
            np.mean([m["support"] for m in present])
        )
    for avg in ("micro", "macro", "weighted"):
        rows = [f["averages"][avg] for f in fold_results if f["averages"]]
        summary["averages"][avg] = {
            key: agg([m[key] for m in rows]) for key in ("precision", "recall", "f1")
        }
        summary["averages"][avg]["support"] = float(np.mean([m["support"] for m in rows]))
    return summary
