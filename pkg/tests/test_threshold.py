import numpy as np
import pytest

from reqconflict.corpus import generate_synthetic, load_bundled_dataset, make_folds
from reqconflict.embedding import fit_tfidf, tfidf_table
from reqconflict.similarity import SimilarityMatrix, pairwise_matrix
from reqconflict.threshold import (
    GRID,
    RocPoint,
    phase1_detect,
    predict_labels,
    roc_csv,
    roc_points,
    select_cutoff,
)


def test_grid_contents():
    assert len(GRID) == 100
    assert GRID[0] == 0.01
    assert GRID[-1] == 1.00
    assert GRID[49] == 0.50


def _matrix(values, ids=None):
    values = np.asarray(values, dtype=float)
    ids = ids or [str(i) for i in range(values.shape[0])]
    return SimilarityMatrix(ids=ids, values=values)


THREE = _matrix(
    [
        [1.0, 0.9, 0.1],
        [0.9, 1.0, 0.2],
        [0.1, 0.2, 1.0],
    ]
)


def test_predict_labels_threshold():
    labels = predict_labels(THREE, ["0", "1", "2"], 0.5)
    assert labels == {"0": True, "1": True, "2": False}


def test_predict_labels_boundary_inclusive():
    labels = predict_labels(THREE, ["0"], 0.9)
    assert labels["0"] is True
    assert predict_labels(THREE, ["0"], 0.91)["0"] is False


def test_predict_labels_scoped_pool():
    # restricted to {0, 2}: requirement 0's best partner is 2 at 0.1
    labels = predict_labels(THREE, ["0"], 0.5, scope_ids=["0", "2"])
    assert labels["0"] is False


def test_roc_endpoints():
    gold = {"0": True, "1": True, "2": False}
    points = roc_points(THREE, gold)
    assert points[0].k == 0.01
    # at k = 0.01 every id has max similarity >= 0.01
    assert points[0].tpr == 1.0 and points[0].fpr == 1.0
    # at k = 1.00 nothing clears the cutoff
    assert points[-1].tpr == 0.0 and points[-1].fpr == 0.0


def test_roc_monotone_nonincreasing():
    gold = {"0": True, "1": True, "2": False}
    points = roc_points(THREE, gold)
    for a, b in zip(points, points[1:]):
        assert b.tpr <= a.tpr and b.fpr <= a.fpr


def test_roc_requires_both_classes():
    with pytest.raises(ValueError):
        roc_points(THREE, {"0": True, "1": True, "2": True})
    with pytest.raises(ValueError):
        roc_points(THREE, {"0": False, "1": False, "2": False})


def test_select_cutoff_separable():
    gold = {"0": True, "1": True, "2": False}
    sel = select_cutoff(roc_points(THREE, gold))
    # any cutoff in (0.2, 0.9] separates perfectly; ties go to the smallest k
    assert sel.delta == 0.21


def test_select_cutoff_matches_exhaustive():
    rng = np.random.default_rng(1)
    for _ in range(50):
        points = [
            RocPoint(k=k, tpr=float(rng.uniform()), fpr=float(rng.uniform())) for k in GRID
        ]
        sel = select_cutoff(points)
        best = max(p.tpr - p.fpr for p in points)
        winners = [p.k for p in points if p.tpr - p.fpr == best]
        assert sel.delta == min(winners)


def test_literal_objective_differs():
    points = [
        RocPoint(k=0.01, tpr=1.0, fpr=1.0),
        RocPoint(k=0.50, tpr=1.0, fpr=0.0),
        RocPoint(k=1.00, tpr=0.0, fpr=0.0),
    ]
    assert select_cutoff(points, objective="youden").delta == 0.50
    # literal objective TPR + FPR - 1 prefers the all-positive corner
    assert select_cutoff(points, objective="literal").delta == 0.01


def test_select_cutoff_unknown_objective():
    with pytest.raises(ValueError, match="objective"):
        select_cutoff([RocPoint(0.5, 1.0, 0.0)], objective="magic")


def test_select_cutoff_empty():
    with pytest.raises(ValueError):
        select_cutoff([])


def _pipeline(seed):
    ds = generate_synthetic(load_bundled_dataset(), 12, seed=seed)
    table = tfidf_table(fit_tfidf(ds), ds)
    m = pairwise_matrix(table)
    folds = make_folds(ds, 3, seed=seed)
    return ds, m, folds


def test_phase1_detect_end_to_end():
    ds, m, folds = _pipeline(42)
    sel, cand = phase1_detect(ds, m, folds, test_fold=0)
    assert sel.delta in GRID
    assert cand.members <= set(folds.fold_ids(0))
    for rid in cand.members:
        partner, value = cand.evidence[rid]
        assert partner != rid
        assert value >= sel.delta


def test_phase1_evidence_only_for_members():
    ds, m, folds = _pipeline(7)
    _, cand = phase1_detect(ds, m, folds, test_fold=1)
    assert set(cand.evidence) == cand.members


def test_phase1_strict_scope_restricts_partners():
    ds, m, folds = _pipeline(3)
    _, cand = phase1_detect(ds, m, folds, test_fold=0, scope="strict")
    test = set(folds.fold_ids(0))
    for rid in cand.members:
        assert cand.evidence[rid][0] in test


def test_roc_csv_format():
    points = [RocPoint(k=0.01, tpr=1.0, fpr=0.5)]
    assert roc_csv(points) == "k,tpr,fpr\n0.01,1.000000,0.500000\n"
