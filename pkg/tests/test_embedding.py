import json
import math

import numpy as np
import pytest

from reqconflict.corpus import Requirement, RequirementSet
from reqconflict.embedding import (
    EmbeddingError,
    EmbeddingTable,
    embed_tfidf,
    fit_tfidf,
    fuse,
    identity_reduce,
    load_external_embeddings,
    pca_reduce,
    tfidf_table,
)
from reqconflict.similarity import cosine
from reqconflict.tokens import tokenize


def test_tokenize_sentence():
    toks = [t.surface for t in tokenize("The UAV shall fully charge in less than 3 hours.")]
    assert toks == ["the", "uav", "shall", "fully", "charge", "in", "less", "than", "3", "hours"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_keeps_internal_hyphens():
    toks = [t.surface for t in tokenize("pilot-directed flight")]
    assert toks == ["pilot-directed", "flight"]


def _corpus(texts):
    reqs = [Requirement(str(i), t, False, ()) for i, t in enumerate(texts, start=1)]
    return RequirementSet(name="t", requirements=reqs)


THREE_DOCS = _corpus(["uav shall charge", "uav shall fly", "system shall log data"])


def test_idf_hand_values():
    model = fit_tfidf(THREE_DOCS)
    idf = lambda term: model.idf[model.vocabulary[term]]
    assert idf("uav") == pytest.approx(math.log(4 / 3) + 1, abs=1e-12)
    assert idf("shall") == pytest.approx(1.0, abs=1e-12)
    assert idf("system") == pytest.approx(math.log(4 / 2) + 1, abs=1e-12)


def test_idf_single_document():
    model = fit_tfidf(_corpus(["uav shall charge"]))
    assert np.allclose(model.idf, 1.0)


def test_vocabulary_only_corpus_terms():
    model = fit_tfidf(THREE_DOCS)
    assert "battery" not in model.vocabulary
    assert sorted(model.vocabulary) == list(model.vocabulary)  # lexicographic


def test_fit_order_insensitive():
    reqs = list(THREE_DOCS.requirements)
    shuffled = RequirementSet(name="t", requirements=[reqs[2], reqs[0], reqs[1]])
    a = fit_tfidf(THREE_DOCS)
    b = fit_tfidf(shuffled)
    assert a.vocabulary == b.vocabulary
    assert np.array_equal(a.idf, b.idf)


def test_embed_single_term_is_one_hot():
    model = fit_tfidf(THREE_DOCS)
    vec = embed_tfidf(model, "uav uav")
    expected = np.zeros(len(model.vocabulary))
    expected[model.vocabulary["uav"]] = 1.0
    assert np.allclose(vec, expected)


def test_embed_out_of_vocabulary_errors():
    model = fit_tfidf(THREE_DOCS)
    with pytest.raises(EmbeddingError, match="no in-vocabulary"):
        embed_tfidf(model, "unrelated words entirely")


def test_embed_unit_norm():
    model = fit_tfidf(THREE_DOCS)
    for r in THREE_DOCS:
        assert np.linalg.norm(embed_tfidf(model, r.text)) == pytest.approx(1.0, abs=1e-9)


def _embedding_lines(records):
    return "\n".join(json.dumps(r) for r in records).encode("utf-8")


def test_load_external_ok():
    data = _embedding_lines(
        [
            {"id": "1", "model": "use-dan", "vector": [0.1] * 512},
            {"id": "2", "model": "use-dan", "vector": [0.2] * 512},
        ]
    )
    table = load_external_embeddings(data)
    assert table.dim == 512
    assert table.source == "external:use-dan"


def test_load_external_dim_mismatch():
    data = _embedding_lines(
        [
            {"id": "1", "model": "m", "vector": [0.1] * 512},
            {"id": "2", "model": "m", "vector": [0.2] * 768},
        ]
    )
    with pytest.raises(EmbeddingError, match="line 2"):
        load_external_embeddings(data)


def test_load_external_nan_rejected_with_line():
    data = _embedding_lines(
        [
            {"id": "1", "model": "m", "vector": [0.1, 0.2]},
            {"id": "2", "model": "m", "vector": [float("nan"), 0.2]},
        ]
    )
    with pytest.raises(EmbeddingError, match="line 2"):
        load_external_embeddings(data)


def test_load_external_duplicate_id():
    data = _embedding_lines(
        [
            {"id": "1", "model": "m", "vector": [0.1]},
            {"id": "1", "model": "m", "vector": [0.2]},
        ]
    )
    with pytest.raises(EmbeddingError, match="duplicate id"):
        load_external_embeddings(data)


def _random_table(n, dim, seed, ids=None):
    rng = np.random.default_rng(seed)
    ids = ids or [str(i) for i in range(n)]
    return EmbeddingTable(
        source="external:test", vectors={i: rng.normal(size=dim) for i in ids}
    )


def test_fuse_output_dim():
    a = _random_table(40, 64, 1)
    b = _random_table(40, 30, 2)
    fused = fuse(a, b, target_dim=16, seed=0)
    assert fused.dim == 16
    assert fused.source == "fused"
    for v in fused.vectors.values():
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-9)


def test_fuse_identity_is_normalized_concatenation():
    a = _random_table(6, 3, 3)
    b = _random_table(6, 2, 4)
    fused = fuse(a, b, target_dim=5, seed=0, reducer=identity_reduce)
    for rid in a.vectors:
        concat = np.concatenate([a.vectors[rid], b.vectors[rid]])
        assert np.allclose(fused.vectors[rid], concat / np.linalg.norm(concat))


def test_fuse_identity_preserves_cosine_ordering():
    a = _random_table(8, 4, 5)
    b = _random_table(8, 3, 6)
    fused = fuse(a, b, target_dim=7, seed=0, reducer=identity_reduce)
    ids = a.ids
    concat = {r: np.concatenate([a.vectors[r], b.vectors[r]]) for r in ids}
    pairs = [(i, j) for i in ids for j in ids if i < j]
    before = sorted(pairs, key=lambda p: cosine(concat[p[0]], concat[p[1]]))
    after = sorted(pairs, key=lambda p: cosine(fused.vectors[p[0]], fused.vectors[p[1]]))
    assert before == after


def test_fuse_deterministic():
    a = _random_table(20, 16, 7)
    b = _random_table(20, 8, 8)
    f1 = fuse(a, b, target_dim=6, seed=11)
    f2 = fuse(a, b, target_dim=6, seed=11)
    for rid in a.vectors:
        assert np.array_equal(f1.vectors[rid], f2.vectors[rid])


def test_fuse_id_mismatch():
    a = _random_table(4, 3, 1)
    b = _random_table(4, 3, 2, ids=["9", "8", "7", "6"])
    with pytest.raises(EmbeddingError, match="identical id sets"):
        fuse(a, b, target_dim=2, seed=0)


def test_fuse_bad_target_dim():
    a = _random_table(4, 3, 1)
    b = _random_table(4, 3, 2)
    with pytest.raises(EmbeddingError, match="target_dim"):
        fuse(a, b, target_dim=50, seed=0)


def test_pca_reduce_bitwise_deterministic():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(30, 12))
    assert np.array_equal(pca_reduce(x, 4, seed=1), pca_reduce(x.copy(), 4, seed=2))


def test_tfidf_table_covers_set():
    table = tfidf_table(fit_tfidf(THREE_DOCS), THREE_DOCS)
    assert set(table.vectors) == set(THREE_DOCS.ids)
