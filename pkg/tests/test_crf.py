import numpy as np
import pytest

from reqconflict.crf import (
    CrfModel,
    brute_force_decode,
    extract_features,
    neg_log_likelihood_and_grad,
    _encode_corpus,
    evaluate_ner,
    token_accuracy,
    train_crf,
    viterbi_decode,
)
from reqconflict.ner import (
    GENERAL_TAGSET,
    SOFTWARE_TAGSET,
    AnnotatedSentence,
    load_toy_corpus,
    parse_annotated_corpus,
)
from reqconflict.optim import minimize
from reqconflict.tokens import tokenize


def test_features_first_token():
    toks = tokenize("The UAV flies")
    feats = extract_features(toks, 0)
    assert "word=the" in feats
    assert "BOS" in feats
    assert "next=uav" in feats
    assert "initcap" in feats
    assert "EOS" not in feats


def test_features_last_token():
    toks = tokenize("The UAV flies")
    feats = extract_features(toks, 2)
    assert "EOS" in feats
    assert "prev=uav" in feats
    assert "suf3=ies" in feats


def test_features_digits_and_caps():
    toks = tokenize("within 25 UAV")
    assert {"isdigit", "hasdigit"} <= set(extract_features(toks, 1))
    assert {"allcaps", "isalpha"} <= set(extract_features(toks, 2))
    assert "isdigit" not in extract_features(toks, 2)


def test_features_deterministic():
    toks = tokenize("The system shall respond")
    assert extract_features(toks, 1) == extract_features(toks, 1)


def test_features_out_of_range():
    with pytest.raises(IndexError):
        extract_features(tokenize("one two"), 2)


def _tiny_corpus():
    text = (
        "The\tO\nUAV\tB-Actor\nshall\tO\nfly\tB-Action\n"
        "\n"
        "The\tO\noperator\tB-Actor\nshall\tO\nland\tB-Action\nthe\tO\nUAV\tB-Object\n"
    )
    return parse_annotated_corpus(text)


def test_gradient_matches_finite_differences():
    corpus = _tiny_corpus()
    feature_index, encoded = _encode_corpus(corpus, SOFTWARE_TAGSET)
    n_feat = len(feature_index)
    n_lab = len(SOFTWARE_TAGSET.labels)
    rng = np.random.default_rng(0)
    w = rng.normal(scale=0.1, size=n_feat * n_lab + n_lab * n_lab)
    _, grad = neg_log_likelihood_and_grad(w, encoded, n_feat, n_lab, c2=0.1)
    eps = 1e-6
    idx = rng.choice(len(w), size=40, replace=False)
    for i in idx:
        wp, wm = w.copy(), w.copy()
        wp[i] += eps
        wm[i] -= eps
        fp, _ = neg_log_likelihood_and_grad(wp, encoded, n_feat, n_lab, c2=0.1)
        fm, _ = neg_log_likelihood_and_grad(wm, encoded, n_feat, n_lab, c2=0.1)
        fd = (fp - fm) / (2 * eps)
        assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_training_is_deterministic():
    corpus = _tiny_corpus()
    a = train_crf(corpus, hyperparams={"max_iterations": 20})
    b = train_crf(corpus, hyperparams={"max_iterations": 20})
    assert np.array_equal(a.state_weights, b.state_weights)
    assert np.array_equal(a.trans_weights, b.trans_weights)


def test_training_fits_tiny_corpus():
    corpus = _tiny_corpus()
    model = train_crf(corpus)
    assert token_accuracy(model, corpus) == 1.0


def test_viterbi_matches_brute_force():
    corpus = _tiny_corpus()
    model = train_crf(corpus, hyperparams={"max_iterations": 10})
    rng = np.random.default_rng(1)
    # perturb weights so decodes are not degenerate
    model.state_weights = model.state_weights + rng.normal(scale=0.3, size=model.state_weights.shape)
    model.trans_weights = model.trans_weights + rng.normal(scale=0.3, size=model.trans_weights.shape)
    for text in ["The UAV shall fly", "operator shall land", "UAV", "fly the UAV"]:
        toks = tokenize(text)
        assert viterbi_decode(model, toks) == brute_force_decode(model, toks)


def test_decode_empty_sentence():
    model = train_crf(_tiny_corpus(), hyperparams={"max_iterations": 5})
    with pytest.raises(ValueError):
        viterbi_decode(model, [])


def test_unknown_features_score_zero():
    model = train_crf(_tiny_corpus(), hyperparams={"max_iterations": 10})
    assert model.feature_weight("word=zzzunseen", "O") == 0.0
    # decoding a fully unseen sentence still returns a valid label sequence
    labels = viterbi_decode(model, tokenize("completely unseen words here"))
    assert all(lab in SOFTWARE_TAGSET.labels for lab in labels)


def test_model_save_load_roundtrip(tmp_path):
    model = train_crf(_tiny_corpus(), hyperparams={"max_iterations": 10})
    path = str(tmp_path / "model.json")
    model.save(path)
    again = CrfModel.load(path)
    assert again.labels == model.labels
    assert np.array_equal(again.state_weights, model.state_weights)
    assert np.array_equal(again.trans_weights, model.trans_weights)
    toks = tokenize("The UAV shall fly")
    assert viterbi_decode(again, toks) == viterbi_decode(model, toks)


def test_model_load_rejects_bad_version(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format_version": 99}')
    with pytest.raises(ValueError, match="format version"):
        CrfModel.load(str(path))


def test_default_hyperparams_applied():
    model = train_crf(_tiny_corpus(), hyperparams={"max_iterations": 5})
    assert model.hyperparams["c1"] == 0.1
    assert model.hyperparams["c2"] == 0.1
    assert model.hyperparams["max_iterations"] == 5


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        train_crf([])


def test_l1_encourages_sparsity():
    corpus = load_toy_corpus()[:20]
    dense = train_crf(corpus, hyperparams={"c1": 0.0, "max_iterations": 30})
    sparse = train_crf(corpus, hyperparams={"c1": 1.0, "max_iterations": 30})
    n_dense = int(np.count_nonzero(dense.state_weights))
    n_sparse = int(np.count_nonzero(sparse.state_weights))
    assert n_sparse < n_dense


def test_optimizer_history_non_increasing():
    corpus = _tiny_corpus()
    feature_index, encoded = _encode_corpus(corpus, SOFTWARE_TAGSET)
    n_feat = len(feature_index)
    n_lab = len(SOFTWARE_TAGSET.labels)
    w0 = np.zeros(n_feat * n_lab + n_lab * n_lab)
    _, history = minimize(
        lambda w: neg_log_likelihood_and_grad(w, encoded, n_feat, n_lab, 0.1),
        w0,
        l1=0.1,
        max_iter=40,
    )
    assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))
    assert history[-1] < history[0]


def test_minimize_quadratic():
    target = np.array([3.0, -2.0, 0.5])

    def fg(x):
        d = x - target
        return float(d @ d), 2 * d

    x, _ = minimize(fg, np.zeros(3), l1=0.0, max_iter=100)
    assert np.allclose(x, target, atol=1e-4)


def test_minimize_l1_shrinks_to_zero():
    # minimize x^2 + 10 |x|: the optimum is exactly 0
    def fg(x):
        return float(x @ x), 2 * x

    x, _ = minimize(fg, np.array([2.0]), l1=10.0, max_iter=100)
    assert x[0] == 0.0


def test_evaluate_ner_structure():
    corpus = load_toy_corpus()
    result = evaluate_ner(corpus, n_folds=3, seed=0, hyperparams={"max_iterations": 25})
    assert set(result) == {"per_type", "averages", "warnings", "folds"}
    assert len(result["folds"]) == 3
    macro = result["averages"]["macro"]["f1"]
    assert 0.0 <= macro["mean"] <= 1.0
    assert macro["std"] >= 0.0


def test_evaluate_ner_too_few_sentences():
    with pytest.raises(ValueError, match="folds"):
        evaluate_ner(_tiny_corpus(), n_folds=5)


def test_evaluate_ner_general_tagset():
    text = "uav\tB-Noun\nflies\tB-Verb\n\nsystem\tB-Noun\nlogs\tB-Verb\ndata\tB-Noun\n"
    corpus = parse_annotated_corpus(text, GENERAL_TAGSET) * 4
    result = evaluate_ner(
        corpus, n_folds=2, seed=1, hyperparams={"max_iterations": 20}, tagset=GENERAL_TAGSET
    )
    assert set(result["per_type"]) <= {"Noun", "Verb"}
