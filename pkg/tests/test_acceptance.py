"""Acceptance suite: every exit criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail line
per criterion. The pipeline criterion trains all five methods on a seeded
synthetic corpus and takes the bulk of the runtime (a few minutes on a
laptop CPU).
"""

import functools

import numpy as np
import pytest

from medtext import (CnnClassifier, CnnConfig, Codebook, BowEncoder, Doc2Vec,
                     GridSpec, SentenceMatrixEncoder, SoftmaxRegression, Vocabulary,
                     Word2Vec, WordEmbeddings, build_vocab, evaluate_bundles,
                     fit_codebook, grid_search, load_model, parameter_count,
                     save_model, train_method, tokenize)
from medtext.neural import Conv1D, MaxPool1D, grad_check, softmax_cross_entropy
from oracles import bow_histogram_reference, conv1d_reference, maxpool1d_reference
from synth import order_corpus, two_topic_sentences


def criterion(label):
    """Print one '[acceptance] <label>: PASS/FAIL' line per criterion."""
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print("\n[acceptance] %s: FAIL" % label)
                raise
            print("\n[acceptance] %s: PASS" % label)
        return wrapper
    return decorate


# -- 1. gradient correctness --------------------------------------------------

@criterion("1 gradient correctness (toy CNN, h=1e-3, rel err < 1e-4)")
def test_criterion_1_gradient_correctness():
    model = CnnClassifier(max_len=8, embed_dim=6, conv_pairs=1, filters=4,
                          kernel=3, fc_dim=5, n_classes=3, dropout=0.5,
                          seed=8, dtype="float64").build()
    rng = np.random.default_rng(1009)  # chosen clear of relu kinks/pool ties
    X = rng.normal(size=(2, 8, 6))
    y = np.array([0, 2])
    model.forward(X, train=True)
    for layer in model.dropout_layers():
        layer.frozen_mask = layer._mask

    def loss_fn():
        return softmax_cross_entropy(model.forward(X, train=True), y)[0]

    _, params, grads = model.loss_and_grads(X, y, train=True)
    grads = [g.copy() for g in grads]
    worst = 0.0
    for p, g in zip(params, grads):
        err = grad_check(loss_fn, [p], [g], h=1e-3)
        assert err < 1e-4, "tensor %r: max rel err %.3e" % (p.shape, err)
        worst = max(worst, err)
    assert worst < 1e-4


# -- 2. kernel oracle equivalence ---------------------------------------------

@criterion("2 kernel oracle equivalence (conv/pool/bow vs brute force, <= 1e-10)")
def test_criterion_2_kernel_oracles():
    rng = np.random.default_rng(202)
    for case in range(100):
        L = int(rng.integers(3, 11))
        c_in = int(rng.integers(1, 5))
        c_out = int(rng.integers(1, 5))
        k = int(rng.choice([1, 3, 5]))
        conv = Conv1D(c_in, c_out, k, rng, dtype=np.float64)
        conv.weights[...] = rng.normal(size=conv.weights.shape)
        conv.bias[...] = rng.normal(size=c_out)
        x = rng.normal(size=(L, c_in))
        got = conv.forward(x[None])[0]
        want = conv1d_reference(x, conv.weights, conv.bias)
        assert np.max(np.abs(got - want)) <= 1e-10, "conv case %d" % case

    for case in range(100):
        L = int(rng.integers(2, 13))
        C = int(rng.integers(1, 5))
        window = int(rng.integers(2, min(L, 4) + 1))
        stride = int(rng.integers(1, 4))
        x = rng.normal(size=(L, C))
        got = MaxPool1D(window, stride).forward(x[None])[0]
        want = maxpool1d_reference(x, window, stride)
        assert np.max(np.abs(got - want)) <= 1e-10, "pool case %d" % case

    for case in range(100):
        dim = int(rng.integers(2, 6))
        centers = rng.normal(size=(int(rng.integers(3, 17)), dim))
        k_soft = int(rng.integers(1, 8))
        tokens = ["t%d" % i for i in range(int(rng.integers(2, 9)))]
        vocab = Vocabulary(tokens)
        matrix = np.zeros((vocab.size, dim))
        matrix[2:] = rng.normal(size=(len(tokens), dim))
        sentence = [tokens[i] for i in rng.integers(0, len(tokens),
                                                    size=int(rng.integers(1, 21)))]
        normalize = bool(rng.integers(0, 2))
        got = BowEncoder(Codebook(centers), WordEmbeddings(matrix), vocab,
                         k_soft=k_soft, normalize=normalize).encode(sentence)
        vecs = [matrix[vocab.token_to_id[t]] for t in sentence]
        want = bow_histogram_reference(centers, vecs, k_soft, normalize)
        assert np.max(np.abs(got - want)) <= 1e-10, "bow case %d" % case


# -- 3. paper-shape check -----------------------------------------------------

@criterion("3 paper-shape forward pass and parameter count")
def test_criterion_3_paper_shape():
    # closed-form count evaluated independently of the package:
    # conv1 256*5*100+256, conv2..4 256*5*256+256, pooled 50->25->12,
    # dense 128*(12*256)+128, out 26*128+26
    independent = (256 * 5 * 100 + 256) + 3 * (256 * 5 * 256 + 256) \
        + (128 * 12 * 256 + 128) + (26 * 128 + 26)
    assert independent == 1508762

    cfg = CnnConfig(max_len=50, embed_dim=100, conv_pairs=2, filters=256,
                    kernel=5, pool=2, dropout=0.5, fc_dim=128, n_classes=26)
    assert parameter_count(cfg) == independent

    model = CnnClassifier().build()
    assert model.num_parameters() == independent

    rng = np.random.default_rng(30)
    probs = model.predict_proba(rng.normal(size=(50, 100)).astype(np.float32))
    assert probs.shape == (26,)
    assert abs(probs.sum() - 1.0) <= 1e-6
    assert np.all(probs > 0.0)


# -- 4. five-method comparison on the order-twin corpus ------------------------

CNN_PARAMS = dict(conv_pairs=1, filters=64, kernel=5, fc_dim=64, epochs=10,
                  batch_size=32, learning_rate=1e-3)
LOGR_PARAMS = dict(learning_rate=0.5, epochs=120, batch_size=64)


@pytest.fixture(scope="module")
def pipeline():
    """Train all five methods on the 4-class corpus whose first two classes
    are bag-of-words twins (order carries the class)."""
    train_ds, valid_ds = order_corpus(n_train=500, n_valid=200, seed=11)
    sentences = [tokenize(ex.text) for ex in train_ds.examples]
    w2v = Word2Vec(dim=32, window=3, negatives=5, epochs=5, min_count=2,
                   seed=21).fit(sentences)
    d2v = Doc2Vec(dim=32, window=3, negatives=5, epochs=12, infer_epochs=12,
                  min_count=2, seed=22).fit(sentences)
    codebook = fit_codebook(w2v.embeddings_.matrix[2:], n_centers=32, seed=23)

    bundles = {}
    for method in ("cnn", "doc2vec_logr", "zeromean_logr", "elimmean_logr", "bow_logr"):
        kwargs = dict(seed=33, max_len=16, k_soft=8,
                      cnn_params=dict(CNN_PARAMS), logr_params=dict(LOGR_PARAMS))
        if method == "doc2vec_logr":
            kwargs["doc_model"] = d2v
        else:
            kwargs.update(embeddings=w2v.embeddings_, vocab=w2v.vocab_)
        if method == "bow_logr":
            kwargs["codebook"] = codebook
        bundles[method], _ = train_method(method, train_ds, valid_ds, **kwargs)

    report = evaluate_bundles(list(bundles.values()), valid_ds)
    twin_idx = [i for i, ex in enumerate(valid_ds.examples) if ex.label < 2]
    twin_ds = valid_ds.subset(twin_idx)
    twin_acc = {}
    for method, bundle in bundles.items():
        X, y = bundle.featurize_dataset(twin_ds)
        twin_acc[method] = float(np.mean(bundle.classifier.predict(X) == y))
    return dict(report=report, twin_acc=twin_acc)


@criterion("4a CNN validation accuracy >= 0.90")
def test_criterion_4a_cnn_accuracy(pipeline):
    acc = pipeline["report"].accuracy_of("cnn")
    assert acc >= 0.90, "cnn accuracy %.4f" % acc


@criterion("4b mean-embedding baselines at chance on permutation twins (<= 0.60)")
def test_criterion_4b_twin_subset(pipeline):
    for method in ("zeromean_logr", "elimmean_logr"):
        acc = pipeline["twin_acc"][method]
        assert acc <= 0.60, "%s twin-subset accuracy %.4f" % (method, acc)


@criterion("4c CNN beats the best baseline by >= 0.15")
def test_criterion_4c_margin(pipeline):
    report = pipeline["report"]
    cnn = report.accuracy_of("cnn")
    best_baseline = max(report.accuracy_of(m) for m in
                        ("doc2vec_logr", "zeromean_logr", "elimmean_logr", "bow_logr"))
    assert cnn - best_baseline >= 0.15, \
        "cnn %.4f vs best baseline %.4f" % (cnn, best_baseline)


# -- 5. embedding sanity --------------------------------------------------------

@criterion("5 word2vec intra-topic minus inter-topic cosine >= 0.2")
def test_criterion_5_embedding_sanity():
    sentences, topics = two_topic_sentences(n_per_topic=150, sent_len=8, seed=42)
    model = Word2Vec(dim=16, window=5, negatives=5, epochs=10, min_count=1,
                     seed=3).fit(sentences)
    emb, vocab = model.embeddings_, model.vocab_

    def cosine(u, v):
        return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))

    all_tokens = topics["a"] + topics["b"]
    intra, inter = [], []
    for i, t1 in enumerate(all_tokens):
        for t2 in all_tokens[i + 1:]:
            c = cosine(emb.matrix[vocab.token_to_id[t1]], emb.matrix[vocab.token_to_id[t2]])
            (intra if t1[0] == t2[0] else inter).append(c)
    gap = float(np.mean(intra) - np.mean(inter))
    assert gap >= 0.2, "cosine gap %.3f" % gap


# -- 6. determinism and persistence ----------------------------------------------

@criterion("6 determinism and save/load bit-exactness")
def test_criterion_6_determinism_persistence(tmp_path):
    rng = np.random.default_rng(60)
    tokens = ["t%d" % i for i in range(12)]
    vocab = Vocabulary(tokens)
    matrix = np.zeros((vocab.size, 6), dtype=np.float32)
    matrix[2:] = rng.normal(size=(len(tokens), 6)).astype(np.float32)
    emb = WordEmbeddings(matrix)
    enc = SentenceMatrixEncoder(emb, vocab, max_len=8)
    sents = [[tokens[i] for i in rng.integers(0, 12, size=6)] for _ in range(40)]
    X = enc.transform(sents)
    y = rng.integers(0, 3, size=40)

    # identical seeds -> byte-identical trained model payloads
    kwargs = dict(max_len=8, embed_dim=6, conv_pairs=1, filters=4, kernel=3,
                  fc_dim=4, n_classes=3, epochs=3, batch_size=8, seed=5)
    p1, p2 = str(tmp_path / "a.bin"), str(tmp_path / "b.bin")
    save_model(CnnClassifier(**kwargs).fit(X, y), p1)
    save_model(CnnClassifier(**kwargs).fit(X, y), p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()

    # save -> load -> forward is bit-identical, CNN and logistic regression
    cnn = CnnClassifier(**kwargs).fit(X, y)
    save_model(cnn, p1)
    assert np.array_equal(cnn.predict_proba(X), load_model(p1).predict_proba(X))

    F = X.reshape(len(X), -1)
    logr = SoftmaxRegression(epochs=10, seed=2).fit(F, y)
    p3, p4 = str(tmp_path / "c.bin"), str(tmp_path / "d.bin")
    save_model(logr, p3)
    save_model(SoftmaxRegression(epochs=10, seed=2).fit(F, y), p4)
    assert open(p3, "rb").read() == open(p4, "rb").read()
    assert np.array_equal(logr.predict_proba(F), load_model(p3).predict_proba(F))


# -- 7. encoder exactness ---------------------------------------------------------

@criterion("7 sentence-matrix truncation and histogram mass exactness")
def test_criterion_7_encoder_exactness():
    rng = np.random.default_rng(70)
    tokens = ["t%d" % i for i in range(70)]
    vocab = Vocabulary(tokens)
    matrix = np.zeros((vocab.size, 100), dtype=np.float32)
    matrix[2:] = rng.normal(size=(70, 100)).astype(np.float32)
    emb = WordEmbeddings(matrix)

    sentence = ["t%d" % i for i in range(60)]
    sm = SentenceMatrixEncoder(emb, vocab, max_len=50).encode(sentence)
    assert sm.rows.shape == (50, 100)
    assert sm.true_len == 50
    for i in range(50):
        assert np.array_equal(sm.rows[i], matrix[vocab.token_to_id[sentence[i]]])
    # tokens 51..60 influence nothing: same matrix as the truncated sentence
    sm_prefix = SentenceMatrixEncoder(emb, vocab, max_len=50).encode(sentence[:50])
    assert np.array_equal(sm.rows, sm_prefix.rows)

    centers = rng.normal(size=(1000, 100))
    enc = BowEncoder(Codebook(centers), emb, vocab, k_soft=50, normalize=False)
    in_vocab = 25
    bow_sentence = ["t%d" % (i % 70) for i in range(in_vocab)] + ["oov"] * 5
    bins = enc.encode(bow_sentence)
    expected_mass = in_vocab * sum(1.0 / r for r in range(1, 51))
    assert abs(bins.sum() - expected_mass) <= 1e-9, \
        "mass %.12f vs %.12f" % (bins.sum(), expected_mass)


# -- 8. grid search contract -------------------------------------------------------

@criterion("8 grid search: full Cartesian ranking, depths {2,4,6}, deterministic")
def test_criterion_8_grid_search():
    from synth import rows_to_dataset, topical_rows
    label_names = ("class0", "class1", "class2")
    train_ds = rows_to_dataset(topical_rows(n_per_class=15, seed=80), label_names)
    valid_ds = rows_to_dataset(topical_rows(n_per_class=8, seed=81), label_names)
    sentences = [tokenize(ex.text) for ex in train_ds.examples]
    vocab = build_vocab(sentences, min_count=1)
    rng = np.random.default_rng(82)
    matrix = np.zeros((vocab.size, 8), dtype=np.float32)
    matrix[2:] = rng.normal(size=(vocab.size - 2, 8)).astype(np.float32)
    emb = WordEmbeddings(matrix)

    def run():
        return grid_search(train_ds, valid_ds, emb, vocab, GridSpec(),
                           seed=83, max_len=8,
                           cnn_params=dict(fc_dim=8, epochs=1, batch_size=8, dropout=0.0))

    results = run()
    ranked = [r for r in results if r.skipped is None]
    assert len(ranked) == 27  # every default point is feasible at max_len=8
    assert {r.conv_layers for r in ranked} == {2, 4, 6}
    assert {r.filters for r in ranked} == {64, 128, 256}
    assert {r.kernel for r in ranked} == {3, 5, 7}
    keys = [(-r.accuracy, r.n_params, r.config_key()) for r in ranked]
    assert keys == sorted(keys)
    assert len(set(r.config_key() for r in results)) == 27

    rerun = run()
    assert [(r.config_key(), r.accuracy, r.n_params) for r in rerun] == \
           [(r.config_key(), r.accuracy, r.n_params) for r in results]
