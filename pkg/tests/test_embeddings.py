import numpy as np
import pytest

from medtext import (Doc2Vec, Word2Vec, WordEmbeddings, build_vocab, load_embeddings,
                     save_embeddings, sgns_loss_and_grads)
from synth import two_topic_sentences


def _cosine(u, v):
    return float(u @ v / max(np.linalg.norm(u) * np.linalg.norm(v), 1e-12))


class TestSgnsGradients:
    def test_matches_central_differences(self):
        """Analytic gradients of one (target, context, negatives) update vs
        finite differences in double precision."""
        rng = np.random.default_rng(0)
        v = rng.normal(size=8)
        U = rng.normal(size=(6, 8))
        _, grad_v, grad_U = sgns_loss_and_grads(v, U)
        h = 1e-6
        worst = 0.0
        for i in range(v.size):
            vp, vm = v.copy(), v.copy()
            vp[i] += h
            vm[i] -= h
            num = (sgns_loss_and_grads(vp, U)[0] - sgns_loss_and_grads(vm, U)[0]) / (2 * h)
            worst = max(worst, abs(num - grad_v[i]) / max(abs(num), abs(grad_v[i]), 1e-8))
        for r in range(U.shape[0]):
            for c in range(U.shape[1]):
                Up, Um = U.copy(), U.copy()
                Up[r, c] += h
                Um[r, c] -= h
                num = (sgns_loss_and_grads(v, Up)[0] - sgns_loss_and_grads(v, Um)[0]) / (2 * h)
                worst = max(worst, abs(num - grad_U[r, c]) / max(abs(num), abs(grad_U[r, c]), 1e-8))
        assert worst < 1e-4

    def test_loss_positive_and_finite(self):
        rng = np.random.default_rng(1)
        loss, _, _ = sgns_loss_and_grads(rng.normal(size=4), rng.normal(size=(3, 4)))
        assert np.isfinite(loss) and loss > 0


class TestWord2Vec:
    def test_topic_separation(self):
        """Intra-topic similarity beats inter-topic by a clear margin on a
        two-topic corpus with disjoint vocabularies."""
        sentences, topics = two_topic_sentences(n_per_topic=100, seed=42)
        model = Word2Vec(dim=16, window=5, negatives=5, epochs=8, min_count=1, seed=3)
        model.fit(sentences)
        vocab, emb = model.vocab_, model.embeddings_
        all_tokens = topics["a"] + topics["b"]
        intra, inter = [], []
        for i, t1 in enumerate(all_tokens):
            for t2 in all_tokens[i + 1:]:
                c = _cosine(emb.matrix[vocab.token_to_id[t1]],
                            emb.matrix[vocab.token_to_id[t2]])
                (intra if t1[0] == t2[0] else inter).append(c)
        gap = np.mean(intra) - np.mean(inter)
        assert gap >= 0.2, "intra/inter cosine gap %.3f" % gap

    def test_dimension(self):
        model = Word2Vec(dim=100, epochs=1, min_count=1, seed=0)
        model.fit([["a", "b", "c", "a", "b"]] * 3)
        assert model.embeddings_.matrix.shape[1] == 100
        assert model.embeddings_.dim == 100

    def test_deterministic(self):
        sentences, _ = two_topic_sentences(n_per_topic=10, seed=8)
        a = Word2Vec(dim=8, epochs=2, min_count=1, seed=5).fit(sentences)
        b = Word2Vec(dim=8, epochs=2, min_count=1, seed=5).fit(sentences)
        assert np.array_equal(a.embeddings_.matrix, b.embeddings_.matrix)

    def test_pad_unk_rows_zero(self):
        sentences, _ = two_topic_sentences(n_per_topic=10, seed=8)
        model = Word2Vec(dim=8, epochs=2, min_count=1, seed=5).fit(sentences)
        assert np.all(model.embeddings_.matrix[:2] == 0.0)

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            Word2Vec(min_count=1).fit([])

    def test_all_oov_corpus(self):
        # every token below min_count: nothing trainable
        with pytest.raises(ValueError):
            Word2Vec(min_count=5).fit([["a", "b"], ["c", "d"]])


class TestDoc2Vec:
    def _corpus(self, seed=7):
        rng = np.random.default_rng(seed)
        topics = {"a": ["a%d" % i for i in range(10)], "b": ["b%d" % i for i in range(10)]}
        sents = []
        for tokens in topics.values():
            for _ in range(15):
                sents.append(list(rng.choice(tokens, size=8, replace=True)))
        return sents

    def test_dimension_and_epochs(self):
        model = Doc2Vec(dim=100, epochs=60, min_count=1, seed=0)
        model.fit([["a", "b", "c"], ["b", "c", "a"]])
        assert model.doc_vectors_.shape == (2, 100)

    def test_one_doc_vector_per_sentence(self):
        sents = [["a", "b"]] * 7
        model = Doc2Vec(dim=8, epochs=2, min_count=1, seed=0).fit(sents)
        assert model.doc_vectors_.shape[0] == 7

    def test_deterministic(self):
        sents = self._corpus()
        a = Doc2Vec(dim=8, epochs=3, min_count=1, seed=4).fit(sents)
        b = Doc2Vec(dim=8, epochs=3, min_count=1, seed=4).fit(sents)
        assert np.array_equal(a.doc_vectors_, b.doc_vectors_)
        assert np.array_equal(a.word_vectors_, b.word_vectors_)

    def test_infer_deterministic(self):
        sents = self._corpus()
        model = Doc2Vec(dim=8, epochs=3, min_count=1, seed=4).fit(sents)
        assert np.array_equal(model.infer(sents[0], seed=123), model.infer(sents[0], seed=123))

    def test_infer_recovers_training_sentence(self):
        """Inferring a training sentence lands nearer its own trained doc
        vector than the median of the others."""
        sents = self._corpus()
        model = Doc2Vec(dim=16, window=4, negatives=5, epochs=40, infer_epochs=40,
                        min_count=1, seed=5).fit(sents)
        for idx in (0, 7, 16, 25):
            inferred = model.infer(sents[idx], seed=123)
            sims = [_cosine(inferred, model.doc_vectors_[j]) for j in range(len(sents))]
            own = sims[idx]
            others = sorted(sims[:idx] + sims[idx + 1:])
            median = others[len(others) // 2]
            assert own > median, "doc %d: own %.3f median %.3f" % (idx, own, median)

    def test_empty_inference_is_pure_noise_init(self):
        # zero positive updates: the result must not depend on the model
        a = Doc2Vec(dim=8, epochs=2, min_count=1, seed=1).fit(self._corpus(seed=1))
        b = Doc2Vec(dim=8, epochs=2, min_count=1, seed=2).fit(self._corpus(seed=2))
        assert np.array_equal(a.infer([], seed=9), b.infer([], seed=9))

    def test_all_oov_sentence_infers_against_unk(self):
        model = Doc2Vec(dim=8, epochs=2, min_count=1, seed=1).fit(self._corpus())
        vec = model.infer(["zzz", "qqq", "xxx"], seed=5)
        assert np.all(np.isfinite(vec))
        # updates happened: differs from the bare noise init
        assert not np.array_equal(vec, model.infer([], seed=5))

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            Doc2Vec(min_count=1).fit([])

    def test_single_token_sentences(self):
        # empty context windows: the doc vector alone predicts the target
        model = Doc2Vec(dim=4, epochs=3, min_count=1, seed=0)
        model.fit([["only"], ["one"], ["only"]])
        assert model.doc_vectors_.shape == (3, 4)
        assert np.all(np.isfinite(model.doc_vectors_))
        vec = model.infer(["only"], seed=1)
        assert np.all(np.isfinite(vec))


class TestEmbeddingFile:
    def _small(self):
        vocab = build_vocab([["a", "b", "a"]], min_count=1)
        rng = np.random.default_rng(0)
        matrix = rng.normal(size=(vocab.size, 5)).astype(np.float32)
        matrix[:2] = 0.0
        return WordEmbeddings(matrix), vocab

    def test_roundtrip_bit_exact(self, tmp_path):
        emb, vocab = self._small()
        path = str(tmp_path / "emb.txt")
        save_embeddings(emb, vocab, path)
        loaded_emb, loaded_vocab = load_embeddings(path)
        assert loaded_vocab.id_to_token == vocab.id_to_token
        assert np.array_equal(loaded_emb.matrix, emb.matrix)

    def test_reserved_tokens_serialized(self, tmp_path):
        emb, vocab = self._small()
        path = str(tmp_path / "emb.txt")
        save_embeddings(emb, vocab, path)
        lines = open(path, encoding="utf-8").read().splitlines()
        assert lines[0] == "4 5"
        assert lines[1].startswith("<PAD> ") and lines[2].startswith("<UNK> ")

    def test_pad_unk_only_roundtrip(self, tmp_path):
        vocab = build_vocab([], min_count=1)
        emb = WordEmbeddings(np.zeros((2, 3), dtype=np.float32))
        path = str(tmp_path / "emb.txt")
        save_embeddings(emb, vocab, path)
        loaded_emb, loaded_vocab = load_embeddings(path)
        assert loaded_vocab.size == 2 and loaded_emb.matrix.shape == (2, 3)

    def test_bad_row_named(self, tmp_path):
        path = str(tmp_path / "emb.txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("3 4\n<PAD> 0 0 0 0\n<UNK> 0 0 0 0\nword 1 2 3\n")
        with pytest.raises(ValueError, match="row 2"):
            load_embeddings(path)

    def test_rewrite_is_byte_identical(self, tmp_path):
        emb, vocab = self._small()
        p1, p2 = str(tmp_path / "a.txt"), str(tmp_path / "b.txt")
        save_embeddings(emb, vocab, p1)
        loaded_emb, loaded_vocab = load_embeddings(p1)
        save_embeddings(loaded_emb, loaded_vocab, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()
