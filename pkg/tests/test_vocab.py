import numpy as np
import pytest

from medtext import UnigramTable, Vocabulary, build_vocab
from medtext.vocab import PAD_ID, UNK_ID, N_RESERVED


class TestBuildVocab:
    def test_min_count_filters(self):
        assert build_vocab([["a", "b", "a"]], min_count=2).size == 3

    def test_min_count_one(self):
        assert build_vocab([["a", "b", "a"]], min_count=1).size == 4

    def test_empty_corpus(self):
        v = build_vocab([], min_count=1)
        assert v.size == 2
        assert v.id_to_token == ["<PAD>", "<UNK>"]

    def test_counts_recorded(self):
        v = build_vocab([["a", "b", "a"], ["b", "a"]], min_count=1)
        assert v.counts[v.token_to_id["a"]] == 3
        assert v.counts[v.token_to_id["b"]] == 2
        assert v.counts[PAD_ID] == 0 and v.counts[UNK_ID] == 0

    def test_first_appearance_order(self):
        v = build_vocab([["z", "a", "z", "m"]], min_count=1)
        assert v.id_to_token[N_RESERVED:] == ["z", "a", "m"]

    def test_lookup_oov_is_unk(self):
        v = build_vocab([["a"]], min_count=1)
        assert v.lookup("a") == 2
        assert v.lookup("missing") == UNK_ID
        assert "a" in v and "missing" not in v

    def test_reserved_tokens_not_in_contains(self):
        v = build_vocab([["a"]], min_count=1)
        assert "<PAD>" not in v and "<UNK>" not in v


class TestUnigramTable:
    def test_empirical_matches_power_law(self):
        counts = [1, 2, 4, 8, 16, 100]
        vocab = Vocabulary(["t%d" % i for i in range(len(counts))], counts)
        table = UnigramTable(vocab, power=0.75)
        theory = np.array(counts, dtype=float) ** 0.75
        theory /= theory.sum()

        rng = np.random.default_rng(99)
        draws = table.sample(rng, 1_000_000)
        assert draws.min() >= N_RESERVED
        for i, p in enumerate(theory):
            emp = np.mean(draws == i + N_RESERVED)
            assert abs(emp - p) < 0.01, "token %d: empirical %.4f vs %.4f" % (i, emp, p)

    def test_sample_excluding(self):
        vocab = Vocabulary(["x", "y"], [1, 1])
        table = UnigramTable(vocab)
        rng = np.random.default_rng(0)
        forbidden = vocab.token_to_id["x"]
        ids = table.sample_excluding(rng, 500, forbidden)
        assert (ids != forbidden).all()

    def test_empty_vocab_rejected(self):
        with pytest.raises(ValueError):
            UnigramTable(Vocabulary([], []))


def test_duplicate_tokens_rejected():
    with pytest.raises(ValueError):
        Vocabulary(["a", "a"])
