"""Word and sentence embedding training.

Word vectors come from skip-gram with negative sampling; sentence vectors
from the distributed-memory paragraph model (doc vector averaged with the
context word vectors). Both train single-threaded and are bit-deterministic
for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator

from .vocab import PAD_TOKEN, UNK_TOKEN, N_RESERVED, UnigramTable, Vocabulary, build_vocab

LR_FLOOR = 0.1  # linear decay stops at 10% of the initial learning rate


@dataclass
class WordEmbeddings:
    """Dense token vectors, one row per vocabulary id.

    Rows 0 (PAD) and 1 (UNK) are all-zero so padded and unknown positions stay
    inert in downstream encoders.
    """

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_dict(cls, vocab: Vocabulary, vectors: dict, dim: int) -> "WordEmbeddings":
        """Build embeddings for a vocabulary from a token->vector mapping.
        Handy for tests and toy setups; unmapped tokens stay zero."""
        m = np.zeros((vocab.size, dim), dtype=np.float32)
        for token, vec in vectors.items():
            i = vocab.token_to_id[token]
            m[i] = np.asarray(vec, dtype=np.float32)
        return cls(m)


def sgns_loss_and_grads(v, out_vectors, n_positive: int = 1):
    """Negative-sampling loss and analytic gradients for one update.

    ``v`` is the predictor vector, ``out_vectors`` stacks the output vectors
    of the positive target(s) followed by the sampled noise tokens. Returns
    (loss, grad_v, grad_out_vectors). Dtype follows the inputs, so gradient
    verification can run in double precision.
    """
    v = np.asarray(v)
    U = np.asarray(out_vectors)
    scores = U @ v
    y = np.zeros(len(U), dtype=scores.dtype)
    y[:n_positive] = 1.0
    # -log sigma(s) for positives, -log sigma(-s) for negatives
    loss = np.logaddexp(0.0, np.where(y > 0, -scores, scores)).sum()
    g = expit(scores) - y
    return loss, g @ U, np.outer(g, v)


def _init_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return ((rng.random((n, dim)) - 0.5) / dim).astype(np.float32)


def _count_pairs(encoded, window: int) -> int:
    total = 0
    for ids in encoded:
        n = len(ids)
        for t in range(n):
            total += min(n, t + window + 1) - max(0, t - window) - 1
    return total


class Word2Vec(BaseEstimator):
    """Skip-gram word embeddings trained with negative sampling.

    Contexts are every position within ``window`` of the target; noise tokens
    are drawn from the unigram distribution raised to the 0.75 power. The
    learning rate decays linearly to 10% of its initial value over the run.
    Out-of-vocabulary tokens are dropped, so the PAD and UNK rows stay zero.
    """

    def __init__(self, dim=100, window=5, negatives=5, epochs=5,
                 learning_rate=0.025, min_count=2, seed=0):
        self.dim = dim
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.min_count = min_count
        self.seed = seed

    def fit(self, sentences, vocab: Vocabulary | None = None):
        sents = [list(s) for s in sentences]
        if vocab is None:
            vocab = build_vocab(sents, self.min_count)
        encoded = [np.asarray(vocab.encode_known(s), dtype=np.intp) for s in sents]
        total_pairs = _count_pairs(encoded, self.window) * self.epochs
        if total_pairs == 0:
            raise ValueError("empty corpus: no in-vocabulary context pairs to train on")

        rng = np.random.default_rng(self.seed)
        syn0 = _init_rows(rng, vocab.size, self.dim)
        syn0[:N_RESERVED] = 0.0
        syn1 = np.zeros((vocab.size, self.dim), dtype=np.float32)
        table = UnigramTable(vocab)

        lr0 = self.learning_rate
        done = 0
        for _epoch in range(self.epochs):
            for ids in encoded:
                n = len(ids)
                for t in range(n):
                    target = ids[t]
                    v = syn0[target]
                    lo, hi = max(0, t - self.window), min(n, t + self.window + 1)
                    for j in range(lo, hi):
                        if j == t:
                            continue
                        ctx = ids[j]
                        lr = lr0 * max(LR_FLOOR, 1.0 - (1.0 - LR_FLOOR) * done / total_pairs)
                        rows = np.empty(self.negatives + 1, dtype=np.intp)
                        rows[0] = ctx
                        rows[1:] = table.sample_excluding(rng, self.negatives, ctx)
                        U = syn1[rows]
                        g = expit(U @ v)
                        g[0] -= 1.0
                        coef = (lr * g).astype(np.float32)
                        np.add.at(syn1, rows, -np.outer(coef, v))
                        v -= coef @ U
                        done += 1

        self.vocab_ = vocab
        self.embeddings_ = WordEmbeddings(syn0)
        return self


class Doc2Vec(BaseEstimator):
    """Distributed-memory paragraph vectors.

    Each target token is predicted (via negative sampling) from the average
    of the sentence's doc vector and the word vectors in the surrounding
    window. Unknown tokens map to UNK rather than being dropped, so inference
    still works on fully out-of-vocabulary sentences.
    """

    def __init__(self, dim=100, window=5, negatives=5, epochs=60,
                 learning_rate=0.025, infer_epochs=60, min_count=2, seed=0):
        self.dim = dim
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.infer_epochs = infer_epochs
        self.min_count = min_count
        self.seed = seed

    def fit(self, sentences, vocab: Vocabulary | None = None):
        sents = [list(s) for s in sentences]
        if vocab is None:
            vocab = build_vocab(sents, self.min_count)
        if not sents or sum(len(s) for s in sents) == 0:
            raise ValueError("empty corpus: nothing to train on")
        encoded = [np.asarray(vocab.encode(s), dtype=np.intp) for s in sents]

        rng = np.random.default_rng(self.seed)
        word_vecs = _init_rows(rng, vocab.size, self.dim)
        word_vecs[0] = 0.0  # PAD is never an input here; UNK trains normally
        doc_vecs = _init_rows(rng, len(sents), self.dim)
        out_vecs = np.zeros((vocab.size, self.dim), dtype=np.float32)
        table = UnigramTable(vocab)

        total = sum(len(ids) for ids in encoded) * self.epochs
        done = 0
        lr0 = self.learning_rate
        for _epoch in range(self.epochs):
            for doc_id, ids in enumerate(encoded):
                done = self._train_doc(ids, doc_vecs[doc_id], word_vecs, out_vecs,
                                       table, rng, lr0, done, total, freeze_words=False)

        self.vocab_ = vocab
        self.word_vectors_ = word_vecs
        self.output_weights_ = out_vecs
        self.doc_vectors_ = doc_vecs
        self._table = table
        return self

    def infer(self, tokens, seed: int) -> np.ndarray:
        """Fit a vector for an unseen sentence with all shared weights frozen.

        An empty token list performs zero updates and returns the seeded
        noise initialization.
        """
        rng = np.random.default_rng(seed)
        dv = _init_rows(rng, 1, self.dim)[0]
        ids = np.asarray(self.vocab_.encode(tokens), dtype=np.intp)
        if len(ids) == 0:
            return dv
        table = getattr(self, "_table", None)
        if table is None:
            table = self._table = UnigramTable(self.vocab_)
        total = len(ids) * self.infer_epochs
        done = 0
        for _epoch in range(self.infer_epochs):
            done = self._train_doc(ids, dv, self.word_vectors_, self.output_weights_,
                                   table, rng, self.learning_rate, done, total,
                                   freeze_words=True)
        return dv

    def _train_doc(self, ids, doc_vec, word_vecs, out_vecs, table, rng,
                   lr0, done, total, freeze_words):
        n = len(ids)
        for t in range(n):
            target = ids[t]
            lo, hi = max(0, t - self.window), min(n, t + self.window + 1)
            ctx = np.concatenate((ids[lo:t], ids[t + 1:hi]))
            h = (doc_vec + word_vecs[ctx].sum(axis=0)) / (len(ctx) + 1)

            lr = lr0 * max(LR_FLOOR, 1.0 - (1.0 - LR_FLOOR) * done / total)
            rows = np.empty(self.negatives + 1, dtype=np.intp)
            rows[0] = target
            rows[1:] = table.sample_excluding(rng, self.negatives, target)
            U = out_vecs[rows]
            g = expit(U @ h)
            g[0] -= 1.0
            coef = (lr * g).astype(np.float32)
            share = (coef @ U) / (len(ctx) + 1)
            if not freeze_words:
                np.add.at(out_vecs, rows, -np.outer(coef, h))
                np.add.at(word_vecs, ctx, -share)
            doc_vec -= share
            done += 1
        return done


def _format_value(x) -> str:
    return np.format_float_positional(x, unique=True, trim="0")


def save_embeddings(emb: WordEmbeddings, vocab: Vocabulary, path: str) -> None:
    """Write the text embedding file: header ``V d``, then one
    ``token v1 ... vd`` line per vocabulary id, full round-trip precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("%d %d\n" % (emb.size, emb.dim))
        for i, token in enumerate(vocab.id_to_token):
            values = " ".join(_format_value(x) for x in emb.matrix[i])
            fh.write("%s %s\n" % (token, values))


def load_embeddings(path: str) -> tuple[WordEmbeddings, Vocabulary]:
    """Read an embedding file written by :func:`save_embeddings`.

    Token frequencies are not stored in the file; every loaded token gets a
    placeholder count of 1.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("%s: header must be 'V d'" % path)
        v_count, dim = int(header[0]), int(header[1])
        tokens: list[str] = []
        matrix = np.zeros((v_count, dim), dtype=np.float32)
        for row in range(v_count):
            line = fh.readline()
            if not line:
                raise ValueError("%s: row %d missing (header says %d rows)" % (path, row, v_count))
            parts = line.split()
            if len(parts) != dim + 1:
                raise ValueError(
                    "%s: row %d (token %r) has %d values, header says %d"
                    % (path, row, parts[0] if parts else "", len(parts) - 1, dim)
                )
            tokens.append(parts[0])
            matrix[row] = np.array([np.float32(p) for p in parts[1:]], dtype=np.float32)
    if tokens[:N_RESERVED] != [PAD_TOKEN, UNK_TOKEN]:
        raise ValueError("%s: first rows must be %s and %s" % (path, PAD_TOKEN, UNK_TOKEN))
    return WordEmbeddings(matrix), Vocabulary(tokens[N_RESERVED:])
