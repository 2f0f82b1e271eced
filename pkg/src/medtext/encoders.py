"""Feature encoders: fixed-size sentence matrices for the CNN, mean word
embeddings with two out-of-vocabulary policies, and soft-assignment
bag-of-words histograms over a k-means codebook."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, TransformerMixin

from .embeddings import WordEmbeddings
from .vocab import Vocabulary


@dataclass
class SentenceMatrix:
    """max_len x dim matrix of token vectors; rows past ``true_len`` are the
    zero PAD vector."""

    rows: np.ndarray
    true_len: int


class SentenceMatrixEncoder(TransformerMixin, BaseEstimator):
    """Stack per-token embedding rows into a fixed max_len x dim matrix.

    Sentences longer than ``max_len`` keep only their first ``max_len``
    tokens; shorter ones are padded with the zero vector. OOV tokens embed as
    the UNK zero row.
    """

    def __init__(self, embeddings: WordEmbeddings, vocab: Vocabulary, max_len: int = 50):
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        self.embeddings = embeddings
        self.vocab = vocab
        self.max_len = max_len

    def fit(self, X, y=None):
        return self

    def encode(self, tokens) -> SentenceMatrix:
        ids = self.vocab.encode(tokens)[: self.max_len]
        rows = np.zeros((self.max_len, self.embeddings.dim), dtype=np.float32)
        if ids:
            rows[: len(ids)] = self.embeddings.matrix[ids]
        return SentenceMatrix(rows=rows, true_len=len(ids))

    def transform(self, X) -> np.ndarray:
        """Encode a collection of token lists into an (N, max_len, dim) array."""
        out = np.zeros((len(X), self.max_len, self.embeddings.dim), dtype=np.float32)
        for i, tokens in enumerate(X):
            out[i] = self.encode(tokens).rows
        return out


class MeanEmbeddingEncoder(TransformerMixin, BaseEstimator):
    """Arithmetic mean of token vectors as the sentence feature.

    mode="zero": OOV tokens contribute zero vectors and still count in the
    denominator. mode="elim": OOV tokens are removed before averaging. Both
    modes return the zero vector for empty or all-OOV input.
    """

    def __init__(self, embeddings: WordEmbeddings, vocab: Vocabulary, mode: str = "zero"):
        if mode not in ("zero", "elim"):
            raise ValueError("mode must be 'zero' or 'elim', got %r" % mode)
        self.embeddings = embeddings
        self.vocab = vocab
        self.mode = mode

    def fit(self, X, y=None):
        return self

    def encode(self, tokens) -> np.ndarray:
        tokens = list(tokens)
        known = [self.vocab.token_to_id[t] for t in tokens if t in self.vocab]
        denom = len(tokens) if self.mode == "zero" else len(known)
        if denom == 0 or not known:
            return np.zeros(self.embeddings.dim, dtype=np.float32)
        return self.embeddings.matrix[known].sum(axis=0) / np.float32(denom)

    def transform(self, X) -> np.ndarray:
        return np.stack([self.encode(tokens) for tokens in X])


@dataclass
class Codebook:
    """Quantization vocabulary: K cluster centers over word-vector space."""

    centers: np.ndarray

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


class KMeansCodebook(BaseEstimator):
    """Lloyd's k-means with k-means++ seeding, fully deterministic for a
    given seed.

    Iteration stops when the largest center movement drops below ``tol`` or
    after ``max_iters`` rounds. A cluster that loses all its points is
    re-seeded to the point currently farthest from its assigned center.
    """

    def __init__(self, n_centers: int, max_iters: int = 100, tol: float = 1e-6, seed: int = 0):
        self.n_centers = n_centers
        self.max_iters = max_iters
        self.tol = tol
        self.seed = seed

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        n = X.shape[0]
        if n < self.n_centers:
            raise ValueError("need at least %d points to fit %d centers, got %d"
                             % (self.n_centers, self.n_centers, n))
        rng = np.random.default_rng(self.seed)
        centers = self._plus_plus_init(X, rng)

        inertia_path = []
        for _ in range(self.max_iters):
            d2 = cdist(X, centers, "sqeuclidean")
            labels = np.argmin(d2, axis=1)
            point_d2 = d2[np.arange(n), labels]
            inertia_path.append(float(point_d2.sum()))

            new_centers = centers.copy()
            for k in range(self.n_centers):
                mask = labels == k
                if mask.any():
                    new_centers[k] = X[mask].mean(axis=0)
            # re-seed empty clusters from the worst-fit points
            taken: set[int] = set()
            for k in range(self.n_centers):
                if not (labels == k).any():
                    order = np.argsort(-point_d2, kind="stable")
                    pick = next(int(i) for i in order if int(i) not in taken)
                    taken.add(pick)
                    new_centers[k] = X[pick]
            movement = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
            centers = new_centers
            if movement < self.tol:
                break

        d2 = cdist(X, centers, "sqeuclidean")
        self.labels_ = np.argmin(d2, axis=1)
        self.inertia_ = float(d2[np.arange(n), self.labels_].sum())
        self.inertia_path_ = inertia_path + [self.inertia_]
        self.centers_ = centers
        self.codebook_ = Codebook(centers)
        return self

    def _plus_plus_init(self, X, rng):
        n = X.shape[0]
        centers = np.empty((self.n_centers, X.shape[1]), dtype=np.float64)
        centers[0] = X[rng.integers(n)]
        closest_d2 = cdist(X, centers[:1], "sqeuclidean")[:, 0]
        for k in range(1, self.n_centers):
            total = closest_d2.sum()
            if total <= 0:
                # all points coincide with chosen centers; fall back to uniform
                centers[k] = X[rng.integers(n)]
            else:
                r = rng.random() * total
                centers[k] = X[np.searchsorted(np.cumsum(closest_d2), r)]
            closest_d2 = np.minimum(closest_d2, cdist(X, centers[k:k + 1], "sqeuclidean")[:, 0])
        return centers


def fit_codebook(vectors, n_centers: int, max_iters: int = 100, tol: float = 1e-6,
                 seed: int = 0) -> Codebook:
    """Cluster word vectors into a quantization codebook."""
    return KMeansCodebook(n_centers, max_iters=max_iters, tol=tol, seed=seed).fit(vectors).codebook_


class BowEncoder(TransformerMixin, BaseEstimator):
    """Soft-assignment bag-of-words histogram over a codebook.

    Each in-vocabulary token ranks all centers by Euclidean distance and adds
    1/R to the bin of its rank-R center, for R = 1..k_soft. Distance ties
    break toward the lower center index. OOV tokens contribute nothing.
    """

    def __init__(self, codebook: Codebook, embeddings: WordEmbeddings, vocab: Vocabulary,
                 k_soft: int = 50, normalize: bool = True):
        if k_soft < 1:
            raise ValueError("k_soft must be >= 1")
        if codebook.dim != embeddings.dim:
            raise ValueError("codebook dimension %d != embedding dimension %d"
                             % (codebook.dim, embeddings.dim))
        self.codebook = codebook
        self.embeddings = embeddings
        self.vocab = vocab
        self.k_soft = k_soft
        self.normalize = normalize

    def fit(self, X, y=None):
        return self

    def encode(self, tokens) -> np.ndarray:
        centers = np.asarray(self.codebook.centers, dtype=np.float64)
        bins = np.zeros(self.codebook.n_centers, dtype=np.float64)
        depth = min(self.k_soft, self.codebook.n_centers)
        weights = 1.0 / np.arange(1, depth + 1)
        for tok in tokens:
            if tok not in self.vocab:
                continue
            vec = self.embeddings.matrix[self.vocab.token_to_id[tok]].astype(np.float64)
            d2 = ((centers - vec) ** 2).sum(axis=1)
            order = np.argsort(d2, kind="stable")[:depth]
            bins[order] += weights
        if self.normalize:
            total = bins.sum()
            if total > 0:
                bins /= total
        return bins

    def transform(self, X) -> np.ndarray:
        return np.stack([self.encode(tokens) for tokens in X])


def save_codebook(cb: Codebook, path: str) -> None:
    """Write the codebook as text: ``K d`` header, then ``index v1 ... vd``
    rows (same layout as the embedding file, index in place of token)."""
    centers = np.asarray(cb.centers, dtype=np.float32)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("%d %d\n" % (centers.shape[0], centers.shape[1]))
        for i, row in enumerate(centers):
            values = " ".join(np.format_float_positional(x, unique=True, trim="0") for x in row)
            fh.write("%d %s\n" % (i, values))


def load_codebook(path: str) -> Codebook:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("%s: header must be 'K d'" % path)
        k, dim = int(header[0]), int(header[1])
        centers = np.zeros((k, dim), dtype=np.float32)
        for row in range(k):
            parts = fh.readline().split()
            if len(parts) != dim + 1:
                raise ValueError("%s: row %d has %d values, header says %d"
                                 % (path, row, max(len(parts) - 1, 0), dim))
            if int(parts[0]) != row:
                raise ValueError("%s: row %d carries index %s" % (path, row, parts[0]))
            centers[row] = np.array([np.float32(p) for p in parts[1:]], dtype=np.float32)
    return Codebook(centers)
