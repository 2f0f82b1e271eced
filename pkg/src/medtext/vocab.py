"""Token vocabulary with reserved padding/unknown ids, plus the power-law
noise sampler used by negative-sampling training."""

from __future__ import annotations

from collections import Counter

import numpy as np

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<PAD>"
UNK_TOKEN = "<UNK>"
N_RESERVED = 2


class Vocabulary:
    """Dense token<->id map. Ids 0 and 1 are reserved for PAD and UNK.

    ``counts[i]`` is the corpus frequency of token i (0 for the reserved ids).
    """

    def __init__(self, tokens: list[str], counts=None):
        self.id_to_token = [PAD_TOKEN, UNK_TOKEN] + list(tokens)
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")
        if counts is None:
            counts = [1] * len(tokens)
        self.counts = np.zeros(len(self.id_to_token), dtype=np.int64)
        self.counts[N_RESERVED:] = np.asarray(counts, dtype=np.int64)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __len__(self) -> int:
        return self.size

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id and self.token_to_id[token] >= N_RESERVED

    def lookup(self, token: str) -> int:
        """Id of ``token``, or UNK_ID when out of vocabulary."""
        i = self.token_to_id.get(token, UNK_ID)
        return i if i >= N_RESERVED else UNK_ID

    def encode(self, tokens) -> list[int]:
        return [self.lookup(t) for t in tokens]

    def encode_known(self, tokens) -> list[int]:
        """Ids of the in-vocabulary tokens only; OOV tokens are dropped."""
        return [self.token_to_id[t] for t in tokens if t in self]


def build_vocab(sentences, min_count: int = 1) -> Vocabulary:
    """Build a vocabulary of tokens with frequency >= ``min_count``.

    Tokens are assigned ids in first-appearance order. An empty corpus yields
    a vocabulary of just PAD and UNK.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    order: list[str] = []
    for sent in sentences:
        for tok in sent:
            if tok not in counts:
                order.append(tok)
            counts[tok] += 1
    kept = [t for t in order if counts[t] >= min_count]
    return Vocabulary(kept, [counts[t] for t in kept])


class UnigramTable:
    """Sampler over real token ids with probability proportional to
    count**power (0.75 by default, flattening the frequency head)."""

    def __init__(self, vocab: Vocabulary, power: float = 0.75):
        weights = vocab.counts[N_RESERVED:].astype(np.float64) ** power
        total = weights.sum()
        if total <= 0:
            raise ValueError("cannot build a noise table over an empty vocabulary")
        self.probs = weights / total
        self._cumulative = np.cumsum(self.probs)
        self._cumulative[-1] = 1.0  # guard against rounding at the top end

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` token ids (>= N_RESERVED)."""
        u = rng.random(n)
        return np.searchsorted(self._cumulative, u, side="right") + N_RESERVED

    def sample_excluding(self, rng: np.random.Generator, n: int, forbidden: int) -> np.ndarray:
        """Draw ``n`` ids, redrawing any that collide with ``forbidden``."""
        ids = self.sample(rng, n)
        while True:
            bad = ids == forbidden
            if not bad.any():
                return ids
            ids[bad] = self.sample(rng, int(bad.sum()))
