"""Corpus ingestion: tokenization, labeled datasets, balanced sampling, splits.

Input sentences are assumed to be pre-split; no sentence boundary detection
happens here. Stop-words are always kept and nothing is ever stemmed.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass

import numpy as np


class CorpusError(ValueError):
    """Raised for malformed corpus files or unsatisfiable sampling requests."""


@dataclass(frozen=True)
class TokenizerPolicy:
    lowercase: bool = True
    punctuation_split: bool = True


DEFAULT_POLICY = TokenizerPolicy()


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _detach_punct(chunk: str) -> list[str]:
    # Peel leading/trailing punctuation into standalone tokens; interior
    # punctuation (hyphens, apostrophes) stays attached.
    lead = []
    while chunk and _is_punct(chunk[0]):
        lead.append(chunk[0])
        chunk = chunk[1:]
    trail = []
    while chunk and _is_punct(chunk[-1]):
        trail.append(chunk[-1])
        chunk = chunk[:-1]
    return lead + ([chunk] if chunk else []) + trail[::-1]


def tokenize(text: str, policy: TokenizerPolicy = DEFAULT_POLICY) -> list[str]:
    """Split ``text`` into tokens: whitespace split, optional lowercasing,
    optional detaching of leading/trailing punctuation.

    No token is ever dropped; joining the tokens back together (ignoring
    whitespace) reproduces the case-folded input.
    """
    tokens: list[str] = []
    for chunk in text.split():
        if policy.lowercase:
            chunk = chunk.lower()
        if policy.punctuation_split:
            tokens.extend(_detach_punct(chunk))
        else:
            tokens.append(chunk)
    return tokens


@dataclass(frozen=True)
class LabelMap:
    """Ordered category names; ids are list positions."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise CorpusError("duplicate label names: %r" % (self.names,))

    @property
    def size(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise CorpusError("unknown label %r" % name) from None

    def name_of(self, label_id: int) -> str:
        return self.names[label_id]


@dataclass(frozen=True)
class LabeledExample:
    text: str
    label: int


@dataclass(frozen=True)
class Dataset:
    examples: tuple[LabeledExample, ...]
    label_map: LabelMap

    def __post_init__(self):
        for ex in self.examples:
            if not 0 <= ex.label < self.label_map.size:
                raise CorpusError(
                    "label id %d out of range for %d classes" % (ex.label, self.label_map.size)
                )

    def __len__(self) -> int:
        return len(self.examples)

    def class_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in self.label_map.names}
        for ex in self.examples:
            counts[self.label_map.name_of(ex.label)] += 1
        return counts

    def by_class(self) -> dict[int, list[int]]:
        groups: dict[int, list[int]] = {c: [] for c in range(self.label_map.size)}
        for i, ex in enumerate(self.examples):
            groups[ex.label].append(i)
        return groups

    def subset(self, indices) -> "Dataset":
        return Dataset(tuple(self.examples[i] for i in indices), self.label_map)


def _records_from_tsv(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise CorpusError("%s:%d: expected label<TAB>text" % (path, lineno))
            label, text = line.split("\t", 1)
            yield label, text


def _records_from_jsonl(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError("%s:%d: invalid JSON (%s)" % (path, lineno, exc)) from None
            if not isinstance(obj, dict) or not isinstance(obj.get("text"), str) \
                    or not isinstance(obj.get("label"), str):
                raise CorpusError(
                    '%s:%d: record must be an object with string "text" and "label"'
                    % (path, lineno)
                )
            yield obj["label"], obj["text"]


def load_dataset(path: str, format: str | None = None) -> Dataset:
    """Load a labeled corpus from TSV (``label<TAB>text``) or JSONL.

    Label ids are assigned in first-appearance order. ``format`` defaults to
    the file extension (.tsv / .jsonl).
    """
    if format is None:
        if path.endswith(".tsv"):
            format = "tsv"
        elif path.endswith(".jsonl"):
            format = "jsonl"
        else:
            raise CorpusError("cannot infer format of %r; pass format='tsv' or 'jsonl'" % path)
    if format == "tsv":
        records = _records_from_tsv(path)
    elif format == "jsonl":
        records = _records_from_jsonl(path)
    else:
        raise CorpusError("unknown corpus format %r" % format)

    names: list[str] = []
    ids: dict[str, int] = {}
    examples = []
    for label, text in records:
        if label not in ids:
            ids[label] = len(names)
            names.append(label)
        examples.append(LabeledExample(text=text, label=ids[label]))
    return Dataset(tuple(examples), LabelMap(tuple(names)))


def relabel(d: Dataset, label_map: LabelMap) -> Dataset:
    """Remap example ids onto ``label_map`` by label name.

    Corpora loaded from different files can list the same categories in a
    different first-appearance order; this aligns one onto the other. Raises
    if ``d`` uses a name the target map lacks.
    """
    if d.label_map.names == label_map.names:
        return d
    mapping = [label_map.id_of(name) for name in d.label_map.names]
    examples = tuple(LabeledExample(ex.text, mapping[ex.label]) for ex in d.examples)
    return Dataset(examples, label_map)


def balanced_sample(d: Dataset, n_per_class: int, seed: int) -> Dataset:
    """Sample exactly ``n_per_class`` examples of every class, without
    replacement, deterministically for a given seed."""
    if n_per_class <= 0:
        raise CorpusError("n_per_class must be positive")
    rng = np.random.default_rng(seed)
    picked: list[int] = []
    for label, indices in sorted(d.by_class().items()):
        if len(indices) < n_per_class:
            raise CorpusError(
                "class %r has %d examples, need %d"
                % (d.label_map.name_of(label), len(indices), n_per_class)
            )
        chosen = rng.choice(len(indices), size=n_per_class, replace=False)
        picked.extend(indices[i] for i in chosen)
    return d.subset(picked)


def split(d: Dataset, valid_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/validation split.

    Each class contributes round(valid_fraction * class_count) examples to the
    validation side. The two sides partition ``d`` exactly.
    """
    if not 0.0 < valid_fraction < 1.0:
        raise CorpusError("valid_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    valid_idx: list[int] = []
    train_idx: list[int] = []
    for label, indices in sorted(d.by_class().items()):
        n_valid = round(valid_fraction * len(indices))
        if n_valid == 0 or n_valid == len(indices):
            raise CorpusError(
                "fraction %g leaves an empty side for class %r (%d examples)"
                % (valid_fraction, d.label_map.name_of(label), len(indices))
            )
        chosen = set(rng.choice(len(indices), size=n_valid, replace=False).tolist())
        for i, idx in enumerate(indices):
            (valid_idx if i in chosen else train_idx).append(idx)
    return d.subset(sorted(train_idx)), d.subset(sorted(valid_idx))
