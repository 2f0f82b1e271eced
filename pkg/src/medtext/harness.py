"""End-to-end pipeline: feature dispatch for the five methods, training,
evaluation reports, single-sentence classification, and grid search.

A trained method is packaged as a ModelBundle holding the classifier plus
every artifact needed to go from raw text to a prediction (tokenizer policy,
vocabulary, embeddings / codebook / paragraph-vector model, label names), so
a single saved file is self-contained.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import DEFAULT_POLICY, Dataset, LabelMap, TokenizerPolicy, relabel, tokenize
from .embeddings import Doc2Vec, WordEmbeddings
from .encoders import BowEncoder, Codebook, MeanEmbeddingEncoder, SentenceMatrixEncoder
from .models import (CnnClassifier, SoftmaxRegression, TrainReport, parameter_count,
                     pooled_length, evaluate_accuracy)
from .modelio import (ModelFormatError, cnn_from_payload, cnn_payload,
                      logr_from_payload, logr_payload, read_container, write_container)
from .vocab import Vocabulary

METHODS = ("cnn", "doc2vec_logr", "zeromean_logr", "elimmean_logr", "bow_logr")


@dataclass
class ModelBundle:
    """A trained method plus everything needed to classify raw text."""

    method: str
    label_map: LabelMap
    policy: TokenizerPolicy
    vocab: Vocabulary
    classifier: object
    embeddings: WordEmbeddings | None = None
    codebook: Codebook | None = None
    doc_model: Doc2Vec | None = None
    max_len: int = 50
    k_soft: int = 50
    normalize: bool = True
    infer_seed: int = 0
    seed: int = 0

    def encoder(self):
        if self.method == "cnn":
            return SentenceMatrixEncoder(self.embeddings, self.vocab, self.max_len)
        if self.method == "zeromean_logr":
            return MeanEmbeddingEncoder(self.embeddings, self.vocab, mode="zero")
        if self.method == "elimmean_logr":
            return MeanEmbeddingEncoder(self.embeddings, self.vocab, mode="elim")
        if self.method == "bow_logr":
            return BowEncoder(self.codebook, self.embeddings, self.vocab,
                              k_soft=self.k_soft, normalize=self.normalize)
        raise ValueError("method %r has no stateless encoder" % self.method)

    def featurize(self, token_lists) -> np.ndarray:
        if self.method == "doc2vec_logr":
            return np.stack([self.doc_model.infer(toks, seed=self.infer_seed)
                             for toks in token_lists])
        return self.encoder().transform(token_lists)

    def featurize_dataset(self, dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
        tokens = [tokenize(ex.text, self.policy) for ex in dataset.examples]
        labels = np.array([ex.label for ex in dataset.examples], dtype=np.int64)
        return self.featurize(tokens), labels

    def config_snapshot(self) -> dict:
        snap = {"method": self.method, "seed": self.seed,
                "tokenizer_lowercase": self.policy.lowercase,
                "tokenizer_punctuation_split": self.policy.punctuation_split}
        snap.update({"model." + k: v for k, v in self.classifier.get_params().items()})
        if self.method == "cnn":
            snap["max_len"] = self.max_len
        if self.method == "bow_logr":
            snap["k_soft"] = self.k_soft
            snap["normalize"] = self.normalize
        if self.method == "doc2vec_logr":
            snap["infer_seed"] = self.infer_seed
        return snap


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def train_method(method: str, train_ds: Dataset, valid_ds: Dataset, *, seed: int,
                 embeddings: WordEmbeddings | None = None,
                 vocab: Vocabulary | None = None,
                 codebook: Codebook | None = None,
                 doc_model: Doc2Vec | None = None,
                 policy: TokenizerPolicy = DEFAULT_POLICY,
                 max_len: int = 50, k_soft: int = 50, normalize: bool = True,
                 cnn_params: dict | None = None,
                 logr_params: dict | None = None) -> tuple[ModelBundle, TrainReport]:
    """Train one method end to end over tokenized datasets.

    Prerequisite artifacts are validated before any training starts.
    """
    _require(method in METHODS, "unknown method %r (expected one of %s)" % (method, ", ".join(METHODS)))
    _require(len(train_ds) > 0 and len(valid_ds) > 0, "train and validation sets must be non-empty")
    valid_ds = relabel(valid_ds, train_ds.label_map)
    if method == "doc2vec_logr":
        _require(doc_model is not None, "method doc2vec_logr needs a trained paragraph-vector model")
        vocab = doc_model.vocab_
    else:
        _require(embeddings is not None and vocab is not None,
                 "method %s needs trained word embeddings" % method)
    if method == "bow_logr":
        _require(codebook is not None, "method bow_logr needs a fitted codebook")
        _require(codebook.dim == embeddings.dim,
                 "codebook dimension %d does not match embedding dimension %d"
                 % (codebook.dim, embeddings.dim))

    n_classes = train_ds.label_map.size
    if method == "cnn":
        params = dict(cnn_params or {})
        classifier = CnnClassifier(max_len=max_len, embed_dim=embeddings.dim,
                                   n_classes=n_classes, seed=seed, **params)
    else:
        params = dict(logr_params or {})
        classifier = SoftmaxRegression(n_classes=n_classes, seed=seed, **params)

    bundle = ModelBundle(method=method, label_map=train_ds.label_map, policy=policy,
                         vocab=vocab, classifier=classifier, embeddings=embeddings,
                         codebook=codebook, doc_model=doc_model, max_len=max_len,
                         k_soft=k_soft, normalize=normalize, infer_seed=seed, seed=seed)
    X_train, y_train = bundle.featurize_dataset(train_ds)
    X_valid, y_valid = bundle.featurize_dataset(valid_ds)
    classifier.fit(X_train, y_train, X_valid, y_valid)
    return bundle, classifier.train_report_


@dataclass
class ComparisonReport:
    """Accuracy of one or more methods on a shared validation set."""

    rows: list = field(default_factory=list)   # (method, accuracy, n_eval)
    dataset: dict = field(default_factory=dict)
    configs: dict = field(default_factory=dict)
    seed: int | None = None

    def accuracy_of(self, method: str) -> float:
        for row in self.rows:
            if row[0] == method:
                return row[1]
        raise KeyError(method)

    def to_tsv(self) -> str:
        lines = ["method\taccuracy\tn_eval"]
        for method, acc, n in self.rows:
            lines.append("%s\t%.4f\t%d" % (method, acc, n))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "methods": [{"method": m, "accuracy": a, "n_eval": n} for m, a, n in self.rows],
            "dataset": self.dataset,
            "configs": self.configs,
            "seed": self.seed,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def evaluate_bundles(bundles, valid_ds: Dataset) -> ComparisonReport:
    """Score every bundle on the same validation sequence."""
    _require(len(bundles) >= 1, "need at least one model to evaluate")
    names = bundles[0].label_map.names
    for b in bundles:
        if b.label_map.names != names:
            raise ValueError("label maps disagree across models: %r vs %r"
                             % (names, b.label_map.names))
    valid_ds = relabel(valid_ds, bundles[0].label_map)
    report = ComparisonReport(dataset=valid_ds.class_counts())
    seeds = {b.seed for b in bundles}
    report.seed = seeds.pop() if len(seeds) == 1 else None
    for b in bundles:
        X, y = b.featurize_dataset(valid_ds)
        acc = evaluate_accuracy(b.classifier, X, y)
        report.rows.append((b.method, acc, len(y)))
        report.configs[b.method] = b.config_snapshot()
    return report


def classify_text(bundle: ModelBundle, text: str):
    """Predict a label for one raw sentence.

    Returns (label_name, ranked) where ranked lists (name, probability) in
    descending probability, ties toward the lower class id.
    """
    tokens = tokenize(text, bundle.policy)
    X = bundle.featurize([tokens])
    probs = np.asarray(bundle.classifier.predict_proba(X))[0]
    pred = int(np.argmax(probs))
    order = sorted(range(len(probs)), key=lambda i: (-probs[i], i))
    ranked = [(bundle.label_map.name_of(i), float(probs[i])) for i in order]
    return bundle.label_map.name_of(pred), ranked


# -- grid search ------------------------------------------------------------

@dataclass
class GridSpec:
    """Search axes: filter counts, kernel sizes, and total conv layer depth
    (layers come in pairs, so depths must be even)."""

    filters: tuple = (64, 128, 256)
    kernels: tuple = (3, 5, 7)
    conv_layers: tuple = (2, 4, 6)

    def __post_init__(self):
        _require(len(self.filters) > 0 and len(self.kernels) > 0 and len(self.conv_layers) > 0,
                 "grid axes must be non-empty")
        for k in self.kernels:
            _require(k % 2 == 1, "kernel sizes must be odd, got %d" % k)
        for n in self.conv_layers:
            _require(n % 2 == 0 and n >= 2,
                     "conv layer counts must be positive and even, got %d" % n)

    def points(self):
        return itertools.product(sorted(self.conv_layers), sorted(self.filters),
                                 sorted(self.kernels))


@dataclass
class GridResult:
    conv_layers: int
    filters: int
    kernel: int
    accuracy: float | None = None
    n_params: int | None = None
    skipped: str | None = None

    def config_key(self):
        return (self.conv_layers, self.filters, self.kernel)


def grid_search(train_ds: Dataset, valid_ds: Dataset, embeddings: WordEmbeddings,
                vocab: Vocabulary, grid: GridSpec, *, seed: int, max_len: int = 50,
                policy: TokenizerPolicy = DEFAULT_POLICY,
                cnn_params: dict | None = None) -> list[GridResult]:
    """Train one CNN per grid point and rank by validation accuracy.

    Ranking is a total order: accuracy descending, then fewer parameters,
    then lexicographic (depth, filters, kernel). Points whose pooled sequence
    length would hit zero are skipped with a recorded reason and listed after
    the ranked rows.
    """
    base = dict(cnn_params or {})
    base.pop("conv_pairs", None)
    base.pop("filters", None)
    base.pop("kernel", None)
    pool = base.get("pool", 2)

    results: list[GridResult] = []
    for depth, filters, kernel in grid.points():
        pairs = depth // 2
        res = GridResult(conv_layers=depth, filters=filters, kernel=kernel)
        if pooled_length(max_len, pool, pairs) < 1:
            res.skipped = "pooled sequence length reaches 0 at depth %d" % depth
            results.append(res)
            continue
        bundle, _report = train_method(
            "cnn", train_ds, valid_ds, seed=seed, embeddings=embeddings, vocab=vocab,
            policy=policy, max_len=max_len,
            cnn_params={**base, "conv_pairs": pairs, "filters": filters, "kernel": kernel})
        res.accuracy = bundle.classifier.train_report_.valid_accuracy[-1]
        res.n_params = parameter_count(bundle.classifier.config())
        results.append(res)

    ranked = [r for r in results if r.skipped is None]
    skipped = [r for r in results if r.skipped is not None]
    ranked.sort(key=lambda r: (-r.accuracy, r.n_params, r.config_key()))
    skipped.sort(key=lambda r: r.config_key())
    return ranked + skipped


def grid_results_tsv(results) -> str:
    lines = ["conv_layers\tfilters\tkernel\taccuracy\tn_params\tstatus"]
    for r in results:
        if r.skipped is None:
            lines.append("%d\t%d\t%d\t%.4f\t%d\tok"
                         % (r.conv_layers, r.filters, r.kernel, r.accuracy, r.n_params))
        else:
            lines.append("%d\t%d\t%d\t\t\tskipped: %s"
                         % (r.conv_layers, r.filters, r.kernel, r.skipped))
    return "\n".join(lines) + "\n"


# -- bundle persistence -------------------------------------------------------

def save_bundle(bundle: ModelBundle, path: str) -> None:
    config = {
        "kind": "bundle",
        "method": bundle.method,
        "labels": json.dumps(list(bundle.label_map.names)),
        "tokenizer_lowercase": int(bundle.policy.lowercase),
        "tokenizer_punctuation_split": int(bundle.policy.punctuation_split),
        "vocab": json.dumps(bundle.vocab.id_to_token[2:]),
        "vocab_counts": json.dumps(bundle.vocab.counts[2:].tolist()),
        "max_len": bundle.max_len,
        "k_soft": bundle.k_soft,
        "normalize": int(bundle.normalize),
        "infer_seed": bundle.infer_seed,
        "seed": bundle.seed,
    }
    tensors = {}
    if isinstance(bundle.classifier, CnnClassifier):
        mconfig, mtensors = cnn_payload(bundle.classifier)
        config["model_kind"] = "cnn"
    else:
        mconfig, mtensors = logr_payload(bundle.classifier)
        config["model_kind"] = "logr"
    config.update({"model." + k: v for k, v in mconfig.items()})
    tensors.update({"model." + k: v for k, v in mtensors.items()})
    if bundle.embeddings is not None:
        tensors["embeddings"] = bundle.embeddings.matrix
    if bundle.codebook is not None:
        tensors["codebook"] = bundle.codebook.centers
    if bundle.doc_model is not None:
        d2v = bundle.doc_model
        config.update({"d2v." + k: repr(v) for k, v in d2v.get_params().items()})
        tensors["d2v.word_vectors"] = d2v.word_vectors_
        tensors["d2v.output_weights"] = d2v.output_weights_
    write_container(path, config, tensors)


def _doc2vec_from_payload(config: dict, tensors: dict, vocab: Vocabulary) -> Doc2Vec:
    model = Doc2Vec(
        dim=int(config["d2v.dim"]), window=int(config["d2v.window"]),
        negatives=int(config["d2v.negatives"]), epochs=int(config["d2v.epochs"]),
        learning_rate=float(config["d2v.learning_rate"]),
        infer_epochs=int(config["d2v.infer_epochs"]),
        min_count=int(config["d2v.min_count"]), seed=int(config["d2v.seed"]))
    model.vocab_ = vocab
    model.word_vectors_ = tensors["d2v.word_vectors"]
    model.output_weights_ = tensors["d2v.output_weights"]
    model.doc_vectors_ = tensors.get("d2v.doc_vectors")
    return model


def load_bundle(path: str) -> ModelBundle:
    config, tensors = read_container(path)
    if config.get("kind") != "bundle":
        raise ModelFormatError("%s: not a pipeline bundle (kind=%r)" % (path, config.get("kind")))
    try:
        model_config = {k[len("model."):]: v for k, v in config.items() if k.startswith("model.")}
        model_tensors = {k[len("model."):]: v for k, v in tensors.items() if k.startswith("model.")}
        if config["model_kind"] == "cnn":
            classifier = cnn_from_payload(model_config, model_tensors)
        else:
            classifier = logr_from_payload(model_config, model_tensors)
        vocab = Vocabulary(json.loads(config["vocab"]), json.loads(config["vocab_counts"]))
        bundle = ModelBundle(
            method=config["method"],
            label_map=LabelMap(tuple(json.loads(config["labels"]))),
            policy=TokenizerPolicy(lowercase=bool(int(config["tokenizer_lowercase"])),
                                   punctuation_split=bool(int(config["tokenizer_punctuation_split"]))),
            vocab=vocab,
            classifier=classifier,
            max_len=int(config["max_len"]),
            k_soft=int(config["k_soft"]),
            normalize=bool(int(config["normalize"])),
            infer_seed=int(config["infer_seed"]),
            seed=int(config["seed"]),
        )
        if "embeddings" in tensors:
            bundle.embeddings = WordEmbeddings(tensors["embeddings"])
        if "codebook" in tensors:
            bundle.codebook = Codebook(tensors["codebook"])
        if "d2v.word_vectors" in tensors:
            bundle.doc_model = _doc2vec_from_payload(config, tensors, vocab)
    except KeyError as exc:
        raise ModelFormatError("%s: bundle is missing entry %s" % (path, exc)) from None
    return bundle


# -- doc2vec model persistence -------------------------------------------------

def save_doc2vec(model: Doc2Vec, path: str) -> None:
    config = {"kind": "doc2vec"}
    config.update({k: repr(v) for k, v in model.get_params().items()})
    config["vocab"] = json.dumps(model.vocab_.id_to_token[2:])
    config["vocab_counts"] = json.dumps(model.vocab_.counts[2:].tolist())
    tensors = {
        "word_vectors": model.word_vectors_,
        "output_weights": model.output_weights_,
        "doc_vectors": model.doc_vectors_,
    }
    write_container(path, config, tensors)


def load_doc2vec(path: str) -> Doc2Vec:
    config, tensors = read_container(path)
    if config.get("kind") != "doc2vec":
        raise ModelFormatError("%s: not a paragraph-vector model file" % path)
    try:
        vocab = Vocabulary(json.loads(config["vocab"]), json.loads(config["vocab_counts"]))
        model = Doc2Vec(
            dim=int(config["dim"]), window=int(config["window"]),
            negatives=int(config["negatives"]), epochs=int(config["epochs"]),
            learning_rate=float(config["learning_rate"]),
            infer_epochs=int(config["infer_epochs"]),
            min_count=int(config["min_count"]), seed=int(config["seed"]))
        model.vocab_ = vocab
        model.word_vectors_ = tensors["word_vectors"]
        model.output_weights_ = tensors["output_weights"]
        model.doc_vectors_ = tensors["doc_vectors"]
    except KeyError as exc:
        raise ModelFormatError("%s: model file is missing entry %s" % (path, exc)) from None
    return model
