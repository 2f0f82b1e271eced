"""Command line interface.

    medtext train-embeddings --algo word2vec --seed 1 --output emb.txt corpus.tsv
    medtext fit-codebook --embeddings emb.txt --centers 1000 --seed 1 --output cb.txt
    medtext train --method cnn --train-corpus train.tsv --valid-corpus valid.tsv \
        --embeddings emb.txt --seed 1 --output model.bin --report report.json
    medtext evaluate --model model.bin --corpus valid.tsv --output results
    medtext classify --model model.bin "some sentence text"
    medtext grid-search --train-corpus train.tsv --valid-corpus valid.tsv \
        --embeddings emb.txt --seed 1 --output grid

Every flag can also be given in a ``key = value`` config file via --config;
explicit command-line flags win over file values. Exit codes: 0 success,
2 usage or input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .corpus import CorpusError, load_dataset, relabel, split, tokenize
from .embeddings import Doc2Vec, Word2Vec, load_embeddings, save_embeddings
from .encoders import KMeansCodebook, load_codebook, save_codebook
from .modelio import ModelFormatError


class UsageError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise UsageError("expected a boolean, got %r" % text)


def _parse_int_list(text: str) -> tuple:
    return tuple(int(part) for part in str(text).split(",") if part != "")


# One row per option: (flag, dest, converter, default, help). Converters also
# apply to config-file values, so strings always normalize the same way.
_COMMON_TRAIN = [
    ("--max-len", "max_len", int, 50, "sentence matrix length"),
    ("--conv-pairs", "conv_pairs", int, 2, "conv pairs (2 conv layers each)"),
    ("--filters", "filters", int, 256, "filters per conv layer"),
    ("--kernel", "kernel", int, 5, "conv kernel length (odd)"),
    ("--pool", "pool", int, 2, "max pooling window/stride"),
    ("--dropout", "dropout", float, 0.5, "dropout probability"),
    ("--fc-dim", "fc_dim", int, 128, "fully connected width"),
    ("--epochs", "epochs", int, 10, "training epochs"),
    ("--batch-size", "batch_size", int, 32, "mini-batch size"),
    ("--optimizer", "optimizer", str, "adam", "adam or sgd_momentum"),
    ("--learning-rate", "learning_rate", float, 1e-3, "optimizer learning rate"),
    ("--momentum", "momentum", float, 0.9, "sgd momentum"),
]

_LOGR = [
    ("--l2", "l2", float, 1e-4, "logistic regression L2 penalty"),
    ("--logr-learning-rate", "logr_learning_rate", float, 0.1, "logistic regression learning rate"),
    ("--logr-epochs", "logr_epochs", int, 200, "logistic regression epochs"),
    ("--logr-batch-size", "logr_batch_size", int, 64, "logistic regression batch size"),
]

COMMANDS: dict[str, dict] = {
    "train-embeddings": {
        "help": "train word or paragraph embeddings on a corpus",
        "options": [
            ("--algo", "algo", str, "word2vec", "word2vec or doc2vec"),
            ("--dim", "dim", int, 100, "embedding dimension"),
            ("--window", "window", int, 5, "context radius"),
            ("--negatives", "negatives", int, 5, "negative samples per positive"),
            ("--epochs", "epochs", int, None, "training epochs (default 5 word2vec, 60 doc2vec)"),
            ("--learning-rate", "learning_rate", float, 0.025, "initial learning rate"),
            ("--min-count", "min_count", int, 2, "minimum token frequency"),
            ("--infer-epochs", "infer_epochs", int, None, "doc2vec inference epochs (default = epochs)"),
            ("--seed", "seed", int, None, "random seed (required)"),
            ("--output", "output", str, None, "output file (required)"),
        ],
        "positional": ("corpus", "labeled corpus file (.tsv or .jsonl)"),
        "seed_required": True,
    },
    "fit-codebook": {
        "help": "cluster word vectors into a quantization codebook",
        "options": [
            ("--embeddings", "embeddings", str, None, "embedding file (required)"),
            ("--centers", "centers", int, 1000, "number of cluster centers"),
            ("--max-iters", "max_iters", int, 100, "Lloyd iteration cap"),
            ("--tol", "tol", float, 1e-6, "center movement tolerance"),
            ("--seed", "seed", int, None, "random seed (required)"),
            ("--output", "output", str, None, "output file (required)"),
        ],
        "seed_required": True,
    },
    "train": {
        "help": "train one classification method",
        "options": [
            ("--method", "method", str, None, "one of %s (required)" % ", ".join(harness.METHODS)),
            ("--train-corpus", "train_corpus", str, None, "training corpus (required)"),
            ("--valid-corpus", "valid_corpus", str, None, "validation corpus"),
            ("--valid-fraction", "valid_fraction", float, None,
             "stratified split fraction when no validation corpus is given"),
            ("--embeddings", "embeddings", str, None, "embedding file"),
            ("--codebook", "codebook", str, None, "codebook file (bow_logr)"),
            ("--doc2vec-model", "doc2vec_model", str, None, "paragraph-vector model file (doc2vec_logr)"),
            ("--k-soft", "k_soft", int, 50, "soft assignment depth (bow_logr)"),
            ("--normalize", "normalize", _parse_bool, True, "L1-normalize bow histograms"),
            ("--seed", "seed", int, None, "random seed (required)"),
            ("--output", "output", str, None, "model file to write (required)"),
            ("--report", "report", str, None,
             "training report JSON (default: <output>.report.json)"),
        ] + _COMMON_TRAIN + _LOGR,
        "seed_required": True,
    },
    "evaluate": {
        "help": "compare trained models on one validation corpus",
        "options": [
            ("--model", "models", "path_list", [], "model file (repeatable)"),
            ("--corpus", "corpus", str, None, "validation corpus (required)"),
            ("--output", "output", str, None, "report path prefix (required)"),
        ],
    },
    "classify": {
        "help": "classify a single sentence",
        "options": [
            ("--model", "model", str, None, "model file (required)"),
        ],
        "positional": ("text", "sentence to classify"),
    },
    "grid-search": {
        "help": "rank CNN configurations by validation accuracy",
        "options": [
            ("--train-corpus", "train_corpus", str, None, "training corpus (required)"),
            ("--valid-corpus", "valid_corpus", str, None, "validation corpus (required)"),
            ("--embeddings", "embeddings", str, None, "embedding file (required)"),
            ("--filters-grid", "filters_grid", _parse_int_list, (64, 128, 256), "filter counts"),
            ("--kernels-grid", "kernels_grid", _parse_int_list, (3, 5, 7), "kernel sizes"),
            ("--conv-layers-grid", "conv_layers_grid", _parse_int_list, (2, 4, 6),
             "total conv layer counts"),
            ("--seed", "seed", int, None, "random seed (required)"),
            ("--output", "output", str, None, "results path prefix (required)"),
        ] + [row for row in _COMMON_TRAIN if row[1] not in ("conv_pairs", "filters", "kernel")],
        "seed_required": True,
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medtext",
                                     description="sentence-level medical text classification")
    sub = parser.add_subparsers(dest="cmd", metavar="subcommand")
    for name, spec in COMMANDS.items():
        p = sub.add_parser(name, help=spec["help"])
        p.add_argument("--config", dest="config", default=argparse.SUPPRESS,
                       help="key = value file of defaults for any flag")
        for flag, dest, conv, _default, help_text in spec["options"]:
            if conv == "path_list":
                p.add_argument(flag, dest=dest, action="append",
                               default=argparse.SUPPRESS, help=help_text)
            else:
                p.add_argument(flag, dest=dest, type=conv,
                               default=argparse.SUPPRESS, help=help_text)
        if "positional" in spec:
            arg, help_text = spec["positional"]
            p.add_argument(arg, help=help_text)
    return parser


def _read_config_file(path: str, spec: dict) -> dict:
    by_key = {}
    for flag, dest, conv, _default, _help in spec["options"]:
        by_key[flag.lstrip("-")] = (dest, conv)
        by_key[dest] = (dest, conv)
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError("%s:%d: expected 'key = value'" % (path, lineno))
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in by_key:
                raise UsageError("%s:%d: unknown option %r" % (path, lineno, key))
            dest, conv = by_key[key]
            if conv == "path_list":
                values[dest] = [p.strip() for p in value.split(",") if p.strip()]
            else:
                values[dest] = conv(value)
    return values


def _merge_options(cmd: str, cli_values: dict) -> dict:
    spec = COMMANDS[cmd]
    merged = {dest: default for _flag, dest, _conv, default, _help in spec["options"]}
    config_path = cli_values.pop("config", None)
    positional = spec.get("positional")
    if positional:
        merged[positional[0]] = cli_values.pop(positional[0])
    if config_path:
        merged.update(_read_config_file(config_path, spec))
    merged.update(cli_values)
    if spec.get("seed_required") and merged.get("seed") is None:
        raise UsageError("%s: --seed is required" % cmd)
    return merged


def _require_opt(opts: dict, name: str, flag: str):
    if opts.get(name) in (None, []):
        raise UsageError("missing required option %s" % flag)
    return opts[name]


def _write_manifest(output: str, command: str, opts: dict) -> None:
    manifest = {"command": command,
                "config": {k: v for k, v in sorted(opts.items())},
                "seed": opts.get("seed")}
    with open(output + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")


def _load_corpus_tokens(path: str):
    ds = load_dataset(path)
    return [tokenize(ex.text) for ex in ds.examples]


def _cmd_train_embeddings(opts: dict) -> int:
    corpus = _require_opt(opts, "corpus", "corpus")
    output = _require_opt(opts, "output", "--output")
    algo = opts["algo"]
    sentences = _load_corpus_tokens(corpus)
    common = dict(dim=opts["dim"], window=opts["window"], negatives=opts["negatives"],
                  learning_rate=opts["learning_rate"], min_count=opts["min_count"],
                  seed=opts["seed"])
    if algo == "word2vec":
        model = Word2Vec(epochs=opts["epochs"] if opts["epochs"] is not None else 5, **common)
        model.fit(sentences)
        save_embeddings(model.embeddings_, model.vocab_, output)
    elif algo == "doc2vec":
        epochs = opts["epochs"] if opts["epochs"] is not None else 60
        infer_epochs = opts["infer_epochs"] if opts["infer_epochs"] is not None else epochs
        model = Doc2Vec(epochs=epochs, infer_epochs=infer_epochs, **common)
        model.fit(sentences)
        harness.save_doc2vec(model, output)
    else:
        raise UsageError("unknown --algo %r (use word2vec or doc2vec)" % algo)
    _write_manifest(output, "train-embeddings", opts)
    print("wrote %s" % output)
    return 0


def _cmd_fit_codebook(opts: dict) -> int:
    emb_path = _require_opt(opts, "embeddings", "--embeddings")
    output = _require_opt(opts, "output", "--output")
    emb, _vocab = load_embeddings(emb_path)
    km = KMeansCodebook(opts["centers"], max_iters=opts["max_iters"],
                        tol=opts["tol"], seed=opts["seed"])
    km.fit(emb.matrix[2:])  # cluster real-token vectors only
    save_codebook(km.codebook_, output)
    _write_manifest(output, "fit-codebook", opts)
    print("wrote %s (inertia %.6g)" % (output, km.inertia_))
    return 0


def _split_datasets(opts: dict):
    train_path = _require_opt(opts, "train_corpus", "--train-corpus")
    train_ds = load_dataset(train_path)
    if opts.get("valid_corpus"):
        valid_ds = relabel(load_dataset(opts["valid_corpus"]), train_ds.label_map)
    elif opts.get("valid_fraction"):
        train_ds, valid_ds = split(train_ds, opts["valid_fraction"], opts["seed"])
    else:
        raise UsageError("need --valid-corpus or --valid-fraction")
    return train_ds, valid_ds


def _cmd_train(opts: dict) -> int:
    method = _require_opt(opts, "method", "--method")
    output = _require_opt(opts, "output", "--output")
    train_ds, valid_ds = _split_datasets(opts)

    embeddings = vocab = codebook = doc_model = None
    if method == "doc2vec_logr":
        doc_model = harness.load_doc2vec(_require_opt(opts, "doc2vec_model", "--doc2vec-model"))
    else:
        embeddings, vocab = load_embeddings(_require_opt(opts, "embeddings", "--embeddings"))
    if method == "bow_logr":
        codebook = load_codebook(_require_opt(opts, "codebook", "--codebook"))

    cnn_params = dict(conv_pairs=opts["conv_pairs"], filters=opts["filters"],
                      kernel=opts["kernel"], pool=opts["pool"], dropout=opts["dropout"],
                      fc_dim=opts["fc_dim"], epochs=opts["epochs"],
                      batch_size=opts["batch_size"], optimizer=opts["optimizer"],
                      learning_rate=opts["learning_rate"], momentum=opts["momentum"])
    logr_params = dict(l2=opts["l2"], learning_rate=opts["logr_learning_rate"],
                       epochs=opts["logr_epochs"], batch_size=opts["logr_batch_size"])

    bundle, report = harness.train_method(
        method, train_ds, valid_ds, seed=opts["seed"], embeddings=embeddings,
        vocab=vocab, codebook=codebook, doc_model=doc_model, max_len=opts["max_len"],
        k_soft=opts["k_soft"], normalize=opts["normalize"],
        cnn_params=cnn_params, logr_params=logr_params)
    harness.save_bundle(bundle, output)

    report_path = opts.get("report") or output + ".report.json"
    doc = {"method": method, "seed": opts["seed"],
           "config": bundle.config_snapshot(),
           "epochs": {"train_loss": report.train_loss,
                      "valid_accuracy": report.valid_accuracy},
           "timing": {"wall_seconds": report.wall_seconds}}
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")
    final_acc = report.valid_accuracy[-1] if report.valid_accuracy else float("nan")
    print("wrote %s (validation accuracy %.4f)" % (output, final_acc))
    return 0


def _cmd_evaluate(opts: dict) -> int:
    model_paths = _require_opt(opts, "models", "--model")
    corpus = _require_opt(opts, "corpus", "--corpus")
    output = _require_opt(opts, "output", "--output")
    bundles = [harness.load_bundle(p) for p in model_paths]
    valid_ds = load_dataset(corpus)
    report = harness.evaluate_bundles(bundles, valid_ds)
    with open(output + ".tsv", "w", encoding="utf-8") as fh:
        fh.write(report.to_tsv())
    with open(output + ".json", "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    sys.stdout.write(report.to_tsv())
    return 0


def _cmd_classify(opts: dict) -> int:
    model_path = _require_opt(opts, "model", "--model")
    bundle = harness.load_bundle(model_path)
    label, ranked = harness.classify_text(bundle, opts["text"])
    print("prediction\t%s" % label)
    for name, prob in ranked:
        print("%s\t%.6f" % (name, prob))
    return 0


def _cmd_grid_search(opts: dict) -> int:
    output = _require_opt(opts, "output", "--output")
    emb_path = _require_opt(opts, "embeddings", "--embeddings")
    valid_path = _require_opt(opts, "valid_corpus", "--valid-corpus")
    opts["valid_corpus"] = valid_path
    train_ds, valid_ds = _split_datasets(opts)
    embeddings, vocab = load_embeddings(emb_path)
    grid = harness.GridSpec(filters=opts["filters_grid"], kernels=opts["kernels_grid"],
                            conv_layers=opts["conv_layers_grid"])
    cnn_params = dict(pool=opts["pool"], dropout=opts["dropout"], fc_dim=opts["fc_dim"],
                      epochs=opts["epochs"], batch_size=opts["batch_size"],
                      optimizer=opts["optimizer"], learning_rate=opts["learning_rate"],
                      momentum=opts["momentum"])
    results = harness.grid_search(train_ds, valid_ds, embeddings, vocab, grid,
                                  seed=opts["seed"], max_len=opts["max_len"],
                                  cnn_params=cnn_params)
    with open(output + ".tsv", "w", encoding="utf-8") as fh:
        fh.write(harness.grid_results_tsv(results))
    best = next((r for r in results if r.skipped is None), None)
    if best is None:
        raise UsageError("every grid point was infeasible")
    best_doc = {"conv_layers": best.conv_layers, "filters": best.filters,
                "kernel": best.kernel, "accuracy": best.accuracy,
                "n_params": best.n_params, "seed": opts["seed"],
                "config": {k: v for k, v in sorted(cnn_params.items())}}
    with open(output + ".best.json", "w", encoding="utf-8") as fh:
        json.dump(best_doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_manifest(output, "grid-search", opts)
    print("best: conv_layers=%d filters=%d kernel=%d accuracy=%.4f"
          % (best.conv_layers, best.filters, best.kernel, best.accuracy))
    return 0


_HANDLERS = {
    "train-embeddings": _cmd_train_embeddings,
    "fit-codebook": _cmd_fit_codebook,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "classify": _cmd_classify,
    "grid-search": _cmd_grid_search,
}


def run(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.cmd is None:
        parser.print_help()
        return 2
    opts = _merge_options(args.cmd, {k: v for k, v in vars(args).items() if k != "cmd"})
    return _HANDLERS[args.cmd](opts)


def main(argv=None) -> int:
    try:
        return run(argv)
    except (UsageError, CorpusError, ModelFormatError, ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except Exception as exc:  # internal invariant violations
        print("internal error: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
