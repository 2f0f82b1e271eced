"""Sentence-level medical text classification toolkit.

A CNN classifier over word-embedding sentence matrices, plus three shallow
baselines (inferred paragraph vectors, mean word embeddings, soft-assignment
bag-of-words histograms), all feeding either the CNN or a multinomial
logistic regression. Everything trains deterministically from a seed.
"""

from .corpus import (CorpusError, Dataset, LabeledExample, LabelMap, TokenizerPolicy,
                     balanced_sample, load_dataset, relabel, split, tokenize)
from .embeddings import (Doc2Vec, Word2Vec, WordEmbeddings, load_embeddings,
                         save_embeddings, sgns_loss_and_grads)
from .encoders import (BowEncoder, Codebook, KMeansCodebook, MeanEmbeddingEncoder,
                       SentenceMatrixEncoder, fit_codebook, load_codebook, save_codebook)
from .harness import (METHODS, ComparisonReport, GridSpec, ModelBundle, classify_text,
                      evaluate_bundles, grid_search, load_bundle, save_bundle, train_method)
from .models import (CnnClassifier, CnnConfig, SoftmaxRegression, TrainReport,
                     evaluate_accuracy, parameter_count)
from .modelio import ModelFormatError, load_model, save_model
from .vocab import PAD_ID, UNK_ID, UnigramTable, Vocabulary, build_vocab

__version__ = "0.1.0"

__all__ = [
    "BowEncoder", "Codebook", "CnnClassifier", "CnnConfig", "ComparisonReport",
    "CorpusError", "Dataset", "Doc2Vec", "GridSpec", "KMeansCodebook",
    "LabelMap", "LabeledExample", "METHODS", "MeanEmbeddingEncoder",
    "ModelBundle", "ModelFormatError", "PAD_ID", "SentenceMatrixEncoder",
    "SoftmaxRegression", "TokenizerPolicy", "TrainReport", "UNK_ID",
    "UnigramTable", "Vocabulary", "Word2Vec", "WordEmbeddings",
    "balanced_sample", "build_vocab", "classify_text", "evaluate_accuracy",
    "evaluate_bundles", "fit_codebook", "grid_search", "load_bundle",
    "load_codebook", "load_dataset", "load_embeddings", "load_model",
    "parameter_count", "relabel", "save_bundle", "save_codebook",
    "save_embeddings", "save_model", "sgns_loss_and_grads", "split",
    "tokenize", "train_method",
]
