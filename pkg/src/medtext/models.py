"""Classifier assembly and training.

CnnClassifier stacks [conv -> relu -> conv -> relu -> maxpool] blocks over a
sentence matrix, then dropout / dense / relu / dropout / dense / softmax.
SoftmaxRegression is the multinomial logistic regression used by all the
shallow baselines. Both train mini-batch with a per-epoch seeded shuffle and
are bit-deterministic for a fixed seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import neural


@dataclass
class TrainReport:
    """Per-epoch training trace. ``valid_accuracy`` stays empty when no
    validation split was supplied."""

    train_loss: list = field(default_factory=list)
    valid_accuracy: list = field(default_factory=list)
    wall_seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def pooled_length(max_len: int, pool: int, conv_pairs: int) -> int:
    """Sequence length left after every conv pair's pooling (floor rule)."""
    length = max_len
    for _ in range(conv_pairs):
        length //= pool
    return length


@dataclass
class CnnConfig:
    max_len: int = 50
    embed_dim: int = 100
    conv_pairs: int = 2
    filters: int = 256
    kernel: int = 5
    pool: int = 2
    dropout: float = 0.5
    fc_dim: int = 128
    n_classes: int = 26
    epochs: int = 10
    batch_size: int = 32
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.conv_pairs < 1:
            raise ValueError("conv_pairs must be >= 1")
        if self.kernel % 2 == 0:
            raise ValueError("kernel must be odd")
        if pooled_length(self.max_len, self.pool, self.conv_pairs) < 1:
            raise ValueError(
                "max_len %d pools to zero length with %d conv pairs"
                % (self.max_len, self.conv_pairs))
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


def parameter_count(cfg: CnnConfig) -> int:
    """Closed-form scalar parameter count for a configuration."""
    total = 0
    c_in = cfg.embed_dim
    for _ in range(cfg.conv_pairs):
        total += cfg.filters * cfg.kernel * c_in + cfg.filters
        total += cfg.filters * cfg.kernel * cfg.filters + cfg.filters
        c_in = cfg.filters
    flat = pooled_length(cfg.max_len, cfg.pool, cfg.conv_pairs) * cfg.filters
    total += cfg.fc_dim * flat + cfg.fc_dim
    total += cfg.n_classes * cfg.fc_dim + cfg.n_classes
    return total


class CnnClassifier(ClassifierMixin, BaseEstimator):
    """Sentence CNN over pre-encoded (n, max_len, embed_dim) matrices.

    The embedding lookup happens upstream (see encoders); the word vectors
    are never touched by training. ``dtype`` exists so verification code can
    run the whole network in float64.
    """

    def __init__(self, max_len=50, embed_dim=100, conv_pairs=2, filters=256,
                 kernel=5, pool=2, dropout=0.5, fc_dim=128, n_classes=26,
                 epochs=10, batch_size=32, optimizer="adam", learning_rate=1e-3,
                 momentum=0.9, seed=0, dtype="float32"):
        self.max_len = max_len
        self.embed_dim = embed_dim
        self.conv_pairs = conv_pairs
        self.filters = filters
        self.kernel = kernel
        self.pool = pool
        self.dropout = dropout
        self.fc_dim = fc_dim
        self.n_classes = n_classes
        self.epochs = epochs
        self.batch_size = batch_size
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.seed = seed
        self.dtype = dtype

    def config(self) -> CnnConfig:
        return CnnConfig(
            max_len=self.max_len, embed_dim=self.embed_dim, conv_pairs=self.conv_pairs,
            filters=self.filters, kernel=self.kernel, pool=self.pool,
            dropout=self.dropout, fc_dim=self.fc_dim, n_classes=self.n_classes,
            epochs=self.epochs, batch_size=self.batch_size, optimizer=self.optimizer,
            learning_rate=self.learning_rate, momentum=self.momentum, seed=self.seed)

    # -- construction -----------------------------------------------------

    def build(self) -> "CnnClassifier":
        """Initialize layers from the configuration without training."""
        cfg = self.config()
        seeds = np.random.SeedSequence(cfg.seed).spawn(3)
        init_rng = np.random.default_rng(seeds[0])
        self._shuffle_rng = np.random.default_rng(seeds[1])
        drop_rng = np.random.default_rng(seeds[2])
        dt = np.dtype(self.dtype).type

        layers = []
        c_in = cfg.embed_dim
        for _ in range(cfg.conv_pairs):
            layers.append(neural.Conv1D(c_in, cfg.filters, cfg.kernel, init_rng, dtype=dt))
            layers.append(neural.ReLU())
            layers.append(neural.Conv1D(cfg.filters, cfg.filters, cfg.kernel, init_rng, dtype=dt))
            layers.append(neural.ReLU())
            layers.append(neural.MaxPool1D(cfg.pool, cfg.pool))
            c_in = cfg.filters
        layers.append(neural.Flatten())
        layers.append(neural.Dropout(cfg.dropout, drop_rng))
        flat = pooled_length(cfg.max_len, cfg.pool, cfg.conv_pairs) * cfg.filters
        layers.append(neural.Dense(flat, cfg.fc_dim, init_rng, dtype=dt))
        layers.append(neural.ReLU())
        layers.append(neural.Dropout(cfg.dropout, drop_rng))
        layers.append(neural.Dense(cfg.fc_dim, cfg.n_classes, init_rng, dtype=dt))
        self.layers_ = layers
        return self

    def parameters(self) -> list:
        return [p for layer in self.layers_ for p in layer.params]

    def gradients(self) -> list:
        return [g for layer in self.layers_ for g in layer.grads]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def dropout_layers(self) -> list:
        return [l for l in self.layers_ if isinstance(l, neural.Dropout)]

    # -- forward / backward ------------------------------------------------

    def forward(self, X, train=False) -> np.ndarray:
        """Logits for a batch (n, max_len, embed_dim)."""
        h = np.asarray(X)
        if h.ndim != 3 or h.shape[1] != self.max_len or h.shape[2] != self.embed_dim:
            raise ValueError("expected (n, %d, %d) input, got %r"
                             % (self.max_len, self.embed_dim, h.shape))
        for layer in self.layers_:
            h = layer.forward(h, train=train)
        return h

    def backward(self, grad_logits) -> None:
        g = grad_logits
        for layer in reversed(self.layers_):
            g = layer.backward(g)

    def loss_and_grads(self, X, y, train=True):
        """One forward/backward pass; returns (loss, params, grads)."""
        logits = self.forward(X, train=train)
        loss, dlogits = neural.softmax_cross_entropy(logits, y)
        self.backward(dlogits)
        return loss, self.parameters(), self.gradients()

    # -- training / inference ----------------------------------------------

    def fit(self, X, y, X_valid=None, y_valid=None):
        X = np.asarray(X)
        y = np.asarray(y)
        if len(X) == 0:
            raise ValueError("training set is empty")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError("labels span %d..%d but the model has %d classes"
                             % (y.min(), y.max(), self.n_classes))
        self.build()
        opt = neural.make_optimizer(self.optimizer, self.learning_rate, self.momentum)
        report = TrainReport()
        start = time.perf_counter()
        n = len(X)
        for _epoch in range(self.epochs):
            order = self._shuffle_rng.permutation(n)
            epoch_loss = 0.0
            for lo in range(0, n, self.batch_size):
                batch = order[lo:lo + self.batch_size]
                loss, params, grads = self.loss_and_grads(X[batch], y[batch], train=True)
                opt.step(params, grads)
                epoch_loss += loss * len(batch)
            report.train_loss.append(epoch_loss / n)
            if X_valid is not None:
                report.valid_accuracy.append(evaluate_accuracy(self, X_valid, y_valid))
        report.wall_seconds = time.perf_counter() - start
        self.train_report_ = report
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X)
        single = X.ndim == 2
        if single:
            X = X[None]
        probs = neural.softmax(self.forward(X, train=False))
        return probs[0] if single else probs

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=-1)


def softmax_regression_loss(weights, bias, X, y, l2: float):
    """Loss and analytic gradients of L2-regularized multinomial logistic
    regression. Dtype follows ``weights`` so finite-difference verification
    can run in float64. The penalty applies to the weights only."""
    logits = X @ weights.T + bias
    p = neural.softmax(logits)
    n = len(X)
    idx = np.arange(n)
    loss = float(-np.log(p[idx, y]).mean()) + 0.5 * l2 * float((weights.astype(np.float64) ** 2).sum())
    g = p
    g[idx, y] -= 1.0
    g /= n
    grad_w = (g.T @ X + l2 * weights).astype(weights.dtype)
    grad_b = g.sum(axis=0).astype(bias.dtype)
    return loss, grad_w, grad_b


class SoftmaxRegression(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression trained by mini-batch gradient
    descent on softmax cross-entropy plus an L2 weight penalty."""

    def __init__(self, n_classes=None, l2=1e-4, learning_rate=0.1, epochs=200,
                 batch_size=64, seed=0):
        self.n_classes = n_classes
        self.l2 = l2
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y, X_valid=None, y_valid=None):
        X = np.asarray(X, dtype=np.float32)
        y = np.asarray(y)
        if X.ndim != 2 or len(X) == 0:
            raise ValueError("expected a non-empty (n, features) matrix, got %r" % (X.shape,))
        n_classes = self.n_classes if self.n_classes is not None else int(y.max()) + 1
        if y.min() < 0 or y.max() >= n_classes:
            raise ValueError("labels out of range for %d classes" % n_classes)
        rng = np.random.default_rng(self.seed)
        self.weights_ = np.zeros((n_classes, X.shape[1]), dtype=np.float32)
        self.bias_ = np.zeros(n_classes, dtype=np.float32)
        self.n_classes_ = n_classes

        report = TrainReport()
        start = time.perf_counter()
        n = len(X)
        for _epoch in range(self.epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for lo in range(0, n, self.batch_size):
                batch = order[lo:lo + self.batch_size]
                loss, gw, gb = softmax_regression_loss(
                    self.weights_, self.bias_, X[batch], y[batch], self.l2)
                self.weights_ -= np.float32(self.learning_rate) * gw
                self.bias_ -= np.float32(self.learning_rate) * gb
                epoch_loss += loss * len(batch)
            report.train_loss.append(epoch_loss / n)
            if X_valid is not None:
                report.valid_accuracy.append(evaluate_accuracy(self, X_valid, y_valid))
        report.wall_seconds = time.perf_counter() - start
        self.train_report_ = report
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float32)
        single = X.ndim == 1
        if single:
            X = X[None]
        probs = neural.softmax(X @ self.weights_.T + self.bias_)
        return probs[0] if single else probs

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=-1)


def predict_class(probabilities) -> int:
    """Argmax with ties broken toward the lowest class id."""
    return int(np.argmax(np.asarray(probabilities)))


def evaluate_accuracy(model, X, y) -> float:
    """Fraction of examples whose predicted class matches the label."""
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return float(np.mean(model.predict(X) == y))
