"""Differentiable kernels for the sentence CNN.

Same-padded 1D convolution over the token axis, max pooling, inverted
dropout, dense layers, stabilized softmax cross-entropy, two optimizers, and
a central-difference gradient checker. Every layer caches what its backward
pass needs; calling backward before forward raises.

Parameters default to float32; pass dtype=np.float64 when building a network
for gradient verification.
"""

from __future__ import annotations

import numpy as np


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int,
                   dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return ((rng.random(shape) * 2.0 - 1.0) * limit).astype(dtype)


class Conv1D:
    """Same-padded 1D convolution along the sequence axis.

    out[b, t, o] = bias[o] + sum_{j,c} weights[o, j, c] * x_pad[b, t+j-(k-1)/2, c]
    with zero padding outside the sequence. Kernel length must be odd so the
    padding is symmetric and the output length equals the input length.
    """

    def __init__(self, in_channels, out_channels, kernel_size, rng, dtype=np.float32):
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd, got %d" % kernel_size)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        fan_in = in_channels * kernel_size
        fan_out = out_channels * kernel_size
        self.weights = glorot_uniform(rng, (out_channels, kernel_size, in_channels),
                                      fan_in, fan_out, dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self._cols = None

    @property
    def params(self):
        return [self.weights, self.bias]

    @property
    def grads(self):
        return [self.grad_weights, self.grad_bias]

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ValueError("expected (batch, length, %d) input, got %r"
                             % (self.in_channels, x.shape))
        k = self.kernel_size
        pad = (k - 1) // 2
        xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
        win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)  # (B, L, C_in, k)
        cols = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(
            x.shape[0], x.shape[1], k * self.in_channels)
        self._cols = cols
        wmat = self.weights.reshape(self.out_channels, -1)
        return cols @ wmat.T + self.bias

    def backward(self, grad_out):
        if self._cols is None:
            raise RuntimeError("backward called before forward")
        B, L, _ = grad_out.shape
        k = self.kernel_size
        pad = (k - 1) // 2
        gmat = grad_out.reshape(-1, self.out_channels)
        colsmat = self._cols.reshape(-1, k * self.in_channels)
        self.grad_bias = grad_out.sum(axis=(0, 1))
        self.grad_weights = (gmat.T @ colsmat).reshape(self.weights.shape)
        gcols = (gmat @ self.weights.reshape(self.out_channels, -1)
                 ).reshape(B, L, k, self.in_channels)
        gxp = np.zeros((B, L + 2 * pad, self.in_channels), dtype=grad_out.dtype)
        for j in range(k):
            gxp[:, j:j + L, :] += gcols[:, :, j, :]
        return gxp[:, pad:pad + L, :]


class MaxPool1D:
    """Windowed maximum along the sequence axis; trailing positions that do
    not fill a window are dropped. Ties go to the earlier index."""

    def __init__(self, window=2, stride=2):
        self.window = window
        self.stride = stride
        self.argmax_map = None  # (B, n_out, C) winner offsets, kept for backprop

    params = ()
    grads = ()

    def forward(self, x, train=False):
        B, L, C = x.shape
        if L < self.window:
            raise ValueError("sequence length %d shorter than pooling window %d"
                             % (L, self.window))
        n_out = (L - self.window) // self.stride + 1
        win = np.lib.stride_tricks.sliding_window_view(x, self.window, axis=1)
        win = win[:, ::self.stride][:, :n_out]          # (B, n_out, C, window)
        self.argmax_map = win.argmax(axis=3)
        self._in_shape = x.shape
        return np.take_along_axis(win, self.argmax_map[..., None], axis=3)[..., 0]

    def backward(self, grad_out):
        if self.argmax_map is None:
            raise RuntimeError("backward called before forward")
        B, n_out, C = grad_out.shape
        gx = np.zeros(self._in_shape, dtype=grad_out.dtype)
        pos = self.argmax_map + (np.arange(n_out) * self.stride)[None, :, None]
        b_idx = np.arange(B)[:, None, None]
        c_idx = np.arange(C)[None, None, :]
        np.add.at(gx, (b_idx, pos, c_idx), grad_out)
        return gx


class ReLU:
    params = ()
    grads = ()

    def __init__(self):
        self._mask = None

    def forward(self, x, train=False):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad_out):
        if self._mask is None:
            raise RuntimeError("backward called before forward")
        return grad_out * self._mask


class Dropout:
    """Inverted dropout: each element is zeroed with probability p at train
    time and survivors scale by 1/(1-p), so evaluation is the identity.

    Setting ``frozen_mask`` pins the mask across calls, which the gradient
    checker relies on to keep the loss deterministic.
    """

    params = ()
    grads = ()

    def __init__(self, p, rng=None):
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout probability must be in [0, 1), got %r" % (p,))
        self.p = p
        self.rng = rng if rng is not None else np.random.default_rng()
        self.frozen_mask = None
        self._mask = None
        self._ran = False

    def forward(self, x, train=False):
        self._ran = True
        if not train or self.p == 0.0:
            self._mask = None
            return x
        if self.frozen_mask is not None:
            mask = self.frozen_mask
        else:
            mask = self.rng.random(x.shape) >= self.p
        self._mask = mask
        return x * mask * (1.0 / (1.0 - self.p))

    def backward(self, grad_out):
        if not self._ran:
            raise RuntimeError("backward called before forward")
        if self._mask is None:
            return grad_out
        return grad_out * self._mask * (1.0 / (1.0 - self.p))


def conv1d_forward(x, layer: Conv1D):
    """Functional convolution; accepts one (L, C_in) example or a batch."""
    x = np.asarray(x)
    if x.ndim == 2:
        return layer.forward(x[None])[0]
    return layer.forward(x)


def maxpool1d(x, window=2, stride=2):
    """Windowed max over one example or a batch; returns (pooled, argmax map).

    The argmax map holds each winner's offset inside its window, as the
    backward pass consumes it.
    """
    x = np.asarray(x)
    layer = MaxPool1D(window, stride)
    if x.ndim == 2:
        out = layer.forward(x[None])
        return out[0], layer.argmax_map[0]
    return layer.forward(x), layer.argmax_map


def relu(x):
    return np.maximum(x, 0)


def dropout(x, p, train, rng):
    """Functional form of :class:`Dropout`; ``rng`` may be a Generator or an
    integer seed."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return Dropout(p, rng).forward(x, train=train)


class Flatten:
    params = ()
    grads = ()

    def __init__(self):
        self._in_shape = None

    def forward(self, x, train=False):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        if self._in_shape is None:
            raise RuntimeError("backward called before forward")
        return grad_out.reshape(self._in_shape)


class Dense:
    def __init__(self, in_features, out_features, rng, dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        self.weights = glorot_uniform(rng, (out_features, in_features),
                                      in_features, out_features, dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self._x = None

    @property
    def params(self):
        return [self.weights, self.bias]

    @property
    def grads(self):
        return [self.grad_weights, self.grad_bias]

    def forward(self, x, train=False):
        if x.shape[-1] != self.in_features:
            raise ValueError("expected %d input features, got %d"
                             % (self.in_features, x.shape[-1]))
        self._x = x
        return x @ self.weights.T + self.bias

    def backward(self, grad_out):
        if self._x is None:
            raise RuntimeError("backward called before forward")
        self.grad_weights = grad_out.T @ self._x
        self.grad_bias = grad_out.sum(axis=0)
        return grad_out @ self.weights


def softmax(z) -> np.ndarray:
    """Max-stabilized softmax over the last axis, computed and returned in
    float64 so outputs stay strictly positive."""
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probabilities, label: int) -> float:
    p = np.asarray(probabilities)
    if not 0 <= label < p.shape[-1]:
        raise ValueError("label %d out of range for %d classes" % (label, p.shape[-1]))
    return float(-np.log(p[..., label]))


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns (loss, grad_logits); the gradient is (softmax - one_hot) / batch
    in the dtype of ``logits``.
    """
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(np.asarray(labels))
    n, c = logits.shape
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError("labels out of range for %d classes" % c)
    p = softmax(logits)
    idx = np.arange(n)
    loss = float(-np.log(p[idx, labels]).mean())
    grad = p
    grad[idx, labels] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype)


def grad_check(loss_fn, params, grads, h: float = 1e-3) -> float:
    """Compare analytic gradients against central finite differences.

    ``loss_fn`` must be a deterministic zero-argument callable (freeze any
    dropout masks first). Each parameter array is perturbed in place. Returns
    the maximum relative error max(|a-g| / max(|a|,|g|,1e-8)) over every
    coordinate of every tensor.
    """
    worst = 0.0
    for p, g in zip(params, grads):
        flat_p = p.reshape(-1)
        flat_g = np.asarray(g).reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            loss_plus = loss_fn()
            flat_p[i] = orig - h
            loss_minus = loss_fn()
            flat_p[i] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            rel = abs(numeric - flat_g[i]) / max(abs(numeric), abs(flat_g[i]), 1e-8)
            worst = max(worst, rel)
    return worst


class SGDMomentum:
    def __init__(self, learning_rate=0.01, momentum=0.9):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self._velocity = None

    def step(self, params, grads):
        if len(params) != len(grads):
            raise ValueError("got %d params but %d grads" % (len(params), len(grads)))
        if self._velocity is None:
            self._velocity = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self._velocity):
            if p.shape != g.shape:
                raise ValueError("param/grad shape mismatch: %r vs %r" % (p.shape, g.shape))
            v *= self.momentum
            v += g
            p -= self.learning_rate * v


class Adam:
    """Bias-corrected adaptive moments."""

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = None
        self._v = None
        self._t = 0

    def step(self, params, grads):
        if len(params) != len(grads):
            raise ValueError("got %d params but %d grads" % (len(params), len(grads)))
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self._t += 1
        bc1 = 1.0 - self.beta1 ** self._t
        bc2 = 1.0 - self.beta2 ** self._t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            if p.shape != g.shape:
                raise ValueError("param/grad shape mismatch: %r vs %r" % (p.shape, g.shape))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def make_optimizer(kind: str, learning_rate: float, momentum: float = 0.9):
    if kind == "adam":
        return Adam(learning_rate=learning_rate)
    if kind == "sgd_momentum":
        return SGDMomentum(learning_rate=learning_rate, momentum=momentum)
    raise ValueError("unknown optimizer %r (use 'adam' or 'sgd_momentum')" % kind)
