"""Binary model persistence.

Layout: magic ``MTCF``, format version (u32 LE), a length-prefixed UTF-8
``key=value`` config block, then tensor records: name length (u32) + name
bytes, rank (u64), each dim (u64), raw float32 little-endian values. The
config block carries everything needed to rebuild the architecture, so a
file loads without external state.
"""

from __future__ import annotations

import struct

import numpy as np

from .models import CnnClassifier, SoftmaxRegression

MAGIC = b"MTCF"
VERSION = 1


class ModelFormatError(ValueError):
    """Raised for unreadable, truncated, or version-incompatible model files."""


def write_container(path: str, config: dict, tensors: dict) -> None:
    """Write a config block plus named float32 tensors. Config values are
    stringified; they must not contain newlines (JSON-encode anything
    structured)."""
    parts = [MAGIC, struct.pack("<I", VERSION)]
    lines = []
    for key in sorted(config):
        value = str(config[key])
        if "\n" in key or "\n" in value:
            raise ValueError("config entries must not contain newlines: %r" % key)
        lines.append("%s=%s\n" % (key, value))
    blob = "".join(lines).encode("utf-8")
    parts.append(struct.pack("<I", len(blob)))
    parts.append(blob)
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        name_b = name.encode("utf-8")
        parts.append(struct.pack("<I", len(name_b)))
        parts.append(name_b)
        parts.append(struct.pack("<Q", arr.ndim))
        for dim in arr.shape:
            parts.append(struct.pack("<Q", dim))
        parts.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError("%s: truncated file" % self.path)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.data)


def read_container(path: str) -> tuple[dict, dict]:
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), path)
    if reader.take(4) != MAGIC:
        raise ModelFormatError("%s: bad magic, not a model file of a supported version" % path)
    version = reader.u32()
    if version != VERSION:
        raise ModelFormatError("%s: unsupported format version %d (expected %d)"
                               % (path, version, VERSION))
    blob = reader.take(reader.u32()).decode("utf-8")
    config = {}
    for line in blob.splitlines():
        if not line:
            continue
        if "=" not in line:
            raise ModelFormatError("%s: malformed config line %r" % (path, line))
        key, value = line.split("=", 1)
        config[key] = value
    tensors = {}
    while not reader.exhausted:
        name = reader.take(reader.u32()).decode("utf-8")
        rank = reader.u64()
        shape = tuple(reader.u64() for _ in range(rank))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = reader.take(count * 4)
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return config, tensors


_CNN_INT_FIELDS = ("max_len", "embed_dim", "conv_pairs", "filters", "kernel",
                   "pool", "fc_dim", "n_classes", "epochs", "batch_size", "seed")
_CNN_FLOAT_FIELDS = ("dropout", "learning_rate", "momentum")


def cnn_payload(model: CnnClassifier) -> tuple[dict, dict]:
    """Config strings and parameter tensors for a built CnnClassifier."""
    config = {"optimizer": model.optimizer}
    for name in _CNN_INT_FIELDS + _CNN_FLOAT_FIELDS:
        config[name] = repr(getattr(model, name))
    tensors = {}
    conv_i = dense_i = 0
    for layer in model.layers_:
        if not hasattr(layer, "weights"):
            continue
        if hasattr(layer, "kernel_size"):
            prefix = "conv%d" % conv_i
            conv_i += 1
        else:
            prefix = "dense%d" % dense_i
            dense_i += 1
        tensors[prefix + ".weights"] = layer.weights
        tensors[prefix + ".bias"] = layer.bias
    return config, tensors


def cnn_from_payload(config: dict, tensors: dict) -> CnnClassifier:
    kwargs = {name: int(config[name]) for name in _CNN_INT_FIELDS}
    kwargs.update({name: float(config[name]) for name in _CNN_FLOAT_FIELDS})
    model = CnnClassifier(optimizer=config["optimizer"], **kwargs).build()
    _, wanted = cnn_payload(model)
    for name, arr in wanted.items():
        stored = tensors.get(name)
        if stored is None:
            raise ModelFormatError("missing tensor %r" % name)
        if stored.shape != arr.shape:
            raise ModelFormatError("tensor %r has shape %r, expected %r"
                                   % (name, stored.shape, arr.shape))
        arr[...] = stored
    return model


def logr_payload(model: SoftmaxRegression) -> tuple[dict, dict]:
    config = {
        "n_classes": repr(model.n_classes_),
        "l2": repr(model.l2),
        "learning_rate": repr(model.learning_rate),
        "epochs": repr(model.epochs),
        "batch_size": repr(model.batch_size),
        "seed": repr(model.seed),
    }
    return config, {"weights": model.weights_, "bias": model.bias_}


def logr_from_payload(config: dict, tensors: dict) -> SoftmaxRegression:
    model = SoftmaxRegression(
        n_classes=int(config["n_classes"]), l2=float(config["l2"]),
        learning_rate=float(config["learning_rate"]), epochs=int(config["epochs"]),
        batch_size=int(config["batch_size"]), seed=int(config["seed"]))
    for name in ("weights", "bias"):
        if name not in tensors:
            raise ModelFormatError("missing tensor %r" % name)
    model.weights_ = tensors["weights"]
    model.bias_ = tensors["bias"]
    model.n_classes_ = int(config["n_classes"])
    return model


def save_model(model, path: str) -> None:
    """Persist a trained CnnClassifier or SoftmaxRegression."""
    if isinstance(model, CnnClassifier):
        config, tensors = cnn_payload(model)
        config["kind"] = "cnn"
    elif isinstance(model, SoftmaxRegression):
        config, tensors = logr_payload(model)
        config["kind"] = "logr"
    else:
        raise TypeError("cannot save model of type %s" % type(model).__name__)
    write_container(path, config, tensors)


def load_model(path: str):
    config, tensors = read_container(path)
    kind = config.get("kind")
    if kind == "cnn":
        return cnn_from_payload(config, tensors)
    if kind == "logr":
        return logr_from_payload(config, tensors)
    raise ModelFormatError("%s: unknown model kind %r" % (path, kind))
