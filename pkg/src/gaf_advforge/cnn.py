"""Small convolutional classifier for ``(4, 10, 10)`` GAF tensors.

Architecture (fixed)::

    conv 3x3, 4 -> 16, same padding, ReLU
    conv 3x3, 16 -> 16, same padding, ReLU
    flatten (h, w, c order) 1600 -> dense 128, ReLU
    dense 128 -> 8, softmax

Forward and backward passes are hand-written numpy in float64, with
convolutions lowered to matrix products over 3x3 patches.  Activations are
kept channels-last internally.
"""

import copy
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as rng_mod
from .candlestick import PatternLabel
from .errors import ConfigError, DatasetFormatError, EmptyClass, NonFiniteActivation

log = logging.getLogger(__name__)

N_CLASSES = 8
SIDE = 10
PARAM_SHAPES = {
    "conv1_w": (16, 4, 3, 3),
    "conv1_b": (16,),
    "conv2_w": (16, 16, 3, 3),
    "conv2_b": (16,),
    "dense1_w": (SIDE * SIDE * 16, 128),
    "dense1_b": (128,),
    "dense2_w": (128, N_CLASSES),
    "dense2_b": (N_CLASSES,),
}
PARAM_NAMES = tuple(PARAM_SHAPES)
_FANS = {
    "conv1_w": (4 * 9, 16 * 9),
    "conv2_w": (16 * 9, 16 * 9),
    "dense1_w": (1600, 128),
    "dense2_w": (128, N_CLASSES),
}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-3
    momentum: float = 0.9
    seed: int = 0
    split: float = 0.8

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("train: epochs and batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("train: learning_rate must be positive")
        if not 0 < self.split < 1:
            raise ConfigError("train: split must lie in (0, 1)")
        if not 0 <= self.momentum < 1:
            raise ConfigError("train: momentum must lie in [0, 1)")


class Prediction:
    def __init__(self, probabilities):
        self.probabilities = np.asarray(probabilities, dtype=np.float64)

    @property
    def label(self) -> PatternLabel:
        return PatternLabel(int(np.argmax(self.probabilities)) + 1)

    def __repr__(self):
        return f"Prediction(label={self.label.name}, p={self.probabilities.round(4)})"


class CnnModel:
    def __init__(self, params: dict):
        missing = set(PARAM_NAMES) - set(params)
        if missing:
            raise ValueError(f"missing parameters: {sorted(missing)}")
        self.params = {}
        for name in PARAM_NAMES:
            arr = np.array(params[name], dtype=np.float64)
            if arr.shape != PARAM_SHAPES[name]:
                raise ValueError(f"{name}: expected shape {PARAM_SHAPES[name]}, got {arr.shape}")
            self.params[name] = arr

    @classmethod
    def initialize(cls, seed: int) -> "CnnModel":
        """Glorot-uniform weights, zero biases."""
        gen = rng_mod.generator(seed, rng_mod.INIT)
        params = {}
        for name, shape in PARAM_SHAPES.items():
            if name in _FANS:
                fan_in, fan_out = _FANS[name]
                a = np.sqrt(6.0 / (fan_in + fan_out))
                params[name] = gen.uniform(-a, a, size=shape)
            else:
                params[name] = np.zeros(shape)
        return cls(params)

    @classmethod
    def zeros(cls) -> "CnnModel":
        return cls({name: np.zeros(shape) for name, shape in PARAM_SHAPES.items()})

    def copy(self) -> "CnnModel":
        return CnnModel(copy.deepcopy(self.params))

    def logits(self, x) -> np.ndarray:
        return _forward(self.params, _as_batch(x))[0]

    def probabilities(self, x, chunk: int = 512) -> np.ndarray:
        x = _as_batch(x)
        out = [_softmax(self.logits(x[i:i + chunk])) for i in range(0, len(x), chunk)]
        return np.concatenate(out) if out else np.empty((0, N_CLASSES))

    def predict_batch(self, x) -> np.ndarray:
        """Labels 1..8 for a batch; ties go to the lowest label."""
        return np.argmax(self.probabilities(x), axis=1).astype(np.uint8) + 1


class ConstantModel:
    """Stub classifier that always answers ``label``."""

    def __init__(self, label):
        self.label = PatternLabel(label)

    def predict_batch(self, x) -> np.ndarray:
        return np.full(len(x), int(self.label), dtype=np.uint8)


def _as_batch(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    if x.shape[1:] != (4, SIDE, SIDE):
        raise ValueError(f"expected (N, 4, 10, 10) input, got {x.shape}")
    return x


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _patches(h):
    """``(N, H, W, C)`` -> ``(N*H*W, 9*C)`` same-padded 3x3 patches, ordered
    (kernel row, kernel col, channel)."""
    n, hh, ww, c = h.shape
    hp = np.pad(h, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.concatenate(
        [hp[:, i:i + hh, j:j + ww, :] for i in range(3) for j in range(3)], axis=-1
    )
    return cols.reshape(n * hh * ww, 9 * c)


def _unpatch(dcols, shape):
    """Adjoint of :func:`_patches`."""
    n, hh, ww, c = shape
    d = dcols.reshape(n, hh, ww, 9, c)
    dhp = np.zeros((n, hh + 2, ww + 2, c))
    for k in range(9):
        i, j = divmod(k, 3)
        dhp[:, i:i + hh, j:j + ww, :] += d[:, :, :, k, :]
    return dhp[:, 1:-1, 1:-1, :]


def _wmat(w):
    """Conv weights ``(F, C, 3, 3)`` as a ``(F, 9*C)`` matrix matching :func:`_patches`."""
    return w.transpose(0, 2, 3, 1).reshape(len(w), -1)


def _wgrad(dmat, shape):
    f, c = shape[0], shape[1]
    return dmat.reshape(f, 3, 3, c).transpose(0, 3, 1, 2)


def _forward(p, x):
    n = len(x)
    x = x.transpose(0, 2, 3, 1)
    cols1 = _patches(x)
    z1 = cols1 @ _wmat(p["conv1_w"]).T + p["conv1_b"]
    a1 = np.maximum(z1, 0.0).reshape(n, SIDE, SIDE, 16)
    cols2 = _patches(a1)
    z2 = cols2 @ _wmat(p["conv2_w"]).T + p["conv2_b"]
    a2 = np.maximum(z2, 0.0).reshape(n, -1)
    z3 = a2 @ p["dense1_w"] + p["dense1_b"]
    a3 = np.maximum(z3, 0.0)
    logits = a3 @ p["dense2_w"] + p["dense2_b"]
    if not np.all(np.isfinite(logits)):
        raise NonFiniteActivation("non-finite logits in forward pass")
    cache = (cols1, z1, a1, cols2, z2, a2, z3, a3)
    return logits, cache


def relu_masks(model: CnnModel, x):
    """Boolean activation patterns of the three ReLU layers (for kink detection)."""
    _, (_, z1, _, _, z2, _, z3, _) = _forward(model.params, _as_batch(x))
    return z1 > 0, z2 > 0, z3 > 0


def _cross_entropy(logits, labels):
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    idx = np.asarray(labels, dtype=np.int64) - 1
    return -logp[np.arange(len(idx)), idx].mean(), np.exp(logp)


def loss(model: CnnModel, x, labels) -> float:
    logits, _ = _forward(model.params, _as_batch(x))
    return float(_cross_entropy(logits, labels)[0])


def loss_and_grad(model: CnnModel, x, labels):
    """Mean cross-entropy over the batch and its gradient for every parameter."""
    x = _as_batch(x)
    if len(x) == 0:
        raise ValueError("empty batch")
    p = model.params
    n = len(x)
    logits, (cols1, z1, a1, cols2, z2, a2, z3, a3) = _forward(p, x)
    value, probs = _cross_entropy(logits, labels)
    if not np.isfinite(value):
        raise NonFiniteActivation("non-finite loss")

    dlogits = probs
    dlogits[np.arange(n), np.asarray(labels, dtype=np.int64) - 1] -= 1.0
    dlogits /= n
    g = {}
    g["dense2_w"] = a3.T @ dlogits
    g["dense2_b"] = dlogits.sum(axis=0)
    dz3 = (dlogits @ p["dense2_w"].T) * (z3 > 0)
    g["dense1_w"] = a2.T @ dz3
    g["dense1_b"] = dz3.sum(axis=0)
    dz2 = (dz3 @ p["dense1_w"].T).reshape(-1, 16) * (z2 > 0)
    g["conv2_w"] = _wgrad(dz2.T @ cols2, PARAM_SHAPES["conv2_w"])
    g["conv2_b"] = dz2.sum(axis=0)
    da1 = _unpatch(dz2 @ _wmat(p["conv2_w"]), a1.shape)
    dz1 = da1.reshape(-1, 16) * (z1 > 0)
    g["conv1_w"] = _wgrad(dz1.T @ cols1, PARAM_SHAPES["conv1_w"])
    g["conv1_b"] = dz1.sum(axis=0)
    return float(value), g


def forward(model: CnnModel, tensor) -> Prediction:
    return Prediction(model.probabilities(tensor)[0])


def predict(model, tensor) -> PatternLabel:
    return PatternLabel(int(model.predict_batch(_as_batch(tensor))[0]))


def accuracy(model, dataset) -> float:
    if len(dataset) == 0:
        return float("nan")
    return float(np.mean(model.predict_batch(dataset.tensors) == dataset.labels))


def stratified_split(labels, fraction: float, seed: int):
    """Per-class shuffled split; returns sorted (train_index, val_index)."""
    labels = np.asarray(labels)
    gen = rng_mod.generator(seed, rng_mod.SPLIT)
    train, val = [], []
    for lab in PatternLabel:
        idx = np.flatnonzero(labels == lab)
        if len(idx) == 0:
            continue
        idx = gen.permutation(idx)
        k = min(max(int(round(fraction * len(idx))), 1), len(idx) - 1) if len(idx) > 1 else 1
        train.append(idx[:k])
        val.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


def check_classes(dataset, minimum: int = 2):
    counts = dataset.class_counts()
    absent = [lab for lab, n in counts.items() if n == 0]
    if absent:
        raise EmptyClass(f"classes absent from dataset: {absent}")
    thin = [lab for lab, n in counts.items() if n < minimum]
    if thin:
        raise EmptyClass(f"classes with fewer than {minimum} items: {thin}")


def train(model_init_seed: int, dataset, cfg: TrainConfig = TrainConfig(), validation=None):
    """Mini-batch SGD with momentum; returns the best-validation snapshot.

    Without ``validation`` the dataset is split per class by ``cfg.seed``.
    Returns ``(model, validation_accuracy)``.
    """
    if validation is None:
        check_classes(dataset)
        tr, va = stratified_split(dataset.labels, cfg.split, cfg.seed)
        train_set, validation = dataset.subset(tr), dataset.subset(va)
    else:
        check_classes(dataset, minimum=1)
        train_set = dataset

    model = CnnModel.initialize(model_init_seed)
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    order = rng_mod.generator(cfg.seed, rng_mod.ORDER)
    x_all = train_set.tensors.astype(np.float64)
    y_all = train_set.labels

    best, best_acc = model.copy(), accuracy(model, validation)
    for epoch in range(cfg.epochs):
        perm = order.permutation(len(y_all))
        total = 0.0
        for start in range(0, len(perm), cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            value, grads = loss_and_grad(model, x_all[idx], y_all[idx])
            total += value * len(idx)
            for k, gk in grads.items():
                v = velocity[k]
                v *= cfg.momentum
                v += gk
                model.params[k] -= cfg.learning_rate * v
        acc = accuracy(model, validation)
        log.debug("epoch %d loss %.4f val_acc %.4f", epoch + 1, total / len(perm), acc)
        if acc > best_acc:
            best, best_acc = model.copy(), acc
    return best, best_acc


_MAGIC = b"GCNN"
_VERSION = 1


def model_to_bytes(model: CnnModel) -> bytes:
    """``GCNN`` file: magic, version u32, then per tensor in declaration order
    ``ndim:u32, dims:u32*ndim, data:f64*prod(dims)``, all little-endian."""
    out = [_MAGIC, struct.pack("<I", _VERSION)]
    for name in PARAM_NAMES:
        arr = model.params[name]
        out.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        out.append(arr.astype("<f8").tobytes())
    return b"".join(out)


def model_from_bytes(raw: bytes) -> CnnModel:
    if raw[:4] != _MAGIC:
        raise DatasetFormatError(f"bad model magic {raw[:4]!r}")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != _VERSION:
        raise DatasetFormatError(f"unsupported model version {version}")
    pos, params = 8, {}
    for name in PARAM_NAMES:
        (ndim,) = struct.unpack_from("<I", raw, pos)
        shape = struct.unpack_from(f"<{ndim}I", raw, pos + 4)
        pos += 4 + 4 * ndim
        count = int(np.prod(shape))
        params[name] = np.frombuffer(raw, "<f8", count, pos).reshape(shape)
        pos += 8 * count
    if pos != len(raw):
        raise DatasetFormatError("trailing bytes in model file")
    return CnnModel(params)


def save_model(model: CnnModel, path) -> Path:
    path = Path(path)
    path.write_bytes(model_to_bytes(model))
    return path


def load_model(path) -> CnnModel:
    return model_from_bytes(Path(path).read_bytes())
