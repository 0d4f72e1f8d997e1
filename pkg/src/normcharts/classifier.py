"""Reference text classifier: hashed n-gram features, sigmoid linear model,
weighted cross-entropy with a configurable minority-class penalty."""

import re
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .corpus import SplitMix64
from .errors import Divergence, EmptyInput, InvalidParams, MissingClass, SchemaError
from .labeling import Label
from .report_text import InputMode

EPS = 1e-12

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    """FNV-1a 64-bit hash; the fixed, documented feature hash."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class FeatureConfig:
    dimension: int = 1 << 18
    ngram_min: int = 1
    ngram_max: int = 2
    lowercase: bool = True

    def __post_init__(self):
        if not (1 <= self.ngram_min <= self.ngram_max <= 3):
            raise InvalidParams("require 1 <= ngram_min <= ngram_max <= 3")
        if self.dimension < (1 << 10) or self.dimension & (self.dimension - 1):
            raise InvalidParams("dimension must be a power of two >= 2^10")


@dataclass(frozen=True)
class TrainConfig:
    pos_weight: float = 10.0
    learning_rate: float = 0.5
    epochs: int = 20
    l2: float = 1e-6
    seed: int = 0
    input_mode: InputMode = InputMode.FULL_REPORT
    batch_size: int = 64

    def __post_init__(self):
        if self.pos_weight <= 0:
            raise InvalidParams("pos_weight must be positive")
        if self.epochs < 1:
            raise InvalidParams("epochs must be >= 1")


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    if lowercase:
        text = text.lower()
    return re.findall(r"[a-zA-Z0-9]+", text)


def featurize(text: str, config: FeatureConfig) -> dict[int, float]:
    """Hash n-grams of the token stream into a sparse count vector."""
    tokens = tokenize(text, config.lowercase)
    if not tokens:
        raise EmptyInput("no tokens after normalization")
    counts: dict[int, float] = {}
    for n in range(config.ngram_min, config.ngram_max + 1):
        for i in range(len(tokens) - n + 1):
            gram = " ".join(tokens[i : i + n]).encode("utf-8")
            idx = fnv1a_64(gram) % config.dimension
            counts[idx] = counts.get(idx, 0.0) + 1.0
    return counts


def weighted_loss(y: int, p: float, pos_weight: float) -> float:
    """Cross-entropy with a multiplicative penalty on positive-class errors."""
    p = min(max(p, EPS), 1.0 - EPS)
    return -(pos_weight * y * np.log(p) + (1 - y) * np.log(1.0 - p))


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    config: FeatureConfig
    pos_weight: float
    final_loss: float = field(default=float("nan"), compare=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)):
            raise InvalidParams("non-finite weights")
        if self.pos_weight <= 0:
            raise InvalidParams("pos_weight must be positive")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _design_matrix(texts: Sequence[str], fcfg: FeatureConfig) -> sparse.csr_matrix:
    data, indices, indptr = [], [], [0]
    for text in texts:
        feats = featurize(text, fcfg)
        for idx in sorted(feats):
            indices.append(idx)
            data.append(feats[idx])
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(texts), fcfg.dimension),
    )


def objective_and_gradient(
    X: sparse.csr_matrix,
    y: np.ndarray,
    weights: np.ndarray,
    bias: float,
    pos_weight: float,
    l2: float,
) -> tuple[float, np.ndarray, float]:
    """Mean weighted cross-entropy + l2 penalty, with its analytic gradient."""
    n = X.shape[0]
    z = X @ weights + bias
    p = np.clip(_sigmoid(z), EPS, 1.0 - EPS)
    sample_w = np.where(y == 1, pos_weight, 1.0)
    loss = -np.mean(sample_w * (y * np.log(p) + (1 - y) * np.log(1.0 - p)))
    loss += l2 * float(weights @ weights)
    coef = sample_w * (p - y) / n
    grad_w = X.T @ coef + 2.0 * l2 * weights
    grad_b = float(np.sum(coef))
    return float(loss), np.asarray(grad_w).ravel(), grad_b


def train(
    examples: Sequence[tuple[str, Label]],
    cfg: TrainConfig,
    fcfg: FeatureConfig | None = None,
) -> LinearModel:
    """Fit the linear model by seeded mini-batch gradient descent.

    Examples are canonicalized (sorted) before the seeded per-epoch shuffle,
    so training is deterministic given the example multiset, cfg, and fcfg.
    """
    fcfg = fcfg or FeatureConfig()
    labels = {lab for _, lab in examples}
    if Label.UNCERTAIN in labels:
        raise SchemaError("Uncertain examples must be excluded upstream")
    if labels != {Label.NORMAL, Label.ABNORMAL}:
        raise MissingClass("training needs both Normal and Abnormal examples")

    ordered = sorted(examples, key=lambda e: (e[0], e[1].value))
    texts = [t for t, _ in ordered]
    y = np.array([1.0 if lab is Label.NORMAL else 0.0 for _, lab in ordered])
    X = _design_matrix(texts, fcfg)
    n = len(ordered)

    weights = np.zeros(fcfg.dimension)
    bias = 0.0
    rng = SplitMix64(cfg.seed ^ 0x1F2E3D4C5B6A7988)
    order = list(range(n))
    loss = float("nan")
    for _ in range(cfg.epochs):
        rng.shuffle(order)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, gw, gb = objective_and_gradient(
                X[batch], y[batch], weights, bias, cfg.pos_weight, cfg.l2
            )
            if not np.isfinite(loss):
                raise Divergence(f"non-finite loss {loss}")
            weights -= cfg.learning_rate * gw
            bias -= cfg.learning_rate * gb
    final, _, _ = objective_and_gradient(X, y, weights, bias, cfg.pos_weight, cfg.l2)
    if not np.isfinite(final):
        raise Divergence(f"non-finite final loss {final}")
    return LinearModel(weights=weights, bias=bias, config=fcfg, pos_weight=cfg.pos_weight, final_loss=final)


def predict(model: LinearModel, text: str) -> float:
    """Probability that the text is a Normal report."""
    feats = featurize(text, model.config)
    z = model.bias + sum(model.weights[i] * c for i, c in feats.items())
    return float(np.clip(_sigmoid(z), EPS, 1.0 - EPS))


def classify(model: LinearModel, text: str, threshold: float = 0.5) -> Label:
    """Thresholded prediction; ties at the threshold go to Abnormal."""
    return Label.NORMAL if predict(model, text) > threshold else Label.ABNORMAL


_MAGIC = b"NCLM"
_VERSION = 1


def save_model(model: LinearModel, path) -> None:
    """Flat little-endian binary: header, weights, bias."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        f.write(struct.pack("<Q", model.config.dimension))
        f.write(struct.pack("<II", model.config.ngram_min, model.config.ngram_max))
        f.write(struct.pack("<B3x", int(model.config.lowercase)))
        f.write(struct.pack("<d", model.pos_weight))
        f.write(model.weights.astype("<f8").tobytes())
        f.write(struct.pack("<d", model.bias))


def load_model(path) -> LinearModel:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise SchemaError(f"{path}: bad magic")
        (version,) = struct.unpack("<I", f.read(4))
        if version != _VERSION:
            raise SchemaError(f"{path}: unsupported version {version}")
        (dimension,) = struct.unpack("<Q", f.read(8))
        ngram_min, ngram_max = struct.unpack("<II", f.read(8))
        (lowercase,) = struct.unpack("<B3x", f.read(4))
        (pos_weight,) = struct.unpack("<d", f.read(8))
        weights = np.frombuffer(f.read(8 * dimension), dtype="<f8").copy()
        (bias,) = struct.unpack("<d", f.read(8))
    fcfg = FeatureConfig(dimension=dimension, ngram_min=ngram_min, ngram_max=ngram_max, lowercase=bool(lowercase))
    return LinearModel(weights=weights, bias=bias, config=fcfg, pos_weight=pos_weight)
