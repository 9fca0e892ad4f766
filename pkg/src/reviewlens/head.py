"""Trainable binary classification head over extracted features.

The head is two dense layers: 8192 -> 256 (relu) -> 1 (sigmoid), which
gives 8192*256+256 = 2,097,408 trainable parameters in the first layer
and 256+1 = 257 in the second. Forward pass, binary cross-entropy,
analytic gradients and the training loop are implemented directly on
numpy in 64-bit precision; nothing here depends on a learning framework.

Persistence: a trained head serializes as a 4-byte magic "RLH1", a u32
little-endian length, a UTF-8 JSON envelope {schema_version, config,
metrics}, then the four parameter tensors as consecutive feature-store
blocks (w1 row-major as 8192 records of dim 256, b1 as one record of
dim 256, w2 as 256 records of dim 1, b2 as one record of dim 1).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import feature_store
from .errors import (
    ConfigError,
    DegenerateDataError,
    DimensionError,
    EmptyBatchError,
    FormatError,
    ReviewLensError,
    ValidationError,
)

INPUT_DIM = 8192
HIDDEN_UNITS = 256
LOSS_EPSILON = 1e-7

HEAD_MAGIC = b"RLH1"
_ENVELOPE_LEN = struct.Struct("<I")

OPTIMIZERS = ("sgd_momentum", "adam")


@dataclass
class HeadParameters:
    """Weights and biases of the two dense layers.

    Also serves as the container for gradients, which share the shapes.
    """

    w1: np.ndarray  # (input_dim, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, 1)
    b2: np.ndarray  # (1,)

    def __post_init__(self) -> None:
        if self.w1.ndim != 2 or self.b1.shape != (self.w1.shape[1],):
            raise DimensionError(
                f"layer 1 shapes inconsistent: w1 {self.w1.shape}, b1 {self.b1.shape}"
            )
        if self.w2.shape != (self.w1.shape[1], 1) or self.b2.shape != (1,):
            raise DimensionError(
                f"layer 2 shapes inconsistent: w2 {self.w2.shape}, b2 {self.b2.shape}"
            )

    def parameter_counts(self) -> tuple[int, int]:
        """(layer 1, layer 2) trainable parameter counts."""
        return self.w1.size + self.b1.size, self.w2.size + self.b2.size

    def tensors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.w1, self.b1, self.w2, self.b2

    def copy(self) -> "HeadParameters":
        return HeadParameters(
            self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy()
        )

    def all_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(t))) for t in self.tensors())


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "sgd_momentum"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    validation_fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must be in [0, 1)")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must be in [0, 1)")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("beta1/beta2 must be in [0, 1)")


@dataclass(frozen=True)
class EpochStats:
    train_loss: float
    validation_loss: float | None
    validation_accuracy: float | None


def init_head(seed: int) -> HeadParameters:
    """Fresh head: symmetric uniform weights scaled by fan-in + fan-out,
    zero biases. Deterministic per seed."""
    rng = np.random.default_rng(seed)
    limit1 = np.sqrt(6.0 / (INPUT_DIM + HIDDEN_UNITS))
    limit2 = np.sqrt(6.0 / (HIDDEN_UNITS + 1))
    return HeadParameters(
        w1=rng.uniform(-limit1, limit1, size=(INPUT_DIM, HIDDEN_UNITS)),
        b1=np.zeros(HIDDEN_UNITS),
        w2=rng.uniform(-limit2, limit2, size=(HIDDEN_UNITS, 1)),
        b2=np.zeros(1),
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split on sign so exp never overflows.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_parts(
    params: HeadParameters, features: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(pre-activation z1, hidden h, probability p) in float64."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"features must be 2-D, got shape {x.shape}")
    if x.shape[1] != params.w1.shape[0]:
        raise DimensionError(
            f"features have {x.shape[1]} columns, head expects {params.w1.shape[0]}"
        )
    z1 = x @ params.w1 + params.b1
    h = np.maximum(z1, 0.0)
    z2 = h @ params.w2 + params.b2
    # Saturated sigmoids round to exactly 0/1 in float64; probabilities
    # are documented strictly inside (0, 1), so pull them one ulp in.
    probs = np.clip(_sigmoid(z2[:, 0]), np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return z1, h, probs


def head_forward(params: HeadParameters, features: np.ndarray) -> np.ndarray:
    """Probability per feature row: sigmoid(relu(x w1 + b1) w2 + b2)."""
    return _forward_parts(params, features)[2]


def bce_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy with probabilities clamped to
    [LOSS_EPSILON, 1 - LOSS_EPSILON]."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if p.size == 0:
        raise EmptyBatchError("bce_loss needs at least one example")
    if p.shape != y.shape:
        raise DimensionError(f"{p.size} probabilities for {y.size} labels")
    p = np.clip(p, LOSS_EPSILON, 1.0 - LOSS_EPSILON)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def head_gradients(
    params: HeadParameters, features: np.ndarray, labels: np.ndarray
) -> HeadParameters:
    """Exact analytic gradients of mean BCE with respect to each tensor.

    Returns a HeadParameters holding gradients. The relu subgradient at
    exactly 0 is taken as 0. All accumulation is in float64.
    """
    y = np.asarray(labels, dtype=np.float64).ravel()
    if y.size == 0:
        raise EmptyBatchError("gradient needs at least one example")
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise DimensionError(
            f"features shape {x.shape} does not match {y.size} labels"
        )
    z1, h, p = _forward_parts(params, x)
    n = y.size
    dz2 = ((p - y) / n)[:, None]
    gw2 = h.T @ dz2
    gb2 = dz2.sum(axis=0)
    dh = dz2 @ params.w2.T
    dz1 = dh * (z1 > 0.0)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return HeadParameters(w1=gw1, b1=gb1, w2=gw2, b2=gb2)


class _SgdMomentum:
    def __init__(self, config: TrainConfig, params: HeadParameters):
        self.lr = config.learning_rate
        self.momentum = config.momentum
        self.velocity = [np.zeros_like(t) for t in params.tensors()]

    def step(self, params: HeadParameters, grads: HeadParameters) -> None:
        for v, t, g in zip(self.velocity, params.tensors(), grads.tensors()):
            v *= self.momentum
            v -= self.lr * g
            t += v


class _Adam:
    def __init__(self, config: TrainConfig, params: HeadParameters):
        self.lr = config.learning_rate
        self.beta1 = config.beta1
        self.beta2 = config.beta2
        self.eps = config.adam_epsilon
        self.t = 0
        self.m = [np.zeros_like(t) for t in params.tensors()]
        self.v = [np.zeros_like(t) for t in params.tensors()]

    def step(self, params: HeadParameters, grads: HeadParameters) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for m, v, t, g in zip(self.m, self.v, params.tensors(), grads.tensors()):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            t -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train_head(
    features: np.ndarray, labels: np.ndarray, config: TrainConfig
) -> tuple[HeadParameters, list[EpochStats]]:
    """Train the head with seeded shuffling, batching and initialization.

    Identical (features, labels, config) produce bit-identical parameters
    and history. The validation split, when requested, is carved off
    before training; the training side must contain both classes.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if x.ndim != 2 or x.shape[0] != y.size:
        raise DimensionError(f"features shape {x.shape} does not match {y.size} labels")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValidationError("labels must be 0 or 1")

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(y.size)
    val_count = int(y.size * config.validation_fraction)
    val_idx = perm[:val_count]
    train_idx = perm[val_count:]
    if train_idx.size == 0 or len(np.unique(y[train_idx])) < 2:
        raise DegenerateDataError(
            "training set must contain both classes after the validation split"
        )
    if config.batch_size > train_idx.size:
        raise ConfigError(
            f"batch_size {config.batch_size} exceeds training-set size {train_idx.size}"
        )

    params = init_head(config.seed)
    optimizer = (
        _SgdMomentum(config, params)
        if config.optimizer == "sgd_momentum"
        else _Adam(config, params)
    )

    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]
    history: list[EpochStats] = []
    for _ in range(config.epochs):
        order = rng.permutation(train_idx.size)
        for start in range(0, order.size, config.batch_size):
            batch = order[start : start + config.batch_size]
            grads = head_gradients(params, x_train[batch], y_train[batch])
            optimizer.step(params, grads)
        train_loss = bce_loss(head_forward(params, x_train), y_train)
        if val_idx.size:
            val_probs = head_forward(params, x_val)
            val_loss = bce_loss(val_probs, y_val)
            val_acc = float(np.mean((val_probs >= 0.5).astype(np.float64) == y_val))
        else:
            val_loss = val_acc = None
        history.append(EpochStats(train_loss, val_loss, val_acc))

    if not params.all_finite():
        raise ReviewLensError("training diverged: parameters contain non-finite values")
    return params, history


def predict(
    params: HeadParameters, features: np.ndarray, cutoff: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """(labels, probabilities); positive iff probability >= cutoff."""
    if not 0.0 <= cutoff <= 1.0:
        raise ConfigError(f"cutoff must be in [0, 1], got {cutoff}")
    probs = head_forward(params, features)
    return (probs >= cutoff).astype(np.int64), probs


def save_head(
    path: str | Path,
    params: HeadParameters,
    config: TrainConfig | None = None,
    metrics: dict | None = None,
) -> None:
    """Persist a trained head. Parameters are stored as float32."""
    envelope = {
        "schema_version": 1,
        "config": asdict(config) if config is not None else None,
        "metrics": metrics or {},
    }
    payload = json.dumps(envelope).encode("utf-8")
    with open(path, "wb") as fp:
        fp.write(HEAD_MAGIC)
        fp.write(_ENVELOPE_LEN.pack(len(payload)))
        fp.write(payload)
        w1, b1, w2, b2 = params.tensors()
        feature_store.write_block(fp, [str(i) for i in range(w1.shape[0])], w1)
        feature_store.write_block(fp, ["b1"], b1[None, :])
        feature_store.write_block(fp, [str(i) for i in range(w2.shape[0])], w2)
        feature_store.write_block(fp, ["b2"], b2[None, :])


def load_head(path: str | Path) -> tuple[HeadParameters, dict]:
    """Load a trained head; returns (parameters, envelope dict)."""
    with open(path, "rb") as fp:
        magic = fp.read(len(HEAD_MAGIC))
        if magic != HEAD_MAGIC:
            raise FormatError(f"bad trained-head magic {magic!r}")
        raw_len = fp.read(_ENVELOPE_LEN.size)
        if len(raw_len) < _ENVELOPE_LEN.size:
            raise FormatError("truncated trained-head envelope length")
        (env_len,) = _ENVELOPE_LEN.unpack(raw_len)
        raw_env = fp.read(env_len)
        if len(raw_env) < env_len:
            raise FormatError("truncated trained-head envelope")
        envelope = json.loads(raw_env.decode("utf-8"))
        _, w1 = feature_store.read_block(fp)
        _, b1 = feature_store.read_block(fp)
        _, w2 = feature_store.read_block(fp)
        _, b2 = feature_store.read_block(fp)
    params = HeadParameters(
        w1=w1.astype(np.float64),
        b1=b1[0].astype(np.float64),
        w2=w2.astype(np.float64),
        b2=b2[0].astype(np.float64),
    )
    return params, envelope
