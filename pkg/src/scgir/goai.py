"""Goal-oriented task head: a dense classifier over noisy received latents,
cross-entropy training, and task metrics (accuracy, macro F1).

The classifier sees latents after the simulated link (fresh fading draw per
vector), so training is channel-aware. Hidden layers use PReLU with a
learnable per-layer slope followed by whole-batch standardization; the
output layer emits raw logits.
"""

from __future__ import annotations

import hashlib
import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Mapping

import numpy as np

from .channel import LinkConfig, link_roundtrip
from .errors import ContractError, DimensionError, DivergenceError
from .numeric import GradTape, Rng, Tensor, backward, ops
from .optim import Adam, cosine_lr, sgd_update


class LabelBatch:
    """Integer class ids (with a fixed class count); accepts one-hot rows too."""

    __slots__ = ("ids", "num_classes")

    def __init__(self, ids, num_classes: int):
        arr = np.asarray(ids, dtype=np.int64)
        if arr.ndim != 1:
            raise DimensionError(f"labels must be a 1-D id vector, got shape {arr.shape}")
        if num_classes < 2:
            raise ContractError(f"need at least 2 classes, got {num_classes}")
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ContractError(f"label ids must lie in [0, {num_classes}), got range "
                                f"[{arr.min()}, {arr.max()}]")
        self.ids = arr
        self.num_classes = num_classes

    @classmethod
    def from_onehot(cls, rows) -> "LabelBatch":
        m = np.asarray(rows, dtype=np.float64)
        if m.ndim != 2:
            raise DimensionError(f"one-hot labels must be 2-D, got shape {m.shape}")
        if not np.all((m == 0.0) | (m == 1.0)) or not np.all(m.sum(axis=1) == 1.0):
            raise ContractError("one-hot rows must contain exactly one 1")
        return cls(m.argmax(axis=1), m.shape[1])

    @property
    def n(self) -> int:
        return self.ids.size

    def onehot(self) -> np.ndarray:
        m = np.zeros((self.n, self.num_classes))
        m[np.arange(self.n), self.ids] = 1.0
        return m

    def take(self, indices) -> "LabelBatch":
        return LabelBatch(self.ids[np.asarray(indices)], self.num_classes)


@dataclass(frozen=True)
class GoaiConfig:
    """Classifier architecture: input dim, hidden widths, class count."""

    input_dim: int
    num_classes: int
    hidden_dims: tuple = (64, 64, 64)
    eps: float = 1e-5
    prelu_init: float = 0.25

    def digest(self) -> str:
        text = (
            f"goai-v1 in={self.input_dim} hidden={','.join(map(str, self.hidden_dims))} "
            f"classes={self.num_classes} eps={self.eps!r} prelu={self.prelu_init!r}"
        )
        return hashlib.sha256(text.encode()).hexdigest()


class GoaiModel:
    """Parameter store for the task head; init reproducible from (config, seed)."""

    def __init__(self, config: GoaiConfig, rng: Rng):
        self.config = config
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()
        din = config.input_dim
        for i, dout in enumerate(config.hidden_dims):
            bound = math.sqrt(6.0 / din)
            w = rng.uniform(-bound, bound, size=din * dout).reshape(din, dout)
            self.params[f"layer{i}.w"] = Tensor(w, copy=False)
            self.params[f"layer{i}.b"] = Tensor.zeros((dout,))
            self.params[f"layer{i}.alpha"] = Tensor(config.prelu_init)
            din = dout
        bound = math.sqrt(6.0 / din)
        w = rng.uniform(-bound, bound, size=din * config.num_classes).reshape(din, config.num_classes)
        self.params["out.w"] = Tensor(w, copy=False)
        self.params["out.b"] = Tensor.zeros((config.num_classes,))

    def replace_params(self, updates: Dict[str, Tensor]) -> None:
        for name, value in updates.items():
            if name not in self.params:
                raise KeyError(f"unknown parameter {name}")
            self.params[name] = value

    def param_shapes(self) -> "OrderedDict[str, tuple]":
        return OrderedDict((k, v.shape) for k, v in self.params.items())

    def config_digest(self) -> str:
        return self.config.digest()


def goai_forward(model: GoaiModel, y: Tensor, tape: GradTape | None = None) -> Tensor:
    """Logits for a batch of received latents (softmax only in the loss)."""
    if y.ndim != 2 or y.shape[1] != model.config.input_dim:
        raise DimensionError(
            f"classifier expects (n, {model.config.input_dim}) input, got shape {y.shape}"
        )
    t = y
    p = model.params
    for i in range(len(model.config.hidden_dims)):
        t = ops.add(ops.matmul(t, p[f"layer{i}.w"], tape), p[f"layer{i}.b"], tape)
        t = ops.prelu(t, p[f"layer{i}.alpha"], tape)
        t = ops.batch_standardize(t, model.config.eps, tape)
    return ops.add(ops.matmul(t, p["out.w"], tape), p["out.b"], tape)


def cross_entropy(logits: Tensor, labels: LabelBatch, tape: GradTape | None = None) -> Tensor:
    """Mean negative log softmax probability of the true class."""
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy expects (n, C) logits, got shape {logits.shape}")
    n, c = logits.shape
    if labels.n != n or labels.num_classes != c:
        raise DimensionError(
            f"cross_entropy: logits {logits.shape} do not match {labels.n} labels over "
            f"{labels.num_classes} classes"
        )
    logp = ops.log_softmax(logits, tape)
    picked = ops.mul(logp, Tensor(labels.onehot(), copy=False), tape)
    return ops.scale(ops.sum_all(picked, tape), -1.0 / n, tape)


def sgd_step(params, grads, eta: float):
    """w <- w - eta * g. Accepts a single tensor or a name -> tensor mapping."""
    if isinstance(params, Tensor):
        g = grads.data if isinstance(grads, Tensor) else np.asarray(grads, dtype=np.float64)
        if g.shape != params.shape:
            raise DimensionError(f"gradient shape {g.shape} does not match parameter {params.shape}")
        return Tensor(params.data - eta * g, copy=False)
    named = {k: (v.data if isinstance(v, Tensor) else v) for k, v in grads.items()}
    return sgd_update(params, named, eta)


def predictions(logits) -> np.ndarray:
    """Argmax class ids; ties break to the lowest class index."""
    arr = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    return arr.argmax(axis=1)


def accuracy(logits, labels: LabelBatch) -> float:
    """Fraction of argmax matches."""
    preds = predictions(logits)
    if preds.size != labels.n:
        raise DimensionError(f"{preds.size} predictions vs {labels.n} labels")
    if preds.size == 0:
        raise ContractError("accuracy needs at least one sample")
    return float((preds == labels.ids).sum() / preds.size)


def f1_score(logits, labels: LabelBatch, averaging: str = "macro") -> float:
    """Macro-averaged F1 over all classes; 0 for classes with P + R = 0."""
    if averaging != "macro":
        raise ContractError(f"only macro averaging is supported, got {averaging!r}")
    preds = predictions(logits)
    if preds.size != labels.n:
        raise DimensionError(f"{preds.size} predictions vs {labels.n} labels")
    if preds.size == 0:
        raise ContractError("f1_score needs at least one sample")
    c = labels.num_classes
    total = 0.0
    for k in range(c):
        tp = int(((preds == k) & (labels.ids == k)).sum())
        fp = int(((preds == k) & (labels.ids != k)).sum())
        fn = int(((preds != k) & (labels.ids == k)).sum())
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        total += 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return total / c


@dataclass
class GoaiEpochStats:
    epoch: int
    loss: float
    accuracy: float


@dataclass
class GoaiTrainConfig:
    optimizer: str = "adam_cosine"  # or "adam", "sgd"
    lr: float = 1e-3
    batch_size: int = 32
    channel_model: str = "rayleigh"
    snr_db: float = 10.0
    use_equalizer: bool = True


def apply_channel(latents: Tensor, link: LinkConfig, model: str, snr_db: float, rng: Rng,
                  use_equalizer: bool = True) -> Tensor:
    """Send each latent row through an independent channel realization."""
    rows = [
        link_roundtrip(Tensor(latents.data[i], copy=False), link, model, snr_db, rng, use_equalizer)
        for i in range(latents.shape[0])
    ]
    return Tensor(np.stack([r.data for r in rows]), copy=False)


def train_goai(
    model: GoaiModel,
    latents: Tensor,
    labels: LabelBatch,
    link: LinkConfig,
    train_cfg: GoaiTrainConfig,
    epochs: int,
    rng: Rng,
) -> tuple:
    """Channel-aware classifier training on frozen-encoder latents.

    Per batch: fresh fading draw per vector, equalize, classify, step.
    Returns the model and one stats row per epoch.
    """
    if latents.shape[0] != labels.n:
        raise DimensionError(f"{latents.shape[0]} latents vs {labels.n} labels")
    if latents.shape[0] == 0:
        raise ContractError("train_goai needs a non-empty dataset")
    optimizer = Adam(lr=train_cfg.lr) if train_cfg.optimizer.startswith("adam") else None
    history: List[GoaiEpochStats] = []
    for epoch in range(epochs):
        if train_cfg.optimizer == "adam_cosine" and optimizer is not None:
            optimizer.lr = cosine_lr(train_cfg.lr, epoch, epochs)
        order = rng.permutation(labels.n)
        loss_sum = 0.0
        hit_sum = 0.0
        nb = 0
        for start in range(0, labels.n, train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            if idx.size < 2:
                continue
            zb = Tensor(latents.data[idx], copy=False)
            yb = apply_channel(zb, link, train_cfg.channel_model, train_cfg.snr_db, rng,
                               train_cfg.use_equalizer)
            lb = labels.take(idx)
            tape = GradTape()
            logits = goai_forward(model, yb, tape)
            loss = cross_entropy(logits, lb, tape)
            loss_val = loss.item()
            if not math.isfinite(loss_val):
                raise DivergenceError(
                    f"non-finite loss {loss_val} at epoch {epoch}, batch {nb}",
                    diagnostic={"epoch": epoch, "batch": nb, "loss": loss_val},
                )
            grads = backward(loss, tape)
            named = {name: grads[p].data for name, p in model.params.items() if p in grads}
            subset = {name: model.params[name] for name in named}
            if optimizer is not None:
                model.replace_params(optimizer.step(subset, named))
            else:
                model.replace_params(sgd_update(subset, named, train_cfg.lr))
            loss_sum += loss_val
            hit_sum += accuracy(logits, lb)
            nb += 1
        if nb == 0:
            raise ContractError("no batch of size >= 2 could be formed from the dataset")
        history.append(GoaiEpochStats(epoch=epoch, loss=loss_sum / nb, accuracy=hit_sum / nb))
    return model, history
