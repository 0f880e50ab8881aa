"""Semantic encoder: a small convolutional backbone with a dense projection
head, trained so that two augmented views of the same image produce
decorrelated, view-invariant latents.

The objective is built from the empirical cross-correlation matrix between
the standardized view embeddings: the diagonal is pulled toward 1
(invariance) while the off-diagonal entries are pushed toward 0 weighted
by a trade-off factor (redundancy reduction).
"""

from __future__ import annotations

import hashlib
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .augment import AugmentPolicy, ImageBatch, two_views
from .errors import BatchTooSmallError, ContractError, DimensionError, DivergenceError
from .numeric import GradTape, Rng, Tensor, backward, ops
from .optim import Adam


@dataclass(frozen=True)
class EncoderConfig:
    """Architecture of the backbone + projection head.

    The backbone is a chain of 3x3 stride-2 convolutions with GELU,
    followed by global average pooling; the head is three dense layers
    with GELU and whole-batch standardization between them. The final
    dense layer emits the (unstandardized) latent vector.
    """

    in_channels: int = 1
    conv_channels: tuple = (8, 16, 32)
    head_dims: tuple = (64, 128, 256)
    eps: float = 1e-5
    tied_views: bool = True

    @property
    def latent_dim(self) -> int:
        return self.head_dims[-1]

    def digest(self) -> str:
        text = (
            f"encoder-v1 in={self.in_channels} conv={','.join(map(str, self.conv_channels))} "
            f"head={','.join(map(str, self.head_dims))} eps={self.eps!r} tied={self.tied_views}"
        )
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class LatentBatch:
    """n x d latent matrix plus a flag recording whether it was standardized."""

    values: Tensor
    standardized: bool = False

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CrossCorrMatrix:
    """d x d empirical cross-correlation between two standardized batches."""

    values: Tensor

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise DimensionError(f"cross-correlation matrix must be square, got {self.values.shape}")

    @property
    def d(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class RedundancyLossParts:
    """Invariance term, redundancy term, their weight, and the weighted sum."""

    on_diag: Tensor
    off_diag: Tensor
    lam: float
    total: Tensor


def _kaiming_uniform(rng: Rng, shape: tuple, fan_in: int) -> Tensor:
    bound = math.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=int(np.prod(shape))).reshape(shape), copy=False)


class EncoderModel:
    """Parameter store for the encoder; init is reproducible from (config, seed)."""

    def __init__(self, config: EncoderConfig, rng: Rng):
        self.config = config
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()
        prefixes = ("",) if config.tied_views else ("f1.", "f2.")
        for prefix in prefixes:
            cin = config.in_channels
            for i, cout in enumerate(config.conv_channels):
                self.params[f"{prefix}conv{i}.w"] = _kaiming_uniform(rng, (cout, cin, 3, 3), cin * 9)
                self.params[f"{prefix}conv{i}.b"] = Tensor.zeros((cout,))
                cin = cout
            din = config.conv_channels[-1]
            for i, dout in enumerate(config.head_dims):
                self.params[f"{prefix}head{i}.w"] = _kaiming_uniform(rng, (din, dout), din)
                self.params[f"{prefix}head{i}.b"] = Tensor.zeros((dout,))
                din = dout

    def replace_params(self, updates: Dict[str, Tensor]) -> None:
        for name, value in updates.items():
            if name not in self.params:
                raise KeyError(f"unknown parameter {name}")
            self.params[name] = value

    def param_shapes(self) -> "OrderedDict[str, tuple]":
        return OrderedDict((k, v.shape) for k, v in self.params.items())

    def config_digest(self) -> str:
        return self.config.digest()


def forward(model: EncoderModel, x, tape: GradTape | None = None, view: int = 0) -> LatentBatch:
    """Run the encoder on an image batch; returns unstandardized latents.

    `view` selects the parameter set when the config unties the two view
    encoders; with tied weights it is ignored.
    """
    t = Tensor(x.data) if isinstance(x, ImageBatch) else x
    if t.ndim != 4:
        raise DimensionError(f"encoder input must be (n, c, h, w), got shape {t.shape}")
    if t.shape[1] != model.config.in_channels:
        raise DimensionError(
            f"encoder configured for {model.config.in_channels} channels, input has {t.shape[1]}"
        )
    if t.shape[0] < 2:
        raise BatchTooSmallError(f"encoder forward needs a batch of >= 2 images, got {t.shape[0]}")
    prefix = "" if model.config.tied_views else f"f{view + 1}."
    p = model.params
    for i in range(len(model.config.conv_channels)):
        t = ops.conv2d(t, p[f"{prefix}conv{i}.w"], p[f"{prefix}conv{i}.b"], stride=2, pad=1, tape=tape)
        t = ops.gelu(t, tape)
    t = ops.global_avg_pool(t, tape)
    last = len(model.config.head_dims) - 1
    for i in range(len(model.config.head_dims)):
        t = ops.add(ops.matmul(t, p[f"{prefix}head{i}.w"], tape), p[f"{prefix}head{i}.b"], tape)
        if i < last:
            t = ops.gelu(t, tape)
            t = ops.batch_standardize(t, model.config.eps, tape)
    return LatentBatch(values=t, standardized=False)


def standardize_latents(z: LatentBatch, eps: float = 1e-5, tape: GradTape | None = None) -> LatentBatch:
    """Column-standardize a latent batch (mean 0, std 1 up to eps)."""
    return LatentBatch(values=ops.batch_standardize(z.values, eps, tape), standardized=True)


def cross_correlation(z1: LatentBatch, z2: LatentBatch, tape: GradTape | None = None) -> CrossCorrMatrix:
    """Empirical cross-correlation z1^T z2 / n between standardized batches."""
    if not (z1.standardized and z2.standardized):
        raise ContractError("cross_correlation requires standardized latent batches")
    if z1.values.shape != z2.values.shape:
        raise DimensionError(
            f"cross_correlation: latent shapes {z1.values.shape} and {z2.values.shape} differ"
        )
    n = z1.n
    prod = ops.matmul(ops.transpose(z1.values, tape), z2.values, tape)
    return CrossCorrMatrix(values=ops.scale(prod, 1.0 / n, tape))


def _corr_loss_terms(c: Tensor, tape: GradTape | None):
    cd = c.data
    d = cd.shape[0]
    diag = np.diagonal(cd)
    off_mask = ~np.eye(d, dtype=bool)
    on = Tensor(((1.0 - diag) ** 2).sum(), copy=False)
    off = Tensor((cd[off_mask] ** 2).sum(), copy=False)
    if tape is not None:
        def bwd_on(g):
            grad = np.zeros_like(cd)
            np.fill_diagonal(grad, -2.0 * (1.0 - diag))
            return (grad * g,)

        def bwd_off(g):
            return (np.where(off_mask, 2.0 * cd, 0.0) * g,)

        tape.record(on, (c,), bwd_on)
        tape.record(off, (c,), bwd_off)
    return on, off


def scgir_loss(corr: CrossCorrMatrix, lam: float, tape: GradTape | None = None) -> RedundancyLossParts:
    """Invariance + weighted redundancy loss of a cross-correlation matrix:
    sum_i (1 - C_ii)^2 + lam * sum_{i != j} C_ij^2."""
    on, off = _corr_loss_terms(corr.values, tape)
    total = ops.add(on, ops.scale(off, lam, tape), tape)
    return RedundancyLossParts(on_diag=on, off_diag=off, lam=lam, total=total)


def covariance(s: Tensor) -> Tensor:
    """Sample covariance of row vectors with the 1/(K-1) normalization."""
    if s.ndim != 2:
        raise DimensionError(f"covariance expects a K x d matrix, got shape {s.shape}")
    k = s.shape[0]
    if k < 2:
        raise BatchTooSmallError(f"covariance needs at least 2 rows, got {k}")
    centered = s.data - s.data.mean(axis=0)
    return Tensor(centered.T @ centered / (k - 1), copy=False)


def cosine_similarity(a: Tensor, b: Tensor) -> float:
    """a.b / (|a||b|), defined as 0 when either vector is zero."""
    av = a.data.reshape(-1)
    bv = b.data.reshape(-1)
    if av.shape != bv.shape:
        raise DimensionError(f"cosine_similarity: shapes {a.shape} and {b.shape} differ")
    norm = np.linalg.norm(av) * np.linalg.norm(bv)
    if norm == 0.0:
        return 0.0
    return float(np.clip(av @ bv / norm, -1.0, 1.0))


def _mean_row_cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = na * nb
    safe = np.where(denom > 0.0, denom, 1.0)
    cos = np.where(denom > 0.0, (a * b).sum(axis=1) / safe, 0.0)
    return float(np.clip(cos, -1.0, 1.0).mean())


@dataclass
class EncoderEpochStats:
    """Per-epoch training measurements (batch averages)."""

    epoch: int
    loss_total: float
    loss_on: float
    loss_off: float
    cosine_sim: float
    cosine_sim_standardized: float
    diag_mean: float
    offdiag_abs_mean: float


@dataclass
class EncoderTrainConfig:
    lam: float = 5e-4
    lr: float = 1e-4
    batch_size: int = 32
    eps: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


def train_encoder(
    model: EncoderModel,
    images: ImageBatch,
    policy: AugmentPolicy,
    train_cfg: EncoderTrainConfig,
    epochs: int,
    rng: Rng,
) -> tuple:
    """Self-supervised training loop over two-view batches.

    Per batch: augment -> forward both views (shared weights unless the
    config unties them) -> standardize -> cross-correlation -> loss ->
    backward -> Adam step. Aborts with DivergenceError if the loss stops
    being finite. Returns the model and one stats row per epoch.
    """
    if images.n == 0:
        raise ContractError("train_encoder needs a non-empty dataset")
    if train_cfg.batch_size < 2:
        raise ContractError("train_encoder needs batch_size >= 2")
    optimizer = Adam(lr=train_cfg.lr, beta1=train_cfg.beta1, beta2=train_cfg.beta2, eps=train_cfg.adam_eps)
    history: List[EncoderEpochStats] = []
    for epoch in range(epochs):
        order = rng.permutation(images.n)
        sums = np.zeros(7)
        nb = 0
        for start in range(0, images.n, train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            if idx.size < 2:
                continue
            batch = images.take(idx)
            v1, v2 = two_views(batch, policy, rng)
            tape = GradTape()
            z1 = forward(model, v1, tape, view=0)
            z2 = forward(model, v2, tape, view=1)
            z1s = standardize_latents(z1, train_cfg.eps, tape)
            z2s = standardize_latents(z2, train_cfg.eps, tape)
            corr = cross_correlation(z1s, z2s, tape)
            parts = scgir_loss(corr, train_cfg.lam, tape)
            loss_val = parts.total.item()
            if not math.isfinite(loss_val):
                raise DivergenceError(
                    f"non-finite loss {loss_val} at epoch {epoch}, batch {nb}",
                    diagnostic={"epoch": epoch, "batch": nb, "loss_total": loss_val},
                )
            grads = backward(parts.total, tape)
            named = {name: grads[p].data for name, p in model.params.items() if p in grads}
            model.replace_params(optimizer.step(
                {name: model.params[name] for name in named}, named
            ))

            cd = corr.values.data
            offm = ~np.eye(cd.shape[0], dtype=bool)
            sums += (
                loss_val,
                parts.on_diag.item(),
                parts.off_diag.item(),
                _mean_row_cosine(z1.values.data, z2.values.data),
                _mean_row_cosine(z1s.values.data, z2s.values.data),
                float(np.diagonal(cd).mean()),
                float(np.abs(cd[offm]).mean()),
            )
            nb += 1
        if nb == 0:
            raise ContractError("no batch of size >= 2 could be formed from the dataset")
        avg = sums / nb
        history.append(
            EncoderEpochStats(
                epoch=epoch,
                loss_total=avg[0],
                loss_on=avg[1],
                loss_off=avg[2],
                cosine_sim=avg[3],
                cosine_sim_standardized=avg[4],
                diag_mean=avg[5],
                offdiag_abs_mean=avg[6],
            )
        )
    return model, history


def encode_dataset(model: EncoderModel, images: ImageBatch) -> Tensor:
    """Latents for a whole dataset in one pass (frozen model, no tape)."""
    return forward(model, images).values


def dataset_cross_correlation(
    model: EncoderModel, images: ImageBatch, policy: AugmentPolicy, rng: Rng, eps: float = 1e-5
) -> CrossCorrMatrix:
    """Cross-correlation matrix over two fresh views of the full dataset."""
    v1, v2 = two_views(images, policy, rng)
    z1 = standardize_latents(forward(model, v1, view=0), eps)
    z2 = standardize_latents(forward(model, v2, view=1), eps)
    return cross_correlation(z1, z2)
