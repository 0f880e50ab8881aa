"""Differentiable primitives over :class:`Tensor`.

Each op computes eagerly with numpy and, when given a tape, records an
explicit adjoint rule. Broadcasting is limited to the one case the models
need (adding a 1-D bias row to a 2-D batch); everything else requires
exact shape agreement and raises :class:`DimensionError` otherwise.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import BatchTooSmallError, DimensionError
from .tensor import GradTape, Tensor

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def _check_same_shape(opname: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{opname}: shapes {a.shape} and {b.shape} differ")


def add(a: Tensor, b: Tensor, tape: GradTape | None = None) -> Tensor:
    """Elementwise a + b; also accepts a 1-D b broadcast over rows of 2-D a."""
    bias_case = a.ndim == 2 and b.ndim == 1 and b.shape[0] == a.shape[1]
    if not bias_case:
        _check_same_shape("add", a, b)
    out = Tensor(a.data + b.data, copy=False)
    if tape is not None:
        if bias_case:
            tape.record(out, (a, b), lambda g: (g, g.sum(axis=0)))
        else:
            tape.record(out, (a, b), lambda g: (g, g))
    return out


def mul(a: Tensor, b: Tensor, tape: GradTape | None = None) -> Tensor:
    """Elementwise product (Hadamard)."""
    _check_same_shape("mul", a, b)
    out = Tensor(a.data * b.data, copy=False)
    if tape is not None:
        ad, bd = a.data, b.data
        tape.record(out, (a, b), lambda g: (g * bd, g * ad))
    return out


def scale(a: Tensor, c: float, tape: GradTape | None = None) -> Tensor:
    """Multiply by a python constant."""
    out = Tensor(a.data * c, copy=False)
    if tape is not None:
        tape.record(out, (a,), lambda g: (g * c,))
    return out


def matmul(a: Tensor, b: Tensor, tape: GradTape | None = None) -> Tensor:
    """Standard matrix product of two 2-D tensors."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul: inner dimensions disagree for shapes {a.shape} and {b.shape}"
        )
    out = Tensor(a.data @ b.data, copy=False)
    if tape is not None:
        ad, bd = a.data, b.data
        tape.record(out, (a, b), lambda g: (g @ bd.T, ad.T @ g))
    return out


def transpose(a: Tensor, tape: GradTape | None = None) -> Tensor:
    if a.ndim != 2:
        raise DimensionError(f"transpose: expected a 2-D tensor, got shape {a.shape}")
    out = Tensor(a.data.T)
    if tape is not None:
        tape.record(out, (a,), lambda g: (g.T,))
    return out


def sum_all(a: Tensor, tape: GradTape | None = None) -> Tensor:
    """Sum of all elements, as a 0-d tensor."""
    out = Tensor(a.data.sum(), copy=False)
    if tape is not None:
        shape = a.shape
        tape.record(out, (a,), lambda g: (np.broadcast_to(g, shape).copy(),))
    return out


def gelu(x: Tensor, tape: GradTape | None = None) -> Tensor:
    """GELU with the tanh approximation 0.5*x*(1 + tanh(c*(x + a*x^3)))."""
    xd = x.data
    inner = _GELU_C * (xd + _GELU_A * xd ** 3)
    t = np.tanh(inner)
    out = Tensor(0.5 * xd * (1.0 + t), copy=False)
    if tape is not None:
        def bwd(g):
            sech2 = 1.0 - t * t
            d_inner = _GELU_C * (1.0 + 3.0 * _GELU_A * xd ** 2)
            return (g * (0.5 * (1.0 + t) + 0.5 * xd * sech2 * d_inner),)

        tape.record(out, (x,), bwd)
    return out


def prelu(x: Tensor, slope: Tensor, tape: GradTape | None = None) -> Tensor:
    """PReLU with a single learnable slope: x if x >= 0 else slope * x."""
    if slope.size != 1:
        raise DimensionError(f"prelu: slope must be a scalar tensor, got shape {slope.shape}")
    xd = x.data
    a = float(slope.data.reshape(-1)[0])
    neg = xd < 0.0
    out = Tensor(np.where(neg, a * xd, xd), copy=False)
    if tape is not None:
        def bwd(g):
            gx = g * np.where(neg, a, 1.0)
            ga = np.asarray((g * np.where(neg, xd, 0.0)).sum()).reshape(slope.shape)
            return gx, ga

        tape.record(out, (x, slope), bwd)
    return out


def batch_standardize(z: Tensor, eps: float, tape: GradTape | None = None) -> Tensor:
    """Per-column standardization of an n x d batch.

    Subtracts the column mean and divides by (population std + eps). A
    column with zero variance and eps == 0 maps to zeros (0/0 -> 0 by
    convention, so finite inputs always give finite outputs).
    """
    if z.ndim != 2:
        raise DimensionError(f"batch_standardize: expected n x d input, got shape {z.shape}")
    n = z.shape[0]
    if n < 2:
        raise BatchTooSmallError(f"batch_standardize needs at least 2 rows, got {n}")
    zd = z.data
    mu = zd.mean(axis=0)
    sigma = np.sqrt(((zd - mu) ** 2).mean(axis=0))
    denom = sigma + eps
    safe = np.where(denom > 0.0, denom, 1.0)
    y = np.where(denom > 0.0, (zd - mu) / safe, 0.0)
    out = Tensor(y, copy=False)
    if tape is not None:
        def bwd(g):
            gm = g.mean(axis=0)
            gy = (g * y).mean(axis=0)
            # d/dx of (x - mean)/(std + eps); the std term vanishes where
            # the column is constant (y == 0 there).
            corr = np.where(sigma > 0.0, gy / np.where(sigma > 0.0, sigma, 1.0), 0.0)
            gx = np.where(denom > 0.0, (g - gm) / safe - y * corr, 0.0)
            return (gx,)

        tape.record(out, (z,), bwd)
    return out


def log_softmax(x: Tensor, tape: GradTape | None = None) -> Tensor:
    """Row-wise log-softmax, stabilized by max subtraction."""
    if x.ndim != 2:
        raise DimensionError(f"log_softmax: expected n x C input, got shape {x.shape}")
    xd = x.data
    shifted = xd - xd.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    y = shifted - lse
    out = Tensor(y, copy=False)
    if tape is not None:
        def bwd(g):
            p = np.exp(y)
            return (g - p * g.sum(axis=1, keepdims=True),)

        tape.record(out, (x,), bwd)
    return out


def conv2d(
    x: Tensor,
    w: Tensor,
    b: Tensor,
    stride: int = 1,
    pad: int = 0,
    tape: GradTape | None = None,
) -> Tensor:
    """2-D convolution (cross-correlation) with zero padding.

    x: (n, c_in, h, w), w: (c_out, c_in, kh, kw), b: (c_out,).
    """
    if x.ndim != 4 or w.ndim != 4 or b.ndim != 1:
        raise DimensionError(
            f"conv2d: expected 4-D input/kernel and 1-D bias, got {x.shape}, {w.shape}, {b.shape}"
        )
    n, cin, h, wd = x.shape
    cout, cin_k, kh, kw = w.shape
    if cin != cin_k or b.shape[0] != cout:
        raise DimensionError(
            f"conv2d: channel mismatch between input {x.shape}, kernel {w.shape}, bias {b.shape}"
        )
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise DimensionError(f"conv2d: kernel {w.shape} does not fit input {x.shape} with pad {pad}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    cols = np.empty((n, cin, kh, kw, oh, ow))
    for r in range(kh):
        for c in range(kw):
            cols[:, :, r, c] = xp[:, :, r : r + stride * oh : stride, c : c + stride * ow : stride]
    cols2 = cols.reshape(n, cin * kh * kw, oh * ow)
    wm = w.data.reshape(cout, cin * kh * kw)
    out_arr = np.einsum("op,npq->noq", wm, cols2).reshape(n, cout, oh, ow)
    out_arr += b.data[None, :, None, None]
    out = Tensor(out_arr, copy=False)

    if tape is not None:
        def bwd(g):
            gm = g.reshape(n, cout, oh * ow)
            gw = np.einsum("noq,npq->op", gm, cols2).reshape(w.shape)
            gb = g.sum(axis=(0, 2, 3))
            gcols = np.einsum("op,noq->npq", wm, gm).reshape(n, cin, kh, kw, oh, ow)
            gxp = np.zeros_like(xp)
            for r in range(kh):
                for c in range(kw):
                    gxp[:, :, r : r + stride * oh : stride, c : c + stride * ow : stride] += gcols[
                        :, :, r, c
                    ]
            gx = gxp[:, :, pad : pad + h, pad : pad + wd] if pad else gxp
            return gx, gw, gb

        tape.record(out, (x, w, b), bwd)
    return out


def global_avg_pool(x: Tensor, tape: GradTape | None = None) -> Tensor:
    """Mean over the spatial dims: (n, c, h, w) -> (n, c)."""
    if x.ndim != 4:
        raise DimensionError(f"global_avg_pool: expected 4-D input, got shape {x.shape}")
    n, c, h, w = x.shape
    out = Tensor(x.data.mean(axis=(2, 3)), copy=False)
    if tape is not None:
        def bwd(g):
            return (np.broadcast_to(g[:, :, None, None] / (h * w), (n, c, h, w)).copy(),)

        tape.record(out, (x,), bwd)
    return out
