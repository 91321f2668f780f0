"""Differentiable layer primitives: conv2d, batch norm, dense, activations,
pixel shuffle and the cross-entropy head.

Every op returns a Tensor wired with its backward closure. Shapes follow the
NCHW convention throughout.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .tensor import ConfigurationError, DimensionError, Tensor

BN_EPS = 1e-5
BN_MOMENTUM = 0.9
LEAKY_ALPHA = 0.2


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    if x.data.ndim != 4:
        raise DimensionError(f"conv2d input must be 4-d NCHW, got ndim={x.data.ndim}")
    if weight.data.ndim != 4 or weight.data.shape[2] != weight.data.shape[3]:
        raise DimensionError(f"conv2d weight must be (Cout,Cin,k,k), got {weight.data.shape}")
    n, c, h, w = x.data.shape
    cout, cin, k, _ = weight.data.shape
    if c != cin:
        raise DimensionError(f"conv2d channel axis mismatch: input has {c} channels, weight expects {cin}")
    if bias.data.shape != (cout,):
        raise DimensionError(f"conv2d bias must have shape ({cout},), got {bias.data.shape}")
    if h + 2 * pad < k or w + 2 * pad < k:
        raise DimensionError(f"padded spatial extent ({h + 2 * pad}x{w + 2 * pad}) smaller than kernel {k}")

    ho, wo = kernels.conv_out_hw(h, w, k, stride, pad)
    cols = kernels.im2col(x.data, k, stride, pad)  # (N, C*k*k, Ho*Wo)
    # fold the batch into the GEMM columns: one large matmul beats N small ones
    ckk, l = cin * k * k, ho * wo
    cols_flat = np.ascontiguousarray(cols.transpose(1, 0, 2)).reshape(ckk, n * l)
    w2 = weight.data.reshape(cout, ckk)
    out = (w2 @ cols_flat).reshape(cout, n, l).transpose(1, 0, 2)
    out = out.reshape(n, cout, ho, wo) + bias.data.reshape(1, cout, 1, 1)

    def bw(g):
        gm = np.ascontiguousarray(g.reshape(n, cout, l).transpose(1, 0, 2)).reshape(cout, n * l)
        if bias.requires_grad:
            bias.accumulate_grad(gm.sum(axis=1))
        if weight.requires_grad:
            weight.accumulate_grad((gm @ cols_flat.T).reshape(weight.data.shape))
        if x.requires_grad:
            dcols = (w2.T @ gm).reshape(ckk, n, l).transpose(1, 0, 2)
            x.accumulate_grad(kernels.col2im(dcols, x.data.shape, k, stride, pad))

    return Tensor._make(out, (x, weight, bias), bw)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    eps: float = BN_EPS,
    momentum: float = BN_MOMENTUM,
) -> Tensor:
    """Per-channel normalization over (N,H,W). Running stats are plain arrays
    mutated in place during training."""
    if x.data.ndim != 4:
        raise DimensionError(f"batch_norm input must be 4-d NCHW, got ndim={x.data.ndim}")
    n, c, h, w = x.data.shape
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise DimensionError(f"batch_norm affine params must have shape ({c},)")

    gshape = (1, c, 1, 1)
    if training:
        m = n * h * w
        if m < 2:
            raise ValueError("batch_norm train mode needs at least 2 samples per channel (degenerate statistics)")
        mu = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mu
        running_var *= momentum
        running_var += (1.0 - momentum) * var
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu.reshape(gshape)) * inv_std.reshape(gshape)
        out = gamma.data.reshape(gshape) * xhat + beta.data.reshape(gshape)

        def bw(g):
            dbeta = g.sum(axis=(0, 2, 3))
            dgamma = (g * xhat).sum(axis=(0, 2, 3))
            if beta.requires_grad:
                beta.accumulate_grad(dbeta)
            if gamma.requires_grad:
                gamma.accumulate_grad(dgamma)
            if x.requires_grad:
                coeff = (gamma.data * inv_std).reshape(gshape)
                dx = coeff * (g - dbeta.reshape(gshape) / m - xhat * dgamma.reshape(gshape) / m)
                x.accumulate_grad(dx.astype(x.data.dtype))

        return Tensor._make(out.astype(x.data.dtype), (x, gamma, beta), bw)

    inv_std = 1.0 / np.sqrt(running_var + eps)
    xhat = (x.data - running_mean.reshape(gshape)) * inv_std.reshape(gshape)
    out = gamma.data.reshape(gshape) * xhat + beta.data.reshape(gshape)

    def bw_eval(g):
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=(0, 2, 3)))
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).sum(axis=(0, 2, 3)))
        if x.requires_grad:
            x.accumulate_grad((g * (gamma.data * inv_std).reshape(gshape)).astype(x.data.dtype))

    return Tensor._make(out.astype(x.data.dtype), (x, gamma, beta), bw_eval)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError(f"dense input must be 2-d (N,D), got ndim={x.data.ndim}")
    n, d = x.data.shape
    if weight.data.shape[0] != d:
        raise DimensionError(f"dense weight rows ({weight.data.shape[0]}) do not match input features ({d})")
    out = x.data @ weight.data + bias.data

    def bw(g):
        if bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=0))
        if weight.requires_grad:
            weight.accumulate_grad(x.data.T @ g)
        if x.requires_grad:
            x.accumulate_grad(g @ weight.data.T)

    return Tensor._make(out, (x, weight, bias), bw)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Channel-to-space rearrangement: (N, C*r^2, H, W) -> (N, C, rH, rW)."""
    if r < 1:
        raise ConfigurationError(f"pixel_shuffle factor must be positive, got {r}")
    n, c2, h, w = x.data.shape
    if c2 % (r * r) != 0:
        raise DimensionError(f"pixel_shuffle channel axis {c2} not divisible by r^2={r * r}")
    c = c2 // (r * r)
    out = (
        x.data.reshape(n, c, r, r, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, c, h * r, w * r)
    )

    def bw(g):
        dx = (
            g.reshape(n, c, h, r, w, r)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, c2, h, w)
        )
        x.accumulate_grad(np.ascontiguousarray(dx))

    return Tensor._make(np.ascontiguousarray(out), (x,), bw)


def leaky_relu(x: Tensor, alpha: float = LEAKY_ALPHA) -> Tensor:
    neg = x.data < 0
    out = np.where(neg, alpha * x.data, x.data)

    def bw(g):
        x.accumulate_grad(np.where(neg, alpha * g, g))

    return Tensor._make(out, (x,), bw)


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """Per-channel learnable slope, shape (C,), applied on NCHW input."""
    if x.data.ndim != 4:
        raise DimensionError(f"prelu input must be 4-d NCHW, got ndim={x.data.ndim}")
    c = x.data.shape[1]
    if slope.data.shape != (c,):
        raise DimensionError(f"prelu slope must have shape ({c},), got {slope.data.shape}")
    neg = x.data < 0
    a = slope.data.reshape(1, c, 1, 1)
    out = np.where(neg, a * x.data, x.data)

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(np.where(neg, a * g, g))
        if slope.requires_grad:
            slope.accumulate_grad(np.where(neg, g * x.data, 0.0).sum(axis=(0, 2, 3)))

    return Tensor._make(out, (x, slope), bw)


def activation(kind: str, x: Tensor, param: Tensor | None = None) -> Tensor:
    if kind == "prelu":
        if param is None:
            raise ConfigurationError("prelu requires a learnable slope tensor")
        return prelu(x, param)
    if kind == "leaky_relu":
        return leaky_relu(x)
    if kind == "tanh":
        return x.tanh()
    if kind == "sigmoid":
        return x.sigmoid()
    raise ConfigurationError(f"unknown activation kind {kind!r}")


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Softmax negative log-likelihood, averaged over the batch."""
    if logits.data.ndim != 2:
        raise DimensionError(f"cross_entropy logits must be 2-d (N,m), got ndim={logits.data.ndim}")
    n, m = logits.data.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise DimensionError(f"labels must have shape ({n},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= m:
        raise ValueError(f"label out of range [0, {m})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsumexp
    loss = -logp[np.arange(n), labels].mean()

    def bw(g):
        probs = np.exp(logp)
        probs[np.arange(n), labels] -= 1.0
        logits.accumulate_grad((g / n) * probs.astype(logits.data.dtype))

    return Tensor._make(np.asarray(loss, dtype=logits.data.dtype), (logits,), bw)
