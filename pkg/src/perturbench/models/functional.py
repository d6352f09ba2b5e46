"""Differentiable building blocks shared by the bundled classifiers."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, concat, layer_norm_lastaxis, tensor


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax. The row max is treated as a constant,
    which is exactly the usual shift-invariance of softmax."""
    if axis == -1 or axis == t.ndim - 1:
        return t.softmax_lastaxis()
    shift = t - np.max(t.data, axis=axis, keepdims=True)
    e = shift.exp()
    return e / e.sum(axis=axis, keepdims=True)


def log_sum_exp(t: Tensor, axis: int = -1) -> Tensor:
    m = np.max(t.data, axis=axis, keepdims=True)
    return (t - m).exp().sum(axis=axis, keepdims=True).log() + m


def cross_entropy(logits: Tensor, labels: np.ndarray, reduction: str = "mean") -> Tensor:
    """Cross-entropy over the batch, via max-subtracted log-sum-exp.

    reduction="sum" keeps per-sample gradients unscaled, which lets callers
    batch independent samples through one backward pass.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    onehot = np.zeros((n, k), dtype=np.float64)
    onehot[np.arange(n), labels] = 1.0
    lse = log_sum_exp(logits, axis=-1).reshape(n)
    picked = (logits * onehot).sum(axis=-1)
    per_sample = lse - picked
    return per_sample.sum() if reduction == "sum" else per_sample.mean()


def attention(q, k, v):
    """Scaled dot-product attention: softmax(Q K^T / sqrt(d_k)) V.

    Accepts plain arrays (returns an array) or Tensors (returns a Tensor,
    differentiable). Matrices may carry leading batch/head axes; the last two
    axes are (tokens, features).
    """
    plain = not isinstance(q, Tensor)
    qt = tensor(q) if plain else q
    kt = tensor(k) if plain else k
    vt = tensor(v) if plain else v
    if qt.shape[-1] != kt.shape[-1] or kt.shape[-2] != vt.shape[-2]:
        raise ValueError(f"non-conforming attention shapes {qt.shape} {kt.shape} {vt.shape}")
    d_k = qt.shape[-1]
    axes = list(range(kt.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    scores = (qt @ kt.transpose(axes)) * (1.0 / np.sqrt(d_k))
    probs = softmax(scores, axis=-1)
    out = probs @ vt
    return out.data if plain else out


def attention_with_probs(q: Tensor, k: Tensor, v: Tensor):
    """Like attention() on Tensors, but also returns the probability Tensor."""
    d_k = q.shape[-1]
    axes = list(range(k.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    scores = (q @ k.transpose(axes)) * (1.0 / np.sqrt(d_k))
    probs = softmax(scores, axis=-1)
    return probs @ v, probs


def multi_head_attention(x, w_q, w_k, w_v, w_o, heads: int):
    """Multi-head self-attention: heads attend in d/h-dimensional subspaces,
    their outputs are concatenated and mixed by w_o.

    With heads=1 and w_o the identity this reduces to plain attention().
    Accepts arrays or Tensors like attention().
    """
    plain = not isinstance(x, Tensor)
    xt = tensor(x) if plain else x
    args = [tensor(a) if not isinstance(a, Tensor) else a for a in (w_q, w_k, w_v, w_o)]
    w_q, w_k, w_v, w_o = args
    d = xt.shape[-1]
    if d % heads != 0:
        raise ValueError(f"embed dim {d} not divisible by {heads} heads")
    dh = d // heads
    q, k, v = xt @ w_q, xt @ w_k, xt @ w_v
    outs = []
    for i in range(heads):
        sl = slice(i * dh, (i + 1) * dh)
        outs.append(attention(q[..., sl], k[..., sl], v[..., sl]))
    out = concat(outs, axis=-1) @ w_o
    return out.data if plain else out


def layer_norm(t: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    return layer_norm_lastaxis(t, gain, bias, eps)
