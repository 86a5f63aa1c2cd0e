"""Dense float64 kernels with hand-derived backward passes.

Every trainable operation comes as a forward/backward pair; backwards are
exact analytic gradients and are finite-difference checked in the test
suite. There is no autodiff graph: callers thread the cached forward
quantities into the matching backward themselves.

All arrays are float64 (token ids int64). Functions are pure and
deterministic: identical inputs give bitwise-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllIgnoredError,
    IndexOutOfRangeError,
    OddDimensionError,
    ShapeMismatchError,
)

# Additive bias for masked attention keys. Large enough that exp underflows
# to exactly 0 after max subtraction, finite so fully-masked rows stay NaN-free.
MASK_BIAS = -1e30


# ---------------------------------------------------------------------------
# matmul


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product for 2-D operands with an explicit shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatchError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    return a @ b


def matmul_backward(
    grad_out: np.ndarray, a: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """d(a@b) w.r.t. a and b: (g @ b^T, a^T @ g)."""
    return grad_out @ b.T, a.T @ grad_out


# ---------------------------------------------------------------------------
# softmax


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise (last axis) softmax with max subtraction for stability."""
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(grad_out: np.ndarray, softmax_out: np.ndarray) -> np.ndarray:
    """dx = s * (g - sum(g * s)) along the softmax axis."""
    inner = (grad_out * softmax_out).sum(axis=-1, keepdims=True)
    return softmax_out * (grad_out - inner)


# ---------------------------------------------------------------------------
# layer normalization

LayerNormCache = tuple[np.ndarray, np.ndarray, np.ndarray]


def layer_norm(
    x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5
) -> tuple[np.ndarray, LayerNormCache]:
    """Normalize the last axis to zero mean / unit variance, then scale and
    shift: y = gamma * (x - mu) / sqrt(var + eps) + beta."""
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma)


def layer_norm_backward(
    grad_out: np.ndarray, cache: LayerNormCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dgamma, dbeta); parameter grads sum over leading axes."""
    xhat, inv_std, gamma = cache
    lead = tuple(range(grad_out.ndim - 1))
    dgamma = (grad_out * xhat).sum(axis=lead)
    dbeta = grad_out.sum(axis=lead)
    dxhat = grad_out * gamma
    # dx = (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)) / std
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


# ---------------------------------------------------------------------------
# relu


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Subgradient 0 at x == 0."""
    return grad_out * (x > 0.0)


# ---------------------------------------------------------------------------
# embedding


def embedding_forward(ids: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Row gather: out[i] = table[ids[i]]."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexOutOfRangeError(
            f"token ids outside [0, {table.shape[0]}): min {ids.min()}, max {ids.max()}"
        )
    return table[ids]


def embedding_backward(grad_out: np.ndarray, ids: np.ndarray, vocab_size: int) -> np.ndarray:
    """Scatter-add rows of grad_out into a zero table; duplicates accumulate."""
    ids = np.asarray(ids, dtype=np.int64)
    dtable = np.zeros((vocab_size, grad_out.shape[-1]), dtype=np.float64)
    np.add.at(dtable, ids, grad_out)
    return dtable


# ---------------------------------------------------------------------------
# positional encoding


def positional_encoding(max_len: int, d_model: int) -> np.ndarray:
    """Constant sinusoidal table: PE[p, 2i] = sin(p / 10000^(2i/d)),
    PE[p, 2i+1] = cos of the same argument."""
    if d_model % 2 != 0:
        raise OddDimensionError(f"d_model must be even, got {d_model}")
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    inv_freq = 10000.0 ** (-np.arange(0, d_model, 2, dtype=np.float64) / d_model)
    angles = pos * inv_freq[None, :]
    pe = np.empty((max_len, d_model), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


# ---------------------------------------------------------------------------
# scaled dot-product attention

AttentionCache = tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]


def scaled_dot_attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    mask: np.ndarray | None = None,
) -> tuple[np.ndarray, AttentionCache]:
    """softmax(q k^T / sqrt(dh) + mask bias) v over the last two axes.

    Leading axes broadcast, so a single [L, dh] head and a batched
    [B, h, L, dh] stack share this code path. ``mask`` is boolean over key
    positions (True = attend), broadcastable to the score shape; masked
    keys receive MASK_BIAS before the softmax and end up with weight 0.
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if k.shape != v.shape:
        raise ShapeMismatchError(f"k {k.shape} and v {v.shape} must match")
    if q.shape[-1] != k.shape[-1]:
        raise ShapeMismatchError(f"q feature dim {q.shape[-1]} != k feature dim {k.shape[-1]}")
    dh = q.shape[-1]
    scale = 1.0 / np.sqrt(dh)
    scores = (q @ np.swapaxes(k, -1, -2)) * scale
    if mask is not None:
        scores = np.where(np.asarray(mask, dtype=bool), scores, scores + MASK_BIAS)
    weights = softmax_rows(scores)
    out = weights @ v
    return out, (q, k, v, weights, scale)


def attention_backward(
    grad_out: np.ndarray, cache: AttentionCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients w.r.t. q, k, v. Masked keys carry weight 0, so the softmax
    backward zeroes their score gradients automatically."""
    q, k, v, weights, scale = cache
    dv = np.swapaxes(weights, -1, -2) @ grad_out
    dweights = grad_out @ np.swapaxes(v, -1, -2)
    dscores = softmax_backward(dweights, weights) * scale
    dq = dscores @ k
    dk = np.swapaxes(dscores, -1, -2) @ q
    return dq, dk, dv


# ---------------------------------------------------------------------------
# sparse categorical cross-entropy


def sparse_ce_loss(
    logits: np.ndarray, labels: np.ndarray, ignore: int = -1
) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood over rows whose label is not the ignore
    sentinel; returns (loss, dloss/dlogits). Sentinel rows get zero gradient.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.ndim != 1 or logits.shape[0] != labels.shape[0]:
        raise ShapeMismatchError(f"logits {logits.shape} vs labels {labels.shape}")
    valid = labels != ignore
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise AllIgnoredError("no rows with a real label")
    num_classes = logits.shape[1]
    real = labels[valid]
    if real.min() < 0 or real.max() >= num_classes:
        raise IndexOutOfRangeError(f"labels outside [0, {num_classes})")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    rows = np.flatnonzero(valid)
    loss = -log_probs[rows, real].mean()

    grad = np.zeros_like(logits)
    grad[rows] = np.exp(log_probs[rows])
    grad[rows, real] -= 1.0
    grad[rows] /= n_valid
    return float(loss), grad


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Per-parameter optimizer state with canonical hyperparameters."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: np.ndarray, lr: float = 1e-3) -> "AdamState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param), lr=lr)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update. Mutates the moment buffers and step
    counter in ``state`` and returns the new parameter array."""
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ShapeMismatchError(
            f"param {param.shape}, grad {grad.shape}, state {state.m.shape} must all match"
        )
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return param - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
