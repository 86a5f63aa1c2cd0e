"""Transformer encoder for per-position 3-class sequence labeling.

Post-norm residual blocks over embedded, sinusoidally position-encoded
token windows:

    x = LN(x + MultiHeadAttention(x))
    x = LN(x + FeedForward(x))

followed by a linear head producing one 3-way logit row per position.
Parameters live in a flat name -> float64 array dict; ``backward`` returns
a gradient dict with the same keys, hand-derived and finite-difference
checked end to end in the tests.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import (
    CorruptCheckpointError,
    IndexOutOfRangeError,
    InvalidConfigError,
    ShapeMismatchError,
    StaleCacheError,
    VersionMismatchError,
)
from .nncore import (
    attention_backward,
    embedding_backward,
    embedding_forward,
    layer_norm,
    layer_norm_backward,
    positional_encoding,
    relu,
    relu_backward,
    scaled_dot_attention,
    softmax_rows,
)

Params = dict[str, np.ndarray]


@dataclass
class ModelConfig:
    d_model: int = 64
    num_heads: int = 4
    num_blocks: int = 2
    ffn_dim: int = 128
    vocab_size: int = 22
    num_classes: int = 3
    max_len: int = 15
    dropout: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.d_model < 2 or self.d_model % 2 != 0:
            raise InvalidConfigError(f"d_model must be a positive even integer, got {self.d_model}")
        if self.num_heads < 1 or self.d_model % self.num_heads != 0:
            raise InvalidConfigError(
                f"num_heads ({self.num_heads}) must divide d_model ({self.d_model})"
            )
        if self.num_blocks < 1 or self.ffn_dim < 1 or self.max_len < 1:
            raise InvalidConfigError("num_blocks, ffn_dim, and max_len must be >= 1")
        if self.num_classes != 3:
            raise InvalidConfigError(f"num_classes is fixed at 3, got {self.num_classes}")
        if self.vocab_size < 2:
            raise InvalidConfigError(f"vocab_size must cover PAD and UNK, got {self.vocab_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfigError(f"dropout must lie in [0, 1), got {self.dropout}")


def param_spec(config: ModelConfig) -> list[tuple[str, tuple[int, ...], str]]:
    """Ordered (name, shape, init kind) for every learnable tensor."""
    d, f = config.d_model, config.ffn_dim
    spec: list[tuple[str, tuple[int, ...], str]] = [
        ("embed.table", (config.vocab_size, d), "glorot")
    ]
    for i in range(config.num_blocks):
        p = f"block{i}"
        for name in ("wq", "wk", "wv", "wo"):
            spec.append((f"{p}.attn.{name}", (d, d), "glorot"))
            spec.append((f"{p}.attn.b{name[1]}", (d,), "zeros"))
        spec.append((f"{p}.ln1.gamma", (d,), "ones"))
        spec.append((f"{p}.ln1.beta", (d,), "zeros"))
        spec.append((f"{p}.ffn.w1", (d, f), "glorot"))
        spec.append((f"{p}.ffn.b1", (f,), "zeros"))
        spec.append((f"{p}.ffn.w2", (f, d), "glorot"))
        spec.append((f"{p}.ffn.b2", (d,), "zeros"))
        spec.append((f"{p}.ln2.gamma", (d,), "ones"))
        spec.append((f"{p}.ln2.beta", (d,), "zeros"))
    spec.append(("head.w", (d, config.num_classes), "glorot"))
    spec.append(("head.b", (config.num_classes,), "zeros"))
    return spec


def init_params(config: ModelConfig) -> Params:
    """Glorot-uniform weights, zero biases, unit gammas; fully determined
    by config.seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    params: Params = {}
    for name, shape, kind in param_spec(config):
        if kind == "glorot":
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
        elif kind == "ones":
            params[name] = np.ones(shape, dtype=np.float64)
        else:
            params[name] = np.zeros(shape, dtype=np.float64)
    return params


def _split_heads(x2d: np.ndarray, b: int, l: int, h: int) -> np.ndarray:
    """[B*L, D] -> [B, h, L, dh]"""
    dh = x2d.shape[1] // h
    return x2d.reshape(b, l, h, dh).transpose(0, 2, 1, 3)


def _merge_heads(x4d: np.ndarray) -> np.ndarray:
    """[B, h, L, dh] -> [B*L, D]"""
    b, h, l, dh = x4d.shape
    return x4d.transpose(0, 2, 1, 3).reshape(b * l, h * dh)


def forward(
    params: Params,
    config: ModelConfig,
    tokens: np.ndarray,
    mask: np.ndarray,
    train: bool = False,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict]:
    """Run the encoder; returns (logits [B, L, num_classes], cache).

    Padded positions are excluded from attention keys via ``mask``; their
    logits are computed but carry no meaning and must be ignored by the
    caller (the loss does this through the label sentinel).
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    if tokens.ndim != 2 or tokens.shape != mask.shape:
        raise ShapeMismatchError(f"tokens {tokens.shape} and mask {mask.shape} must be [B, L]")
    b, l = tokens.shape
    if l > config.max_len:
        raise ShapeMismatchError(f"sequence length {l} exceeds max_len {config.max_len}")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= config.vocab_size):
        raise IndexOutOfRangeError(f"token ids outside [0, {config.vocab_size})")
    d, h = config.d_model, config.num_heads
    drop = config.dropout if train else 0.0
    if drop > 0.0 and dropout_rng is None:
        dropout_rng = np.random.default_rng(config.seed)

    emb2d = embedding_forward(tokens.ravel(), params["embed.table"])
    x = emb2d.reshape(b, l, d) + positional_encoding(config.max_len, d)[:l]

    key_mask = mask[:, None, None, :]
    blocks = []
    for i in range(config.num_blocks):
        p = f"block{i}"
        x2d = x.reshape(b * l, d)
        q2 = x2d @ params[f"{p}.attn.wq"] + params[f"{p}.attn.bq"]
        k2 = x2d @ params[f"{p}.attn.wk"] + params[f"{p}.attn.bk"]
        v2 = x2d @ params[f"{p}.attn.wv"] + params[f"{p}.attn.bv"]
        att, att_cache = scaled_dot_attention(
            _split_heads(q2, b, l, h), _split_heads(k2, b, l, h), _split_heads(v2, b, l, h),
            key_mask,
        )
        merged = _merge_heads(att)
        proj = (merged @ params[f"{p}.attn.wo"] + params[f"{p}.attn.bo"]).reshape(b, l, d)
        drop_attn = None
        if drop > 0.0:
            drop_attn = (dropout_rng.random(proj.shape) >= drop) / (1.0 - drop)
            proj = proj * drop_attn
        y1, ln1_cache = layer_norm(x + proj, params[f"{p}.ln1.gamma"], params[f"{p}.ln1.beta"])

        y2d = y1.reshape(b * l, d)
        pre = y2d @ params[f"{p}.ffn.w1"] + params[f"{p}.ffn.b1"]
        act = relu(pre)
        ffn = (act @ params[f"{p}.ffn.w2"] + params[f"{p}.ffn.b2"]).reshape(b, l, d)
        drop_ffn = None
        if drop > 0.0:
            drop_ffn = (dropout_rng.random(ffn.shape) >= drop) / (1.0 - drop)
            ffn = ffn * drop_ffn
        x, ln2_cache = layer_norm(y1 + ffn, params[f"{p}.ln2.gamma"], params[f"{p}.ln2.beta"])
        blocks.append(
            {
                "x2d": x2d,
                "att_cache": att_cache,
                "merged": merged,
                "drop_attn": drop_attn,
                "ln1": ln1_cache,
                "y2d": y2d,
                "pre": pre,
                "act": act,
                "drop_ffn": drop_ffn,
                "ln2": ln2_cache,
            }
        )

    xf2d = x.reshape(b * l, d)
    logits = (xf2d @ params["head.w"] + params["head.b"]).reshape(b, l, config.num_classes)
    cache = {
        "kind": "encoder-forward",
        "params": params,
        "config": config,
        "tokens": tokens,
        "shape": (b, l),
        "blocks": blocks,
        "xf2d": xf2d,
    }
    return logits, cache


def backward(cache: dict, grad_logits: np.ndarray) -> Params:
    """Exact parameter gradients for the forward pass that built ``cache``."""
    if not isinstance(cache, dict) or cache.get("kind") != "encoder-forward":
        raise StaleCacheError("backward needs the cache returned by forward")
    config: ModelConfig = cache["config"]
    params = cache["params"]
    b, l = cache["shape"]
    d, h = config.d_model, config.num_heads
    grad_logits = np.asarray(grad_logits, dtype=np.float64)
    if grad_logits.shape != (b, l, config.num_classes):
        raise StaleCacheError(
            f"grad_logits {grad_logits.shape} does not match forward output "
            f"{(b, l, config.num_classes)}"
        )

    grads: Params = {}
    g2 = grad_logits.reshape(b * l, config.num_classes)
    grads["head.w"] = cache["xf2d"].T @ g2
    grads["head.b"] = g2.sum(axis=0)
    dx = (g2 @ params["head.w"].T).reshape(b, l, d)

    for i in reversed(range(config.num_blocks)):
        p = f"block{i}"
        blk = cache["blocks"][i]

        dr2, dgamma2, dbeta2 = layer_norm_backward(dx, blk["ln2"])
        grads[f"{p}.ln2.gamma"] = dgamma2
        grads[f"{p}.ln2.beta"] = dbeta2
        dy1 = dr2.copy()
        dffn = dr2 if blk["drop_ffn"] is None else dr2 * blk["drop_ffn"]
        dffn2d = dffn.reshape(b * l, d)
        grads[f"{p}.ffn.w2"] = blk["act"].T @ dffn2d
        grads[f"{p}.ffn.b2"] = dffn2d.sum(axis=0)
        dact = dffn2d @ params[f"{p}.ffn.w2"].T
        dpre = relu_backward(dact, blk["pre"])
        grads[f"{p}.ffn.w1"] = blk["y2d"].T @ dpre
        grads[f"{p}.ffn.b1"] = dpre.sum(axis=0)
        dy1 += (dpre @ params[f"{p}.ffn.w1"].T).reshape(b, l, d)

        dr1, dgamma1, dbeta1 = layer_norm_backward(dy1, blk["ln1"])
        grads[f"{p}.ln1.gamma"] = dgamma1
        grads[f"{p}.ln1.beta"] = dbeta1
        dx = dr1.copy()
        dproj = dr1 if blk["drop_attn"] is None else dr1 * blk["drop_attn"]
        dproj2d = dproj.reshape(b * l, d)
        grads[f"{p}.attn.wo"] = blk["merged"].T @ dproj2d
        grads[f"{p}.attn.bo"] = dproj2d.sum(axis=0)
        datt = _split_heads(dproj2d @ params[f"{p}.attn.wo"].T, b, l, h)
        dqh, dkh, dvh = attention_backward(datt, blk["att_cache"])
        dq2, dk2, dv2 = _merge_heads(dqh), _merge_heads(dkh), _merge_heads(dvh)
        x2d = blk["x2d"]
        grads[f"{p}.attn.wq"] = x2d.T @ dq2
        grads[f"{p}.attn.bq"] = dq2.sum(axis=0)
        grads[f"{p}.attn.wk"] = x2d.T @ dk2
        grads[f"{p}.attn.bk"] = dk2.sum(axis=0)
        grads[f"{p}.attn.wv"] = x2d.T @ dv2
        grads[f"{p}.attn.bv"] = dv2.sum(axis=0)
        dx2d = (
            dq2 @ params[f"{p}.attn.wq"].T
            + dk2 @ params[f"{p}.attn.wk"].T
            + dv2 @ params[f"{p}.attn.wv"].T
        )
        dx += dx2d.reshape(b, l, d)

    grads["embed.table"] = embedding_backward(
        dx.reshape(b * l, d), cache["tokens"].ravel(), config.vocab_size
    )
    return grads


def predict(
    params: Params, config: ModelConfig, tokens: np.ndarray, mask: np.ndarray
) -> np.ndarray:
    """Per-position argmax class indices [B, L]; ties go to the lowest index."""
    logits, _ = forward(params, config, tokens, mask, train=False)
    return np.argmax(logits, axis=-1)


def predict_probs(
    params: Params, config: ModelConfig, tokens: np.ndarray, mask: np.ndarray
) -> np.ndarray:
    """Per-position class probabilities [B, L, num_classes]."""
    logits, _ = forward(params, config, tokens, mask, train=False)
    return softmax_rows(logits)


# ---------------------------------------------------------------------------
# checkpoint file format
#
# One file: a single-line canonical JSON header (config, tensor manifest
# with name/shape/byte offset, format version, RNG seed), then raw
# little-endian float64 tensor data in manifest order. save -> load -> save
# is byte-identical.

CHECKPOINT_FORMAT = "pssp-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, params: Params, config: ModelConfig) -> None:
    """Atomically write params + config; see module notes for the layout."""
    spec = param_spec(config)
    manifest = []
    offset = 0
    blobs = []
    for name, shape, _ in spec:
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        if arr.shape != shape:
            raise ShapeMismatchError(f"parameter {name} has shape {arr.shape}, expected {shape}")
        manifest.append({"name": name, "shape": list(shape), "offset": offset})
        blob = arr.tobytes(order="C")
        blobs.append(blob)
        offset += len(blob)
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "seed": config.seed,
        "config": asdict(config),
        "manifest": manifest,
    }
    payload = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("ascii")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
        fh.write(b"\n")
        for blob in blobs:
            fh.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path: str | Path) -> tuple[Params, ModelConfig]:
    """Read a checkpoint, validating format version and tensor manifest."""
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise CorruptCheckpointError(f"{path}: no header line")
    try:
        header: dict[str, Any] = json.loads(raw[:nl].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: unreadable header ({exc})") from None
    if not isinstance(header, dict) or header.get("format") != CHECKPOINT_FORMAT:
        raise CorruptCheckpointError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if header.get("version") != CHECKPOINT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {header.get('version')}, expected {CHECKPOINT_VERSION}"
        )
    try:
        config = ModelConfig(**header["config"])
        config.validate()
        manifest = header["manifest"]
    except (TypeError, KeyError, InvalidConfigError) as exc:
        raise CorruptCheckpointError(f"{path}: invalid header contents ({exc})") from None

    expected = [(name, list(shape)) for name, shape, _ in param_spec(config)]
    declared = [(entry.get("name"), entry.get("shape")) for entry in manifest]
    if declared != expected:
        raise VersionMismatchError(f"{path}: tensor manifest does not match the declared config")

    data = raw[nl + 1 :]
    total = sum(int(np.prod(e["shape"])) for e in manifest) * 8
    if len(data) != total:
        raise CorruptCheckpointError(
            f"{path}: data section holds {len(data)} bytes, manifest needs {total}"
        )
    params: Params = {}
    for entry in manifest:
        count = int(np.prod(entry["shape"]))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=entry["offset"])
        params[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return params, config
