"""Sliding-window augmentation and full-sequence reconstruction.

Records are cut into fixed-length token windows (default 15, stride 1) with
aligned label indices, a validity mask, and provenance so per-window
predictions can be stitched back into full-length sequences.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import ProteinRecord
from .errors import CoverageGapError, MalformedInputError
from .tokenizer import LABEL_IGNORE, Vocabulary, build_vocabulary, encode_labels, encode_residues


class ShortPolicy(Enum):
    """What to do with records shorter than one window."""

    PAD_TAIL = "pad"
    SKIP = "skip"


@dataclass(frozen=True)
class WindowSample:
    """One fixed-length training sample with provenance.

    mask is True on the contiguous real-residue prefix; padded tail
    positions carry the PAD token and the LABEL_IGNORE sentinel.
    """

    source_id: str
    offset: int
    tokens: tuple[int, ...]
    labels: tuple[int, ...]
    mask: tuple[bool, ...]


def _windows_from_arrays(
    source_id: str,
    tokens: np.ndarray,
    labels: np.ndarray,
    window: int,
    stride: int,
    short_policy: ShortPolicy,
    pad_id: int,
) -> list[WindowSample]:
    n = len(tokens)
    token_list = tokens.tolist()
    label_list = labels.tolist()
    if n >= window:
        full = (True,) * window
        return [
            WindowSample(
                source_id,
                off,
                tuple(token_list[off : off + window]),
                tuple(label_list[off : off + window]),
                full,
            )
            for off in range(0, n - window + 1, stride)
        ]
    if short_policy is ShortPolicy.SKIP:
        return []
    pad = window - n
    return [
        WindowSample(
            source_id,
            0,
            tuple(token_list) + (pad_id,) * pad,
            tuple(label_list) + (LABEL_IGNORE,) * pad,
            (True,) * n + (False,) * pad,
        )
    ]


def sliding_windows(
    record: ProteinRecord,
    vocab: Vocabulary | None = None,
    window: int = 15,
    stride: int = 1,
    short_policy: ShortPolicy = ShortPolicy.PAD_TAIL,
) -> list[WindowSample]:
    """Cut one record into windows at offsets 0, stride, 2*stride, ...

    Records shorter than the window yield one tail-padded window under
    PAD_TAIL and nothing under SKIP.
    """
    if window < 1 or stride < 1:
        raise MalformedInputError(f"window ({window}) and stride ({stride}) must be >= 1")
    vocab = vocab or build_vocabulary()
    tokens = encode_residues(record.residues, vocab)
    labels = encode_labels(record.labels3)
    return _windows_from_arrays(
        record.id, tokens, labels, window, stride, short_policy, vocab.pad_id
    )


def windows_for_tokens(
    source_id: str,
    tokens: np.ndarray,
    window: int = 15,
    stride: int = 1,
    pad_id: int = 0,
) -> list[WindowSample]:
    """Window a bare token array (no labels), for inference on raw input."""
    labels = np.full(len(tokens), LABEL_IGNORE, dtype=np.int64)
    return _windows_from_arrays(
        source_id, tokens, labels, window, stride, ShortPolicy.PAD_TAIL, pad_id
    )


def count_windows(
    records: Sequence[ProteinRecord],
    window: int = 15,
    stride: int = 1,
    short_policy: ShortPolicy = ShortPolicy.PAD_TAIL,
) -> int:
    """Window count as a pure function of record lengths."""
    if window < 1 or stride < 1:
        raise MalformedInputError(f"window ({window}) and stride ({stride}) must be >= 1")
    total = 0
    for rec in records:
        n = len(rec)
        if n >= window:
            total += (n - window) // stride + 1
        elif short_policy is ShortPolicy.PAD_TAIL:
            total += 1
    return total


def augment_records(
    records: Sequence[ProteinRecord],
    vocab: Vocabulary | None = None,
    window: int = 15,
    stride: int = 1,
    short_policy: ShortPolicy = ShortPolicy.PAD_TAIL,
) -> list[WindowSample]:
    """All windows of all records, ordered by (record order, offset)."""
    vocab = vocab or build_vocabulary()
    out: list[WindowSample] = []
    for rec in records:
        out.extend(sliding_windows(rec, vocab, window, stride, short_policy))
    return out


def batch_arrays(samples: Sequence[WindowSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack samples into (tokens[N,L] int64, labels[N,L] int64, mask[N,L] bool)."""
    tokens = np.array([s.tokens for s in samples], dtype=np.int64)
    labels = np.array([s.labels for s in samples], dtype=np.int64)
    mask = np.array([s.mask for s in samples], dtype=bool)
    return tokens, labels, mask


def reconstruct_predictions(
    window_probs: Sequence[tuple[WindowSample, np.ndarray]],
    target_len: int,
) -> np.ndarray:
    """Stitch per-window class probabilities back into one label sequence.

    Every unmasked window position contributes its probability row to the
    residue it covers; rows are averaged per residue and argmaxed, ties
    resolved toward the lowest class index.
    """
    if not window_probs:
        raise MalformedInputError("no windows supplied for reconstruction")
    source_ids = {s.source_id for s, _ in window_probs}
    if len(source_ids) != 1:
        raise MalformedInputError(f"windows mix source records: {sorted(source_ids)}")

    num_classes = np.asarray(window_probs[0][1]).shape[-1]
    sums = np.zeros((target_len, num_classes), dtype=np.float64)
    counts = np.zeros(target_len, dtype=np.int64)
    for sample, probs in window_probs:
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (len(sample.tokens), num_classes):
            raise MalformedInputError(
                f"probability rows {probs.shape} do not match window length {len(sample.tokens)}"
            )
        for i, real in enumerate(sample.mask):
            if not real:
                continue
            pos = sample.offset + i
            if pos >= target_len:
                raise MalformedInputError(
                    f"window at offset {sample.offset} overruns target length {target_len}"
                )
            sums[pos] += probs[i]
            counts[pos] += 1
    uncovered = np.flatnonzero(counts == 0)
    if uncovered.size:
        raise CoverageGapError(f"positions with no covering window: {uncovered.tolist()[:10]}")
    means = sums / counts[:, None]
    return np.argmax(means, axis=1)


def write_windows_csv(samples: Sequence[WindowSample], path: str | Path) -> None:
    """Materialize windows as CSV with space-separated integer arrays."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "offset", "tokens", "labels", "mask"])
        for s in samples:
            writer.writerow(
                [
                    s.source_id,
                    s.offset,
                    " ".join(map(str, s.tokens)),
                    " ".join(map(str, s.labels)),
                    " ".join(str(int(b)) for b in s.mask),
                ]
            )
