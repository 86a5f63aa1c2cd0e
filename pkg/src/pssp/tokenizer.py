"""Deterministic integer codecs for residues and structure labels.

The vocabulary is fixed (not corpus-derived): PAD=0, UNK=1, then the 20
canonical amino acids in alphabetical order, ids 2..21.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import AMINO_ACIDS, SecondaryStructure
from .errors import MalformedInputError

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

# Sentinel class index for padded positions; the loss skips these rows.
LABEL_IGNORE = -1


@dataclass(frozen=True)
class Vocabulary:
    residue_to_id: dict[str, int]
    id_to_residue: dict[int, str]
    pad_id: int = 0
    unk_id: int = 1

    @property
    def size(self) -> int:
        return len(self.residue_to_id) + 2


def build_vocabulary() -> Vocabulary:
    """Return the fixed 22-entry vocabulary (PAD, UNK, 20 residues)."""
    residue_to_id = {aa: i + 2 for i, aa in enumerate(AMINO_ACIDS)}
    id_to_residue = {i: aa for aa, i in residue_to_id.items()}
    return Vocabulary(residue_to_id, id_to_residue)


_DEFAULT_VOCAB = build_vocabulary()


def encode_residues(seq: str, vocab: Vocabulary | None = None) -> np.ndarray:
    """Map an uppercase residue string to int64 token ids, UNK for
    nonstandard letters. Non-letter characters are rejected."""
    vocab = vocab or _DEFAULT_VOCAB
    ids = np.empty(len(seq), dtype=np.int64)
    for i, ch in enumerate(seq):
        if not ("A" <= ch <= "Z"):
            raise MalformedInputError(f"invalid residue character {ch!r} at position {i}")
        ids[i] = vocab.residue_to_id.get(ch, vocab.unk_id)
    return ids


def decode_residues(ids: Sequence[int], vocab: Vocabulary | None = None) -> str:
    """Inverse of encode_residues on canonical ids; UNK renders as 'X',
    PAD as '_'."""
    vocab = vocab or _DEFAULT_VOCAB
    out = []
    for t in ids:
        t = int(t)
        if t == vocab.pad_id:
            out.append("_")
        elif t == vocab.unk_id:
            out.append("X")
        else:
            out.append(vocab.id_to_residue[t])
    return "".join(out)


def encode_labels(labels: Sequence[SecondaryStructure]) -> np.ndarray:
    """Class indices H=0, C=1, E=2 as int64."""
    return np.fromiter((int(c) for c in labels), dtype=np.int64, count=len(labels))


def decode_labels(ids: Sequence[int]) -> tuple[SecondaryStructure, ...]:
    return tuple(SecondaryStructure(int(i)) for i in ids)


def labels_to_string(ids: Sequence[int]) -> str:
    """Render class indices as an 'HCE' string; the ignore sentinel as '-'."""
    return "".join("-" if int(i) == LABEL_IGNORE else SecondaryStructure(int(i)).name for i in ids)


def write_vocab_json(vocab: Vocabulary, path: str | Path) -> None:
    """Dump the vocabulary as an array of {token, id} for inspection."""
    entries = [{"token": PAD_TOKEN, "id": vocab.pad_id}, {"token": UNK_TOKEN, "id": vocab.unk_id}]
    entries.extend({"token": aa, "id": i} for aa, i in sorted(vocab.residue_to_id.items(), key=lambda kv: kv[1]))
    Path(path).write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")
