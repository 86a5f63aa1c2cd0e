"""CB513-style record ingestion, label reduction, summary statistics, splits.

Canonical dataset format ("cb3"): UTF-8 text, three lines per record:

    >identifier
    RESIDUESTRING
    STRIDELABELSTRING

Blank lines are ignored; LF and CRLF both accepted. Raw structure labels are
reduced to the 3-state scheme at parse time.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import IO, Iterable, Sequence, TypeVar

import numpy as np

from .errors import (
    DegenerateSplitError,
    EmptyDatasetError,
    LengthMismatchError,
    MalformedRecordError,
    UnknownLabelCharError,
)


class SecondaryStructure(IntEnum):
    """3-state secondary structure classes with fixed indices."""

    H = 0  # alpha helix
    C = 1  # coil / other
    E = 2  # beta sheet


# Canonical amino-acid alphabet in the fixed order used for token ids.
AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"

# Raw label alphabet accepted from STRIDE-style annotation output.
STRIDE_ALPHABET = "HGIEBbTCS- "

# 8-state output reduced to 3 states: helix family to H, strand family to E,
# turns/bends/other to C. 'b' is the lowercase bridge variant of 'B'.
DEFAULT_STRIDE_MAP: dict[str, SecondaryStructure] = {
    "H": SecondaryStructure.H,
    "G": SecondaryStructure.H,
    "I": SecondaryStructure.H,
    "E": SecondaryStructure.E,
    "B": SecondaryStructure.E,
    "b": SecondaryStructure.E,
    "T": SecondaryStructure.C,
    "C": SecondaryStructure.C,
    "S": SecondaryStructure.C,
    "-": SecondaryStructure.C,
    " ": SecondaryStructure.C,
}


def load_stride_map(path: str | Path) -> dict[str, SecondaryStructure]:
    """Load an alternate raw-label reduction table from a JSON object file.

    The file maps single raw characters to one of "H", "C", "E".
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    table = {}
    for char, name in raw.items():
        if len(char) != 1:
            raise MalformedRecordError(f"label map key {char!r} is not a single character")
        table[char] = SecondaryStructure[name]
    return table


def map_stride_label(
    raw: str, table: dict[str, SecondaryStructure] | None = None
) -> SecondaryStructure:
    """Reduce one raw structure label character to its 3-state class."""
    table = DEFAULT_STRIDE_MAP if table is None else table
    try:
        return table[raw]
    except KeyError:
        raise UnknownLabelCharError(f"unknown structure label character {raw!r}") from None


@dataclass(frozen=True)
class ProteinRecord:
    """One dataset entry: identifier, residue string, 3-state labels."""

    id: str
    residues: str
    labels3: tuple[SecondaryStructure, ...]

    def __post_init__(self):
        if not self.id:
            raise MalformedRecordError("record id must be non-empty")
        if len(self.residues) < 1:
            raise MalformedRecordError(f"record {self.id!r} has an empty residue string")
        if len(self.residues) != len(self.labels3):
            raise LengthMismatchError(
                f"record {self.id!r}: {len(self.residues)} residues vs "
                f"{len(self.labels3)} labels"
            )
        for ch in self.residues:
            if not ("A" <= ch <= "Z"):
                raise MalformedRecordError(
                    f"record {self.id!r} contains invalid residue character {ch!r}"
                )

    def __len__(self) -> int:
        return len(self.residues)

    @property
    def labels_string(self) -> str:
        return "".join(c.name for c in self.labels3)


def parse_records(
    source: IO[str] | Iterable[str] | str,
    fmt: str = "cb3",
    label_table: dict[str, SecondaryStructure] | None = None,
) -> list[ProteinRecord]:
    """Parse a cb3-format text stream into validated records.

    Raw labels go through ``map_stride_label``; record order is preserved.
    Raises MalformedRecordError / LengthMismatchError / UnknownLabelCharError
    with line-numbered context.
    """
    if fmt != "cb3":
        raise MalformedRecordError(f"unsupported dataset format {fmt!r}")
    if isinstance(source, str):
        source = source.splitlines()

    lines = [
        (lineno, line.rstrip("\r\n"))
        for lineno, line in enumerate(source, start=1)
        if line.strip()
    ]
    if len(lines) % 3 != 0:
        raise MalformedRecordError(
            f"truncated record at end of input (line {lines[-1][0] if lines else 0}): "
            "each record needs header, residue, and label lines"
        )

    records = []
    for i in range(0, len(lines), 3):
        (ln_h, header), (_, residues), (ln_l, raw_labels) = lines[i : i + 3]
        if not header.startswith(">"):
            raise MalformedRecordError(f"line {ln_h}: expected '>' record header, got {header!r}")
        rec_id = header[1:].strip()
        if not rec_id:
            raise MalformedRecordError(f"line {ln_h}: record header has no identifier")
        residues = residues.strip().upper()
        raw_labels = raw_labels.strip()
        if len(residues) != len(raw_labels):
            raise LengthMismatchError(
                f"record {rec_id!r} (line {ln_l}): {len(residues)} residues vs "
                f"{len(raw_labels)} labels"
            )
        try:
            labels3 = tuple(map_stride_label(c, label_table) for c in raw_labels)
        except UnknownLabelCharError as exc:
            raise UnknownLabelCharError(f"record {rec_id!r} (line {ln_l}): {exc}") from None
        records.append(ProteinRecord(rec_id, residues, labels3))
    return records


def serialize_records(records: Sequence[ProteinRecord]) -> str:
    """Render records back to cb3 text with 3-state label strings."""
    chunks = []
    for rec in records:
        chunks.append(f">{rec.id}\n{rec.residues}\n{rec.labels_string}\n")
    return "".join(chunks)


def write_records(records: Sequence[ProteinRecord], path: str | Path) -> None:
    Path(path).write_text(serialize_records(records), encoding="utf-8")


@dataclass
class EdaReport:
    """Exact count summaries of a record collection."""

    length_histogram: dict[int, int]
    residue_frequency: dict[str, int]
    class_frequency: dict[SecondaryStructure, int]
    record_count: int
    residue_count: int


def compute_eda(records: Sequence[ProteinRecord]) -> EdaReport:
    """Count sequence lengths, residue usage, and class prevalence."""
    if not records:
        raise EmptyDatasetError("cannot summarize an empty record list")
    lengths = Counter(len(r) for r in records)
    residues: Counter[str] = Counter()
    classes: Counter[SecondaryStructure] = Counter()
    for rec in records:
        residues.update(rec.residues)
        classes.update(rec.labels3)
    return EdaReport(
        length_histogram=dict(sorted(lengths.items())),
        residue_frequency=dict(sorted(residues.items())),
        class_frequency={c: classes.get(c, 0) for c in SecondaryStructure},
        record_count=len(records),
        residue_count=sum(len(r) for r in records),
    )


def write_eda_csvs(report: EdaReport, out_dir: str | Path) -> list[Path]:
    """Write lengths.csv / residues.csv / classes.csv (columns key,count)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = [
        ("lengths.csv", sorted(report.length_histogram.items())),
        ("residues.csv", sorted(report.residue_frequency.items())),
        ("classes.csv", [(c.name, n) for c, n in report.class_frequency.items()]),
    ]
    paths = []
    for name, rows in tables:
        path = out_dir / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["key", "count"])
            writer.writerows(rows)
        paths.append(path)
    return paths


class SplitMode(Enum):
    """Granularity of the train/validation split."""

    WINDOW = "window"
    PROTEIN = "protein"


T = TypeVar("T")


def split_train_val(
    items: Sequence[T],
    fraction: float = 0.8,
    seed: int = 0,
    mode: SplitMode = SplitMode.WINDOW,
) -> tuple[list[T], list[T]]:
    """Deterministically partition items into (train, val).

    WINDOW mode shuffles items uniformly and takes round(fraction * N) for
    train. PROTEIN mode keeps all windows of one source record on the same
    side (leakage-safe), filling train in shuffled protein order until it
    reaches the target size, so |train| is only approximate there.
    """
    n = len(items)
    if n == 0:
        raise DegenerateSplitError("cannot split an empty item list")
    if not 0.0 < fraction < 1.0:
        raise DegenerateSplitError(f"split fraction {fraction} outside (0, 1)")
    target = round(fraction * n)
    rng = np.random.default_rng(seed)

    if mode is SplitMode.WINDOW:
        perm = rng.permutation(n)
        train = [items[i] for i in perm[:target]]
        val = [items[i] for i in perm[target:]]
    else:
        groups: dict[str, list[int]] = {}
        for i, item in enumerate(items):
            groups.setdefault(item.source_id, []).append(i)  # type: ignore[attr-defined]
        keys = list(groups)
        order = rng.permutation(len(keys))
        train_idx: list[int] = []
        val_idx: list[int] = []
        for k in order:
            bucket = train_idx if len(train_idx) < target else val_idx
            bucket.extend(groups[keys[k]])
        train = [items[i] for i in sorted(train_idx)]
        val = [items[i] for i in sorted(val_idx)]

    if not train or not val:
        raise DegenerateSplitError(
            f"split of {n} items at fraction {fraction} left one side empty"
        )
    return train, val
