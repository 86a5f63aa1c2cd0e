"""Classification metrics and report/plot emission.

Confusion matrices use the fixed class order H=0, C=1, E=2 with rows as
truth and columns as prediction. Metrics follow the standard definitions;
zero denominators yield 0 with a warning.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import EdaReport, SecondaryStructure, write_eda_csvs
from .errors import EmptyMatrixError, LengthMismatchError, MalformedInputError
from .svg import bar_chart, heatmap, line_chart

CLASS_NAMES = [c.name for c in SecondaryStructure]  # ["H", "C", "E"]

# Published headline triple (accuracy, recall, F1) for this benchmark;
# kept as a comparison target for run logs, never asserted.
REFERENCE_SUMMARY = (0.8879, 0.8879, 0.8872)


def confusion(
    preds: Sequence[int] | np.ndarray,
    truth: Sequence[int] | np.ndarray,
    mask: Sequence[bool] | np.ndarray | None = None,
) -> np.ndarray:
    """Exact 3x3 count matrix over unmasked positions."""
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    if preds.shape != truth.shape:
        raise LengthMismatchError(f"preds {preds.shape} vs truth {truth.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).reshape(-1)
        if mask.shape != preds.shape:
            raise LengthMismatchError(f"mask {mask.shape} vs preds {preds.shape}")
        preds, truth = preds[mask], truth[mask]
    n = len(CLASS_NAMES)
    if preds.size and (
        preds.min() < 0 or preds.max() >= n or truth.min() < 0 or truth.max() >= n
    ):
        raise MalformedInputError(f"class indices outside [0, {n})")
    cm = np.zeros((n, n), dtype=np.int64)
    np.add.at(cm, (truth, preds), 1)
    return cm


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    confusion: list[list[int]]
    per_class: dict[str, ClassMetrics]
    accuracy: float
    macro_avg: ClassMetrics
    weighted_avg: ClassMetrics


def report(cm: np.ndarray) -> EvalReport:
    """Per-class precision/recall/F1/support plus accuracy and the macro and
    support-weighted averages."""
    cm = np.asarray(cm, dtype=np.int64)
    if cm.shape != (3, 3):
        raise MalformedInputError(f"expected a 3x3 matrix, got {cm.shape}")
    if (cm < 0).any():
        raise MalformedInputError("confusion counts must be non-negative")
    total = int(cm.sum())
    if total == 0:
        raise EmptyMatrixError("confusion matrix has zero total count")

    per_class: dict[str, ClassMetrics] = {}
    for c, name in enumerate(CLASS_NAMES):
        tp = int(cm[c, c])
        col = int(cm[:, c].sum())
        row = int(cm[c, :].sum())
        if col == 0 or row == 0:
            warnings.warn(f"class {name} has zero {'predicted' if col == 0 else 'true'} instances")
        precision = tp / col if col else 0.0
        recall = tp / row if row else 0.0
        f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[name] = ClassMetrics(precision, recall, f1, row)

    accuracy = float(np.trace(cm)) / total
    values = list(per_class.values())
    macro = ClassMetrics(
        sum(m.precision for m in values) / 3.0,
        sum(m.recall for m in values) / 3.0,
        sum(m.f1 for m in values) / 3.0,
        total,
    )
    weighted = ClassMetrics(
        sum(m.precision * m.support for m in values) / total,
        sum(m.recall * m.support for m in values) / total,
        sum(m.f1 * m.support for m in values) / total,
        total,
    )
    return EvalReport(cm.tolist(), per_class, accuracy, macro, weighted)


def accuracy_recall_f1_summary(rep: EvalReport) -> tuple[float, float, float]:
    """Headline triple (accuracy, weighted recall, weighted F1)."""
    return rep.accuracy, rep.weighted_avg.recall, rep.weighted_avg.f1


def report_to_dict(rep: EvalReport) -> dict:
    return asdict(rep)


def write_report_json(rep: EvalReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(rep), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def write_confusion_csv(cm: np.ndarray, path: str | Path) -> None:
    """3x3 grid with H,C,E row and column labels."""
    cm = np.asarray(cm)
    lines = ["," + ",".join(CLASS_NAMES)]
    for i, name in enumerate(CLASS_NAMES):
        lines.append(name + "," + ",".join(str(int(v)) for v in cm[i]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_report_text(rep: EvalReport) -> str:
    """Fixed-width classification report for console output."""
    lines = [f"{'class':>12} {'precision':>10} {'recall':>10} {'f1':>10} {'support':>10}"]
    for name, m in rep.per_class.items():
        lines.append(f"{name:>12} {m.precision:>10.4f} {m.recall:>10.4f} {m.f1:>10.4f} {m.support:>10d}")
    lines.append(f"{'accuracy':>12} {'':>10} {'':>10} {rep.accuracy:>10.4f} {rep.macro_avg.support:>10d}")
    for name, m in (("macro avg", rep.macro_avg), ("weighted avg", rep.weighted_avg)):
        lines.append(f"{name:>12} {m.precision:>10.4f} {m.recall:>10.4f} {m.f1:>10.4f} {m.support:>10d}")
    return "\n".join(lines)


def alignment_text(rec_id: str, truth: str, pred: str, width: int = 60) -> str:
    """Truth over prediction with '*' marking mismatches, in fixed-width
    chunks."""
    if len(truth) != len(pred):
        raise LengthMismatchError(f"truth length {len(truth)} vs prediction length {len(pred)}")
    marks = "".join("|" if t == p else "*" for t, p in zip(truth, pred))
    chunks = [f">{rec_id}  (* = mismatch, {marks.count('*')} of {len(truth)})"]
    for start in range(0, len(truth), width):
        chunks.append(f"TRUE {truth[start:start + width]}")
        chunks.append(f"     {marks[start:start + width]}")
        chunks.append(f"PRED {pred[start:start + width]}")
        chunks.append("")
    return "\n".join(chunks)


def render_outputs(
    out_dir: str | Path,
    eda: EdaReport | None = None,
    history: Sequence | None = None,
    rep: EvalReport | None = None,
    sample_comparison: tuple[str, str, str] | None = None,
) -> list[Path]:
    """Write every report artifact available from the supplied pieces:
    distribution CSVs + SVG bar charts, training-curve SVG, confusion CSV +
    heatmap + report.json, and the truth/prediction alignment view."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if eda is not None:
        written.extend(write_eda_csvs(eda, out_dir))
        charts = [
            ("lengths.svg", "Sequence length distribution", sorted(eda.length_histogram.items())),
            ("residues.svg", "Residue distribution", sorted(eda.residue_frequency.items())),
            ("classes.svg", "Class distribution", [(c.name, n) for c, n in eda.class_frequency.items()]),
        ]
        for name, title, pairs in charts:
            path = out_dir / name
            bar_chart(pairs, title, path)
            written.append(path)

    if history:
        epochs = [e.epoch for e in history]
        path = out_dir / "accuracy_curves.svg"
        line_chart(
            epochs,
            {"train acc": [e.train_acc for e in history], "val acc": [e.val_acc for e in history]},
            "Token accuracy by epoch",
            path,
        )
        written.append(path)
        path = out_dir / "loss_curves.svg"
        line_chart(
            epochs,
            {"train loss": [e.train_loss for e in history], "val loss": [e.val_loss for e in history]},
            "Loss by epoch",
            path,
        )
        written.append(path)

    if rep is not None:
        path = out_dir / "report.json"
        write_report_json(rep, path)
        written.append(path)
        path = out_dir / "confusion.csv"
        write_confusion_csv(np.asarray(rep.confusion), path)
        written.append(path)
        path = out_dir / "confusion.svg"
        heatmap(rep.confusion, CLASS_NAMES, CLASS_NAMES, "Confusion matrix", path)
        written.append(path)

    if sample_comparison is not None:
        rec_id, truth, pred = sample_comparison
        path = out_dir / "alignment.txt"
        path.write_text(alignment_text(rec_id, truth, pred) + "\n", encoding="utf-8")
        written.append(path)
    return written
