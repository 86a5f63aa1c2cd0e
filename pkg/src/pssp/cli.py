"""Command-line pipeline: eda, augment, train, eval, predict, rerun.

Every subcommand echoes its resolved configuration to run_config.json in
the output directory; ``pssp rerun path/to/run_config.json`` replays a run
from that file. All randomness flows from one ``--seed`` (fallback: the
PSSP_SEED environment variable) through tagged sub-seed derivation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .augment import ShortPolicy, augment_records, batch_arrays, count_windows, reconstruct_predictions, sliding_windows, windows_for_tokens, write_windows_csv
from .dataset import SplitMode, compute_eda, parse_records, split_train_val
from .errors import PsspError
from .evaluation import (
    REFERENCE_SUMMARY,
    accuracy_recall_f1_summary,
    confusion,
    format_report_text,
    render_outputs,
    report,
)
from .model import ModelConfig, load_checkpoint, predict_probs, save_checkpoint
from .tokenizer import build_vocabulary, encode_residues, labels_to_string, write_vocab_json
from .training import TrainConfig, derive_seed, evaluate_arrays, train, write_history_csv

# Published approximate window count for the length-15 stride-1 augmentation
# of the 513-record benchmark corpus; run logs report the delta against it.
PUBLISHED_WINDOW_COUNT = 76937

_POLICIES = {"pad": ShortPolicy.PAD_TAIL, "skip": ShortPolicy.SKIP}
_SPLIT_MODES = {"window": SplitMode.WINDOW, "protein": SplitMode.PROTEIN}


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("PSSP_SEED", "0"))


def _load_records(path: str):
    dataset = Path(path)
    if not dataset.exists():
        raise PsspError(f"dataset not found: {dataset}")
    with open(dataset, encoding="utf-8") as fh:
        return parse_records(fh)


def _echo_config(args, out_dir: Path, extra: dict | None = None) -> dict:
    resolved = {"command": args.command}
    skip = {"command", "func"}
    for key, value in sorted(vars(args).items()):
        if key in skip or value is None:
            continue
        resolved[key.replace("_", "-")] = value
    resolved["seed"] = _resolve_seed(args)
    if extra:
        resolved.update(extra)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_config.json").write_text(
        json.dumps(resolved, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"resolved config -> {out_dir / 'run_config.json'}")
    return resolved


def cmd_eda(args) -> int:
    records = _load_records(args.dataset)
    eda = compute_eda(records)
    out_dir = Path(args.out)
    _echo_config(args, out_dir)
    written = render_outputs(out_dir, eda=eda)
    print(f"records: {eda.record_count}  residues: {eda.residue_count}")
    for cls, count in eda.class_frequency.items():
        print(f"class {cls.name}: {count} ({count / eda.residue_count:.1%})")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_augment(args) -> int:
    records = _load_records(args.dataset)
    policy = _POLICIES[args.short_policy]
    windows = augment_records(records, window=args.window, stride=args.stride, short_policy=policy)
    count = count_windows(records, args.window, args.stride, policy)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_windows_csv(windows, out_path)
    _echo_config(args, out_path.parent, extra={"window-count": count})
    delta = count - PUBLISHED_WINDOW_COUNT
    print(f"windows: {count} (w={args.window}, s={args.stride}, policy={args.short_policy})")
    print(
        f"delta vs published count {PUBLISHED_WINDOW_COUNT}: {delta:+d} "
        f"({delta / PUBLISHED_WINDOW_COUNT:+.2%})"
    )
    print(f"wrote {out_path}")
    return 0


def _model_config_from_args(args, seed: int) -> ModelConfig:
    return ModelConfig(
        d_model=args.d_model,
        num_heads=args.num_heads,
        num_blocks=args.num_blocks,
        ffn_dim=args.ffn_dim,
        max_len=args.window,
        dropout=args.dropout,
        seed=derive_seed(seed, "init"),
    )


def _train_config_from_args(args, seed: int) -> TrainConfig:
    return TrainConfig(
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        split_fraction=args.split_fraction,
        split_mode=_SPLIT_MODES[args.split_mode],
        lr=args.lr,
        early_stop_patience=args.early_stop_patience,
        early_stop_min_delta=args.early_stop_min_delta,
        plateau_patience=args.plateau_patience,
        plateau_factor=args.plateau_factor,
        min_lr=args.min_lr,
        seed=seed,
    )


def cmd_train(args) -> int:
    seed = _resolve_seed(args)
    records = _load_records(args.dataset)
    policy = _POLICIES[args.short_policy]
    windows = augment_records(records, window=args.window, stride=args.stride, short_policy=policy)
    print(f"{len(records)} records -> {len(windows)} windows")

    out_dir = Path(args.out)
    _echo_config(args, out_dir)
    model_config = _model_config_from_args(args, seed)
    train_config = _train_config_from_args(args, seed)
    params, history = train(model_config, train_config, windows, log=print)

    save_checkpoint(out_dir / "model.ckpt", params, model_config)
    write_history_csv(history, out_dir / "history.csv", persist_timing=args.persist_timing)
    write_vocab_json(build_vocabulary(), out_dir / "vocab.json")
    render_outputs(out_dir, history=history)
    best = min(history, key=lambda e: e.val_loss)
    stopped = len(history) < train_config.max_epochs
    print(f"run ended at epoch {len(history)} of {train_config.max_epochs}"
          + (" (early stop)" if stopped else " (completed)"))
    print(f"best epoch {best.epoch}: val_loss {best.val_loss:.6f}  val_acc {best.val_acc:.6f}")
    print(
        f"gap to published accuracy {REFERENCE_SUMMARY[0]}: "
        f"{best.val_acc - REFERENCE_SUMMARY[0]:+.4f}"
    )
    print(f"wrote {out_dir / 'model.ckpt'} and {out_dir / 'history.csv'}")
    return 0


def _val_windows(args, records, max_len: int, seed: int):
    policy = _POLICIES[args.short_policy]
    windows = augment_records(records, window=max_len, stride=args.stride, short_policy=policy)
    return split_train_val(
        windows, args.split_fraction, derive_seed(seed, "split"), _SPLIT_MODES[args.split_mode]
    )


def cmd_eval(args) -> int:
    seed = _resolve_seed(args)
    params, model_config = load_checkpoint(args.checkpoint)
    records = _load_records(args.dataset)
    _, val_w = _val_windows(args, records, model_config.max_len, seed)
    tokens, labels, mask = batch_arrays(val_w)

    val_loss, val_acc = evaluate_arrays(params, model_config, tokens, labels, mask)
    probs = _batched_probs(params, model_config, tokens, mask)
    preds = probs.argmax(axis=-1)
    cm = confusion(preds.reshape(-1), labels.reshape(-1), mask.reshape(-1))
    rep = report(cm)

    longest = max(records, key=len)
    sample = _reconstruct_record(params, model_config, longest, args.stride)

    out_dir = Path(args.out)
    _echo_config(args, out_dir)
    written = render_outputs(out_dir, rep=rep, sample_comparison=sample)
    print(f"validation windows: {len(val_w)}  val_loss {val_loss:.6f}  val_acc {val_acc:.6f}")
    print(format_report_text(rep))
    summary = accuracy_recall_f1_summary(rep)
    print(
        f"summary: accuracy {summary[0]:.4f}  recall {summary[1]:.4f}  f1 {summary[2]:.4f} "
        f"(published target {REFERENCE_SUMMARY})"
    )
    for path in written:
        print(f"wrote {path}")
    return 0


def _batched_probs(params, config, tokens, mask, batch_size: int = 256) -> np.ndarray:
    outs = []
    for start in range(0, tokens.shape[0], batch_size):
        sl = slice(start, start + batch_size)
        outs.append(predict_probs(params, config, tokens[sl], mask[sl]))
    return np.concatenate(outs, axis=0)


def _reconstruct_record(params, config, record, stride: int):
    """Truth/prediction comparison strings for one full record."""
    windows = sliding_windows(record, window=config.max_len, stride=stride)
    tokens, _, mask = batch_arrays(windows)
    probs = _batched_probs(params, config, tokens, mask)
    stitched = reconstruct_predictions(
        [(w, probs[i]) for i, w in enumerate(windows)], len(record)
    )
    return record.id, record.labels_string, labels_to_string(stitched)


def cmd_predict(args) -> int:
    params, model_config = load_checkpoint(args.checkpoint)
    vocab = build_vocabulary()
    jobs = []
    if args.sequence:
        jobs.append(("input", args.sequence))
    else:
        for rec in _load_records(args.input):
            jobs.append((rec.id, rec.residues))

    lines = []
    for name, seq in jobs:
        seq = seq.strip().upper()
        nonstandard = sorted({c for c in seq if c not in vocab.residue_to_id and "A" <= c <= "Z"})
        if nonstandard:
            print(f"warning: {name}: nonstandard residues {''.join(nonstandard)} map to UNK", file=sys.stderr)
        tokens = encode_residues(seq, vocab)
        windows = windows_for_tokens(name, tokens, window=model_config.max_len, pad_id=vocab.pad_id)
        tok, _, mask = batch_arrays(windows)
        probs = _batched_probs(params, model_config, tok, mask)
        stitched = reconstruct_predictions(
            [(w, probs[i]) for i, w in enumerate(windows)], len(seq)
        )
        labels = labels_to_string(stitched)
        lines.append(f">{name}")
        for start in range(0, len(seq), 60):
            lines.append(f"RES  {seq[start:start + 60]}")
            lines.append(f"PRED {labels[start:start + 60]}")
    text = "\n".join(lines)
    print(text)
    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text + "\n", encoding="utf-8")
        _echo_config(args, out_path.parent)
    return 0


def cmd_rerun(args) -> int:
    stored = json.loads(Path(args.config).read_text(encoding="utf-8"))
    command = stored.pop("command")
    stored.pop("window-count", None)
    argv = [command]
    for key, value in stored.items():
        if isinstance(value, bool):
            if value:
                argv.append(f"--{key}")
        else:
            argv.extend([f"--{key}", str(value)])
    print(f"rerunning: pssp {' '.join(argv)}")
    return main(argv)


def _add_common(p, dataset_required: bool = True) -> None:
    p.add_argument("--dataset", required=dataset_required, help="cb3 dataset path")
    p.add_argument("--seed", type=int, default=None, help="base seed (default: $PSSP_SEED or 0)")


def _add_window_flags(p) -> None:
    p.add_argument("--window", type=int, default=15, help="window size")
    p.add_argument("--stride", type=int, default=1, help="window stride")
    p.add_argument("--short-policy", choices=sorted(_POLICIES), default="pad",
                   help="handling of records shorter than one window")


def _add_split_flags(p) -> None:
    p.add_argument("--split-fraction", type=float, default=0.8)
    p.add_argument("--split-mode", choices=sorted(_SPLIT_MODES), default="window")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pssp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eda", help="dataset distribution summaries")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eda)

    p = sub.add_parser("augment", help="materialize sliding windows as CSV")
    _add_common(p)
    _add_window_flags(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train the encoder end to end")
    _add_common(p)
    _add_window_flags(p)
    _add_split_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--num-heads", type=int, default=4)
    p.add_argument("--num-blocks", type=int, default=2)
    p.add_argument("--ffn-dim", type=int, default=128)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--early-stop-patience", type=int, default=5)
    p.add_argument("--early-stop-min-delta", type=float, default=1e-4)
    p.add_argument("--plateau-patience", type=int, default=3)
    p.add_argument("--plateau-factor", type=float, default=0.5)
    p.add_argument("--min-lr", type=float, default=1e-6)
    p.add_argument("--persist-timing", action="store_true",
                   help="keep measured wall time in history.csv (breaks byte reproducibility)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the validation split")
    _add_common(p)
    _add_window_flags(p)
    _add_split_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="label a sequence or record file")
    _add_common(p, dataset_required=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sequence", help="residue string")
    p.add_argument("--input", help="cb3 record file")
    p.add_argument("--out", help="optional output text path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("rerun", help="replay a run from its run_config.json")
    p.add_argument("--config", required=True, help="path to run_config.json")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "predict" and not (args.sequence or args.input):
        parser.error("predict needs --sequence or --input")
    try:
        return args.func(args)
    except PsspError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
