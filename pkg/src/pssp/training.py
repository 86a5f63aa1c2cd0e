"""Mini-batch training loop with early stopping and LR plateau scheduling.

All randomness (split, per-epoch shuffles, dropout) derives from one base
seed through ``derive_seed(base, tag, ...)``, so identical configs replay
identical trajectories. Per-epoch wall time is measured and reported, but
persisted artifacts are byte-reproducible by default: the ``seconds``
column of history.csv is zeroed unless timing persistence is requested.
"""

from __future__ import annotations

import csv
import hashlib
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .augment import WindowSample, batch_arrays
from .dataset import SplitMode, split_train_val
from .errors import EmptyDatasetError, InvalidConfigError, NonFiniteLossError
from .model import ModelConfig, Params, backward, forward, init_params, load_checkpoint, save_checkpoint
from .nncore import AdamState, adam_step, sparse_ce_loss
from .tokenizer import LABEL_IGNORE

__all__ = [
    "TrainConfig",
    "EpochStats",
    "derive_seed",
    "train",
    "evaluate_arrays",
    "early_stop_check",
    "plateau_check",
    "write_history_csv",
    "save_checkpoint",
    "load_checkpoint",
]


def derive_seed(base: int, *parts) -> int:
    """Stable sub-seed derivation from (base seed, purpose tag, indices)."""
    text = ":".join(str(p) for p in (int(base), *parts))
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 30
    split_fraction: float = 0.8
    split_mode: SplitMode = SplitMode.WINDOW
    lr: float = 1e-3
    early_stop_patience: int = 5
    early_stop_min_delta: float = 1e-4
    plateau_patience: int = 3
    plateau_factor: float = 0.5
    min_lr: float = 1e-6
    seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1 or self.max_epochs < 1:
            raise InvalidConfigError("batch_size and max_epochs must be >= 1")
        if not 0.0 < self.split_fraction < 1.0:
            raise InvalidConfigError(f"split_fraction {self.split_fraction} outside (0, 1)")
        if not 0.0 < self.plateau_factor < 1.0:
            raise InvalidConfigError(f"plateau_factor {self.plateau_factor} outside (0, 1)")
        if self.early_stop_patience < 1 or self.plateau_patience < 1:
            raise InvalidConfigError("callback patience values must be >= 1")
        if self.lr <= 0.0 or self.min_lr <= 0.0:
            raise InvalidConfigError("lr and min_lr must be positive")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float
    seconds: float


History = list


def early_stop_check(
    history: Sequence[EpochStats], patience: int = 5, min_delta: float = 1e-4
) -> bool:
    """True when validation loss has not improved by more than ``min_delta``
    for ``patience`` consecutive epochs."""
    best = float("inf")
    bad = 0
    for entry in history:
        if entry.val_loss < best - min_delta:
            best = entry.val_loss
            bad = 0
        else:
            bad += 1
    return bad >= patience


def plateau_check(
    history: Sequence[EpochStats],
    patience: int = 3,
    factor: float = 0.5,
    min_lr: float = 1e-6,
) -> float:
    """Learning rate to use after the last recorded epoch.

    Replays the whole history from the initial rate: each run of
    ``patience`` consecutive epochs without a new best validation loss
    multiplies the rate by ``factor`` (clamped at ``min_lr``) and resets
    the window.
    """
    if not history:
        raise InvalidConfigError("plateau_check needs at least one epoch")
    lr = history[0].lr
    best = float("inf")
    bad = 0
    for entry in history:
        if entry.val_loss < best:
            best = entry.val_loss
            bad = 0
        else:
            bad += 1
            if bad >= patience:
                lr = max(lr * factor, min_lr)
                bad = 0
    return lr


def evaluate_arrays(
    params: Params,
    config: ModelConfig,
    tokens: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
    batch_size: int = 256,
) -> tuple[float, float]:
    """Mean token-level loss and accuracy over the unmasked positions."""
    total_loss = 0.0
    correct = 0
    count = 0
    for start in range(0, tokens.shape[0], batch_size):
        sl = slice(start, start + batch_size)
        logits, _ = forward(params, config, tokens[sl], mask[sl], train=False)
        flat = labels[sl].reshape(-1)
        loss, _ = sparse_ce_loss(logits.reshape(-1, config.num_classes), flat)
        n_valid = int((flat != LABEL_IGNORE).sum())
        total_loss += loss * n_valid
        correct += int(((logits.argmax(axis=-1) == labels[sl]) & mask[sl]).sum())
        count += n_valid
    return total_loss / count, correct / count


def _snapshot(params: Params) -> Params:
    return {name: arr.copy() for name, arr in params.items()}


def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    windows: Sequence[WindowSample],
    log: Callable[[str], None] | None = None,
) -> tuple[Params, list[EpochStats]]:
    """Split, train with Adam, apply callbacks, return the parameters from
    the epoch with the best validation loss plus the full history."""
    model_config.validate()
    train_config.validate()
    if not windows:
        raise EmptyDatasetError("no windows to train on")

    train_w, val_w = split_train_val(
        windows,
        train_config.split_fraction,
        derive_seed(train_config.seed, "split"),
        train_config.split_mode,
    )
    tr_tok, tr_lab, tr_mask = batch_arrays(train_w)
    va_tok, va_lab, va_mask = batch_arrays(val_w)

    params = init_params(model_config)
    states = {name: AdamState.for_param(p, lr=train_config.lr) for name, p in params.items()}
    lr = train_config.lr
    history: list[EpochStats] = []
    best_val = float("inf")
    best_params = _snapshot(params)
    n_train = tr_tok.shape[0]
    batch = train_config.batch_size

    for epoch in range(1, train_config.max_epochs + 1):
        tic = time.perf_counter()
        order = np.random.default_rng(
            derive_seed(train_config.seed, "shuffle", epoch)
        ).permutation(n_train)
        ep_loss = 0.0
        ep_correct = 0
        ep_count = 0
        for bi, start in enumerate(range(0, n_train, batch)):
            idx = order[start : start + batch]
            tok, lab, msk = tr_tok[idx], tr_lab[idx], tr_mask[idx]
            drop_rng = (
                np.random.default_rng(derive_seed(train_config.seed, "dropout", epoch, bi))
                if model_config.dropout > 0.0
                else None
            )
            logits, cache = forward(params, model_config, tok, msk, train=True, dropout_rng=drop_rng)
            flat = lab.reshape(-1)
            loss, dlogits = sparse_ce_loss(logits.reshape(-1, model_config.num_classes), flat)
            if not np.isfinite(loss):
                raise NonFiniteLossError(f"loss became {loss} at epoch {epoch}, batch {bi}")
            grads = backward(cache, dlogits.reshape(logits.shape))
            for name in params:
                params[name] = adam_step(params[name], grads[name], states[name])
            n_valid = int((flat != LABEL_IGNORE).sum())
            ep_loss += loss * n_valid
            ep_correct += int(((logits.argmax(axis=-1) == lab) & msk).sum())
            ep_count += n_valid

        val_loss, val_acc = evaluate_arrays(
            params, model_config, va_tok, va_lab, va_mask, max(batch, 256)
        )
        seconds = time.perf_counter() - tic
        history.append(
            EpochStats(epoch, ep_loss / ep_count, ep_correct / ep_count, val_loss, val_acc, lr, seconds)
        )
        if log:
            e = history[-1]
            log(
                f"epoch {e.epoch:3d}  train_loss {e.train_loss:.4f}  train_acc {e.train_acc:.4f}  "
                f"val_loss {e.val_loss:.4f}  val_acc {e.val_acc:.4f}  lr {e.lr:.2e}  {e.seconds:.1f}s"
            )
        if val_loss < best_val:
            best_val = val_loss
            best_params = _snapshot(params)
        if early_stop_check(history, train_config.early_stop_patience, train_config.early_stop_min_delta):
            if log:
                log(f"early stop after epoch {epoch} (no val improvement)")
            break
        new_lr = plateau_check(
            history, train_config.plateau_patience, train_config.plateau_factor, train_config.min_lr
        )
        if new_lr != lr:
            if log:
                log(f"plateau: lr {lr:.2e} -> {new_lr:.2e}")
            lr = new_lr
            for state in states.values():
                state.lr = lr
    return best_params, history


def write_history_csv(
    history: Sequence[EpochStats], path: str | Path, persist_timing: bool = False
) -> None:
    """Write per-epoch stats. The seconds column is zeroed by default so
    repeated runs with one seed emit byte-identical files; pass
    ``persist_timing=True`` to keep the measured wall time."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr", "seconds"])
        for e in history:
            writer.writerow(
                [
                    e.epoch,
                    repr(e.train_loss),
                    repr(e.train_acc),
                    repr(e.val_loss),
                    repr(e.val_acc),
                    repr(e.lr),
                    repr(e.seconds) if persist_timing else "0.0",
                ]
            )
