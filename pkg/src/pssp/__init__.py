"""Protein secondary structure prediction with a from-scratch transformer.

Pipeline: cb3 dataset ingestion -> sliding-window augmentation -> integer
tokenization -> transformer encoder (float64, hand-derived backprop) ->
Adam training with early stopping and LR plateau scheduling -> metric
reports and SVG/CSV artifacts. See the CLI (``pssp --help``) for the
end-to-end entry point.
"""

import os as _os

# The workload is thousands of tiny float64 matmuls; BLAS thread pools only
# add sync overhead there. Respect explicit user settings, default to 1.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

from .augment import ShortPolicy, WindowSample, augment_records, count_windows, reconstruct_predictions, sliding_windows
from .dataset import (
    EdaReport,
    ProteinRecord,
    SecondaryStructure,
    SplitMode,
    compute_eda,
    map_stride_label,
    parse_records,
    serialize_records,
    split_train_val,
)
from .evaluation import EvalReport, accuracy_recall_f1_summary, confusion, report
from .model import ModelConfig, backward, forward, init_params, load_checkpoint, predict, save_checkpoint
from .tokenizer import LABEL_IGNORE, Vocabulary, build_vocabulary, encode_labels, encode_residues
from .training import TrainConfig, early_stop_check, plateau_check, train

__version__ = "0.1.0"
