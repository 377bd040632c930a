"""Per-layer representation exporter for ad corpora.

Loads a self-contained sequence-classification checkpoint, runs it over a
JSONL ad corpus, and writes per-ad, per-layer float32 tensors in the VLEMB1
container (classifier-position vectors or full token grids). Can also
fine-tune a checkpoint on a labeled corpus first, producing the
"before/after" pair that representation-similarity analyses compare.
"""

from .checkpoint import (
    BOS_ID,
    PAD_ID,
    UNK_ID,
    Checkpoint,
    ToyConfig,
    ToyTransformer,
    build_vocab,
    classifier_positions,
    load_checkpoint,
    new_toy_checkpoint,
    save_checkpoint,
)
from .export import ExportJob, export_tensor, read_corpus, run_export
from .finetune import FinetuneConfig, read_labels, run_finetune
from .vlemb import MAGIC, MODES, write_vlemb

__all__ = [
    "BOS_ID",
    "PAD_ID",
    "UNK_ID",
    "Checkpoint",
    "ToyConfig",
    "ToyTransformer",
    "build_vocab",
    "classifier_positions",
    "load_checkpoint",
    "new_toy_checkpoint",
    "save_checkpoint",
    "ExportJob",
    "export_tensor",
    "read_corpus",
    "run_export",
    "FinetuneConfig",
    "read_labels",
    "run_finetune",
    "MAGIC",
    "MODES",
    "write_vlemb",
]

__version__ = "0.1.0"
