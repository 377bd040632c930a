"""Fine-tune a checkpoint on a labeled ad corpus.

Labels come from a JSON file mapping lowercased vendor handle to class
index; every vendor in the corpus must be covered and indices must fit the
checkpoint's classification head. Training is AdamW with a linear
warmup-then-decay learning-rate schedule (defaults: lr 1e-3, batch 32),
seeded for reproducible shuffling and therefore reproducible weights.

The output checkpoint keeps the same vocabulary and architecture; its name
gains a "-ft<steps>" suffix, so even a zero-step run (weights untouched)
gets a distinct tag while keeping the same content hash.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .export import CorpusRecord, read_corpus


@dataclass(frozen=True)
class FinetuneConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 3
    warmup_steps: int = 500
    weight_decay: float = 0.01
    seed: int = 1111
    max_steps: int | None = None

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError("learning_rate must be positive and batch_size >= 1")
        if self.epochs < 0 or self.warmup_steps < 0:
            raise ValueError("epochs and warmup_steps must be non-negative")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")


def read_labels(path, n_classes: int) -> dict[str, int]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"labels file not found: {path}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict) or not raw:
        raise ValueError("labels file must be a non-empty JSON object {vendor: class_index}")
    labels: dict[str, int] = {}
    for vendor, idx in raw.items():
        if not isinstance(idx, int) or isinstance(idx, bool):
            raise ValueError(f"label for {vendor!r} must be an integer, got {idx!r}")
        if not 0 <= idx < n_classes:
            raise ValueError(
                f"label {idx} for {vendor!r} outside the checkpoint's {n_classes}-class head"
            )
        labels[str(vendor).lower()] = idx
    return labels


def _targets(records: list[CorpusRecord], labels: dict[str, int]) -> torch.Tensor:
    missing = sorted({rec.vendor_norm for rec in records} - labels.keys())
    if missing:
        raise ValueError(f"vendors without a label: {', '.join(missing)}")
    return torch.tensor([labels[rec.vendor_norm] for rec in records], dtype=torch.long)


def _lr_factor(step: int, warmup: int, total: int) -> float:
    """Linear ramp over `warmup` steps, then linear decay to zero at `total`."""
    if warmup > 0 and step < warmup:
        return (step + 1) / warmup
    if total <= warmup:
        return 1.0
    return max(0.0, (total - step) / (total - warmup))


def _train_accuracy(checkpoint: Checkpoint, records, targets, batch_size: int) -> float:
    if not records:
        return 0.0
    hits = 0
    checkpoint.model.eval()
    with torch.no_grad():
        for start in range(0, len(records), batch_size):
            batch = records[start : start + batch_size]
            token_ids, pad_mask, _ = checkpoint.encode([r.text for r in batch])
            pred = checkpoint.model.logits(token_ids, pad_mask).argmax(dim=1)
            hits += int((pred == targets[start : start + len(batch)]).sum())
    return hits / len(records)


def run_finetune(
    checkpoint_path,
    corpus_path,
    labels_path,
    out_path,
    config: FinetuneConfig = FinetuneConfig(),
) -> dict:
    checkpoint = load_checkpoint(checkpoint_path)
    records = read_corpus(corpus_path)
    if not records:
        raise ValueError("cannot fine-tune on an empty corpus")
    labels = read_labels(labels_path, checkpoint.config.n_classes)
    targets = _targets(records, labels)

    n = len(records)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    if config.max_steps is not None:
        total_steps = min(total_steps, config.max_steps)

    model = checkpoint.model
    optimizer = torch.optim.AdamW(
        model.parameters(),
        lr=config.learning_rate,
        betas=(0.9, 0.999),
        weight_decay=config.weight_decay,
    )
    loss_fn = nn.CrossEntropyLoss()
    generator = torch.Generator().manual_seed(config.seed)
    torch.manual_seed(config.seed)

    step = 0
    model.train()
    while step < total_steps:
        order = torch.randperm(n, generator=generator)
        for start in range(0, n, config.batch_size):
            if step >= total_steps:
                break
            idx = order[start : start + config.batch_size]
            batch = [records[i] for i in idx]
            token_ids, pad_mask, _ = checkpoint.encode([r.text for r in batch])
            for group in optimizer.param_groups:
                group["lr"] = config.learning_rate * _lr_factor(
                    step, config.warmup_steps, total_steps
                )
            optimizer.zero_grad()
            loss = loss_fn(model.logits(token_ids, pad_mask), targets[idx])
            loss.backward()
            optimizer.step()
            step += 1
    model.eval()

    tuned = checkpoint.renamed(f"{checkpoint.config.name}-ft{step}")
    save_checkpoint(tuned, out_path)
    return {
        "out": str(out_path),
        "steps": step,
        "train_accuracy": _train_accuracy(tuned, records, targets, config.batch_size),
        "checkpoint_tag": tuned.tag,
    }
