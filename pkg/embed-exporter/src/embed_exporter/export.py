"""Batch-extract per-layer representations of an ad corpus into VLEMB1.

The corpus is the consumer toolkit's JSONL interchange: one object per line
with market/vendor/title/description fields. Ads keep file order and get the
same positional ids the consumer assigns on ingest ("ad-000000", ...), so
exported tensors align with an ingested corpus row for row. The model text
is "title [SEP] description", matching the consumer's merged view.

"cls" mode stores one vector per ad and layer, read at the checkpoint's
classifier position (the last real token); "token" mode stores every token
position, one contiguous (seq_len, n_layers, dim) slab per ad, so the
classifier vector of ad i sits at slab row seq_lens[i] - 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .checkpoint import Checkpoint, load_checkpoint
from .vlemb import MODES, write_vlemb

REQUIRED_FIELDS = ("market", "vendor", "title", "description")
TEXT_SEPARATOR = "[SEP]"


@dataclass(frozen=True)
class CorpusRecord:
    ad_id: str
    vendor_norm: str
    text: str


@dataclass(frozen=True)
class ExportJob:
    checkpoint_path: str
    corpus_path: str
    mode: str
    out_path: str
    batch_size: int = 32
    max_seq: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def read_corpus(path) -> list[CorpusRecord]:
    """Parse the JSONL ad corpus; errors carry the 1-based line number."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    records: list[CorpusRecord] = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            for key in REQUIRED_FIELDS:
                if obj.get(key) is None:
                    raise ValueError(f"line {line_no}: missing field {key!r}")
            records.append(
                CorpusRecord(
                    ad_id=f"ad-{len(records):06d}",
                    vendor_norm=str(obj["vendor"]).lower(),
                    text=f"{obj['title']} {TEXT_SEPARATOR} {obj['description']}",
                )
            )
    return records


def _batches(items, size):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def export_tensor(
    checkpoint: Checkpoint,
    records: list[CorpusRecord],
    mode: str,
    *,
    batch_size: int = 32,
    max_seq: int | None = None,
) -> tuple[np.ndarray, list[str], list[int] | None]:
    """Run the encoder over the corpus; returns (values, ad_ids, seq_lens)."""
    model = checkpoint.model
    model.eval()
    n_layers = checkpoint.n_export_layers
    dim = checkpoint.config.dim
    ad_ids = [rec.ad_id for rec in records]
    chunks: list[np.ndarray] = []
    seq_lens: list[int] = []
    with torch.no_grad():
        for batch in _batches(records, batch_size):
            token_ids, pad_mask, lens = checkpoint.encode(
                [rec.text for rec in batch], max_seq=max_seq
            )
            stacked = torch.stack(model.hidden_states(token_ids, pad_mask), dim=1)
            if mode == "cls":
                positions = torch.tensor(lens, dtype=torch.long) - 1
                rows = torch.arange(stacked.shape[0])
                chunks.append(stacked[rows, :, positions, :].numpy())
            else:
                for i, length in enumerate(lens):
                    chunks.append(stacked[i, :, :length, :].permute(1, 0, 2).numpy())
                seq_lens.extend(lens)
    if chunks:
        values = np.concatenate(chunks, axis=0).astype(np.float32)
    else:
        values = np.zeros((0, n_layers, dim), dtype=np.float32)
    return values, ad_ids, (seq_lens if mode == "token" else None)


def run_export(job: ExportJob) -> dict:
    checkpoint = load_checkpoint(job.checkpoint_path)
    records = read_corpus(job.corpus_path)
    values, ad_ids, seq_lens = export_tensor(
        checkpoint, records, job.mode, batch_size=job.batch_size, max_seq=job.max_seq
    )
    write_vlemb(
        job.out_path,
        mode=job.mode,
        values=values,
        ad_ids=ad_ids,
        checkpoint_tag=checkpoint.tag,
        seq_lens=seq_lens,
    )
    return {
        "out": str(job.out_path),
        "mode": job.mode,
        "n_ads": len(ad_ids),
        "n_layers": checkpoint.n_export_layers,
        "dim": checkpoint.config.dim,
        "checkpoint_tag": checkpoint.tag,
    }
