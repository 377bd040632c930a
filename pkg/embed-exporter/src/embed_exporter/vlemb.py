"""Standalone VLEMB1 writer.

VLEMB1 is the consumer toolkit's binary container for per-ad, per-layer
float32 representations. This module re-implements the byte layout from the
published format description so the exporter has no code dependency on the
consumer package:

    8-byte magic "VLEMB1\\x00\\x00"
    little-endian u32 JSON-header length
    UTF-8 JSON header (sorted keys, compact separators)
    raw little-endian float32 payload, C row order

Header fields: version=1, mode ("cls"|"token"), n_ads, n_layers, dim,
ad_ids, checkpoint_tag, and (token mode only) seq_lens. Payload shape is
(n_ads, n_layers, dim) for cls mode and (sum(seq_lens), n_layers, dim) for
token mode, where each ad contributes a contiguous (seq_len, n_layers, dim)
slab. Files are written through a temp file plus atomic rename so partial
output never lands under the target name.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"VLEMB1\x00\x00"
MODES = ("cls", "token")


def write_vlemb(
    path,
    *,
    mode: str,
    values: np.ndarray,
    ad_ids: Sequence[str],
    checkpoint_tag: str,
    seq_lens: Sequence[int] | None = None,
) -> None:
    """Validate and write one VLEMB1 file atomically."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 3:
        raise ValueError(f"values must be 3-D (rows, layers, dim), got shape {values.shape}")
    ad_ids = [str(a) for a in ad_ids]
    if len(set(ad_ids)) != len(ad_ids):
        raise ValueError("ad_ids must be unique")
    if mode == "cls":
        if seq_lens is not None:
            raise ValueError("seq_lens is only valid in token mode")
        if values.shape[0] != len(ad_ids):
            raise ValueError(
                f"cls payload has {values.shape[0]} rows for {len(ad_ids)} ad_ids"
            )
    else:
        if seq_lens is None or len(seq_lens) != len(ad_ids):
            raise ValueError("token mode needs one seq_len per ad")
        seq_lens = [int(s) for s in seq_lens]
        if any(s < 0 for s in seq_lens):
            raise ValueError("seq_lens must be non-negative")
        if values.shape[0] != sum(seq_lens):
            raise ValueError(
                f"token payload has {values.shape[0]} rows, seq_lens sum to {sum(seq_lens)}"
            )
    if values.size and not np.all(np.isfinite(values)):
        raise ValueError("payload contains non-finite values")

    header = {
        "version": 1,
        "mode": mode,
        "n_ads": len(ad_ids),
        "n_layers": int(values.shape[1]),
        "dim": int(values.shape[2]),
        "ad_ids": ad_ids,
        "checkpoint_tag": str(checkpoint_tag),
    }
    if mode == "token":
        header["seq_lens"] = seq_lens
    head = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())
    os.replace(tmp, path)
