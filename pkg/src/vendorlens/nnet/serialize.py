"""Versioned binary model container (magic "VLMODEL1").

Header JSON records kind, dimensions, architecture, training metadata, and
the ordered (name, shape) list of parameter tensors; the payload is their
float32 little-endian data concatenated in that order. Serialization is
deterministic: identical models produce identical bytes.
"""

from __future__ import annotations

import numpy as np

from ..binfmt import FormatError, read_container, write_container
from .train import TrainedClassifier

MODEL_MAGIC = b"VLMODEL1"


def save_model(model: TrainedClassifier, path) -> None:
    names = sorted(model.params)
    header = {
        "version": 1,
        "kind": model.kind,
        "n_classes": model.n_classes,
        "input_dim": model.input_dim,
        "arch": model.arch,
        "meta": model.meta,
        "params": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
    }
    payload = b"".join(
        np.ascontiguousarray(model.params[n], dtype="<f4").tobytes() for n in names
    )
    write_container(path, MODEL_MAGIC, header, payload)


def load_model(path) -> TrainedClassifier:
    header, payload, payload_offset = read_container(path, MODEL_MAGIC)
    if header.get("version") != 1:
        raise FormatError(f"unsupported container version {header.get('version')!r}", 12)
    expected_floats = sum(int(np.prod(p["shape"])) for p in header["params"])
    if len(payload) != 4 * expected_floats:
        raise FormatError(
            f"payload holds {len(payload)} bytes, expected {4 * expected_floats}",
            payload_offset + min(len(payload), 4 * expected_floats),
        )
    params: dict[str, np.ndarray] = {}
    cursor = 0
    for spec in header["params"]:
        count = int(np.prod(spec["shape"]))
        raw = np.frombuffer(payload, dtype="<f4", count=count, offset=cursor * 4)
        # NaN/inf are allowed here: NB stores -inf log-priors for absent classes
        params[spec["name"]] = raw.reshape(spec["shape"]).astype(np.float64)
        cursor += count
    return TrainedClassifier(
        kind=header["kind"],
        params=params,
        n_classes=int(header["n_classes"]),
        input_dim=int(header["input_dim"]),
        arch=header.get("arch", {}),
        meta=header.get("meta", {}),
    )
