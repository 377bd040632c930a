"""Shared binary-container plumbing for the VLEMB1 / VLMODEL1 file formats.

Layout: 8-byte magic, little-endian u32 JSON-header length, UTF-8 JSON
header, raw payload. Errors carry the byte offset where validation failed;
writes go through a temp file and atomic rename so partial files never land
under the target name.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

MAGIC_LEN = 8
HEADER_LEN_END = MAGIC_LEN + 4


class FormatError(ValueError):
    """Malformed container; `offset` is the failing byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def encode_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def write_container(path, magic: bytes, header: dict, payload: bytes) -> None:
    if len(magic) != MAGIC_LEN:
        raise ValueError(f"magic must be {MAGIC_LEN} bytes, got {len(magic)}")
    head = encode_header(header)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(payload)
    os.replace(tmp, path)


def read_container(path, magic: bytes) -> tuple[dict, bytes, int]:
    """Returns (header, payload, payload_offset); validates magic and header."""
    data = Path(path).read_bytes()
    if len(data) < MAGIC_LEN:
        raise FormatError("file shorter than the magic string", len(data))
    if data[:MAGIC_LEN] != magic:
        raise FormatError(
            f"bad magic {data[:MAGIC_LEN]!r}, expected {magic!r}", 0
        )
    if len(data) < HEADER_LEN_END:
        raise FormatError("file truncated inside the header-length field", len(data))
    (header_len,) = struct.unpack("<I", data[MAGIC_LEN:HEADER_LEN_END])
    payload_offset = HEADER_LEN_END + header_len
    if len(data) < payload_offset:
        raise FormatError("file truncated inside the JSON header", len(data))
    try:
        header = json.loads(data[HEADER_LEN_END:payload_offset].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"invalid JSON header: {exc}", HEADER_LEN_END) from exc
    return header, data[payload_offset:], payload_offset
