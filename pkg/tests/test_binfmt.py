"""Binary container plumbing shared by the embedding and model formats."""

from __future__ import annotations

import json
import struct

import pytest

from vendorlens.binfmt import FormatError, encode_header, read_container, write_container

MAGIC = b"TESTMAG\x00"


def test_round_trip(tmp_path):
    path = tmp_path / "file.bin"
    header = {"version": 1, "z": [1, 2], "a": "x"}
    payload = bytes(range(16))
    write_container(path, MAGIC, header, payload)
    got_header, got_payload, payload_offset = read_container(path, MAGIC)
    assert got_header == header
    assert got_payload == payload
    head = encode_header(header)
    assert payload_offset == 12 + len(head)
    raw = path.read_bytes()
    assert raw[:8] == MAGIC
    assert struct.unpack("<I", raw[8:12])[0] == len(head)


def test_write_is_byte_stable(tmp_path):
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    header = {"b": 2, "a": 1}
    write_container(p1, MAGIC, header, b"xy")
    write_container(p2, MAGIC, header, b"xy")
    assert p1.read_bytes() == p2.read_bytes()


def test_header_json_is_compact_and_sorted():
    head = encode_header({"b": 1, "a": 2})
    assert head == b'{"a":2,"b":1}'
    assert json.loads(head) == {"a": 2, "b": 1}


def test_bad_magic_offset_zero(tmp_path):
    path = tmp_path / "file.bin"
    write_container(path, b"OTHERMG\x00", {}, b"")
    with pytest.raises(FormatError) as err:
        read_container(path, MAGIC)
    assert err.value.offset == 0


def test_truncated_inside_magic(tmp_path):
    path = tmp_path / "file.bin"
    path.write_bytes(MAGIC[:3])
    with pytest.raises(FormatError) as err:
        read_container(path, MAGIC)
    assert err.value.offset == 3


def test_truncated_inside_length_field(tmp_path):
    path = tmp_path / "file.bin"
    path.write_bytes(MAGIC + b"\x01\x00")
    with pytest.raises(FormatError) as err:
        read_container(path, MAGIC)
    assert err.value.offset == 10


def test_truncated_inside_header(tmp_path):
    path = tmp_path / "file.bin"
    head = encode_header({"a": 1})
    path.write_bytes(MAGIC + struct.pack("<I", len(head)) + head[:-2])
    with pytest.raises(FormatError) as err:
        read_container(path, MAGIC)
    assert err.value.offset == len(MAGIC) + 4 + len(head) - 2


def test_invalid_json_header(tmp_path):
    path = tmp_path / "file.bin"
    bad = b"{not json!"
    path.write_bytes(MAGIC + struct.pack("<I", len(bad)) + bad)
    with pytest.raises(FormatError) as err:
        read_container(path, MAGIC)
    assert err.value.offset == 12


def test_no_partial_file_on_crash(tmp_path):
    # the temp file is renamed atomically; a failed write leaves nothing behind
    path = tmp_path / "file.bin"
    with pytest.raises(ValueError):
        write_container(path, b"SHORT", {}, b"")
    assert not path.exists()


def test_error_message_carries_offset_text(tmp_path):
    path = tmp_path / "file.bin"
    path.write_bytes(b"WRONGMG\x00" + b"\x00" * 8)
    with pytest.raises(FormatError) as err:
        read_container(path, MAGIC)
    assert "byte offset 0" in str(err.value)
