"""Shared fixtures: a small labeled ad corpus and checkpoints derived from it.

Ad texts vary in length and final token so the representation matrix of
every layer — embedding output included — varies across ads; a corpus whose
ads all end identically would make the first layer's classifier vectors
constant and representation-similarity scores on it degenerate.
"""

from __future__ import annotations

import json

import pytest

from embed_exporter.checkpoint import build_vocab, new_toy_checkpoint, save_checkpoint
from embed_exporter.export import read_corpus
from embed_exporter.finetune import FinetuneConfig, run_finetune

VENDOR_SIGS = (("alice", "alpha aurora"), ("bob", "bravo borealis"), ("carol", "charlie comet"))
ADS_PER_VENDOR = 8
LABELS = {"alice": 0, "bob": 1, "carol": 2}

FT_CONFIG = FinetuneConfig(
    learning_rate=3e-3, batch_size=8, epochs=25, warmup_steps=0, seed=3
)


def corpus_rows():
    rows = []
    for vi, (vendor, sig) in enumerate(VENDOR_SIGS):
        for i in range(ADS_PER_VENDOR):
            filler = " ".join(f"w{j}" for j in range(i % 4))
            rows.append(
                {
                    "market": "m",
                    "vendor": vendor,
                    "title": f"{sig} pack {i}",
                    "description": f"{sig} quality listing {filler} lot{vi}{i}".strip(),
                }
            )
    return rows


def write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def work_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("exporter")


@pytest.fixture(scope="session")
def corpus_path(work_dir):
    return write_jsonl(work_dir / "corpus.jsonl", corpus_rows())


@pytest.fixture(scope="session")
def tiny_corpus_path(work_dir):
    return write_jsonl(work_dir / "tiny.jsonl", corpus_rows()[:3])


@pytest.fixture(scope="session")
def empty_corpus_path(work_dir):
    path = work_dir / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def labels_path(work_dir):
    path = work_dir / "labels.json"
    path.write_text(json.dumps(LABELS), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def toy_checkpoint_path(work_dir, corpus_path):
    records = read_corpus(corpus_path)
    checkpoint = new_toy_checkpoint(
        build_vocab([r.text for r in records]), n_classes=3, seed=7
    )
    path = work_dir / "toy.ckpt"
    save_checkpoint(checkpoint, path)
    return path


@pytest.fixture(scope="session")
def tuned_checkpoint_path(work_dir, corpus_path, labels_path, toy_checkpoint_path):
    path = work_dir / "tuned.ckpt"
    summary = run_finetune(toy_checkpoint_path, corpus_path, labels_path, path, FT_CONFIG)
    assert summary["steps"] > 0
    return path
