"""Self-contained sequence-classification checkpoints.

A checkpoint bundles three things into one file: a word-level vocabulary,
an architecture config, and the weights of a small transformer encoder
(token + position embeddings with LayerNorm, then post-norm self-attention
blocks, then a linear classification head). The head reads the LAST real
token of each sequence — the classifier position — which keeps per-ad
vectors content-dependent at every layer, embedding output included. A
begin-of-sequence anchor is prepended to every encoding so even empty text
has a classifier position.

The checkpoint tag is "<name>@<content-hash>": the hash covers vocabulary,
architecture, and every weight tensor (but not the name), so two checkpoints
with equal tags are functionally interchangeable while retrained variants of
the same name are still distinguishable.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import torch
from torch import nn

FORMAT_NAME = "TOYCKPT1"

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
BOS_TOKEN = "[BOS]"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, BOS_TOKEN)
PAD_ID, UNK_ID, BOS_ID = 0, 1, 2


@dataclass(frozen=True)
class ToyConfig:
    vocab_size: int
    n_classes: int
    dim: int = 16
    n_blocks: int = 2
    n_heads: int = 2
    ffn_dim: int = 32
    max_seq: int = 512
    name: str = "toy"

    def __post_init__(self):
        if self.vocab_size < len(SPECIAL_TOKENS):
            raise ValueError("vocab_size must cover the special tokens")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.dim % self.n_heads != 0:
            raise ValueError(f"dim {self.dim} not divisible by n_heads {self.n_heads}")
        if self.n_blocks < 1 or self.max_seq < 1:
            raise ValueError("n_blocks and max_seq must be positive")


class EncoderBlock(nn.Module):
    def __init__(self, dim: int, n_heads: int, ffn_dim: int):
        super().__init__()
        self.attn = nn.MultiheadAttention(dim, n_heads, batch_first=True)
        self.norm1 = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(nn.Linear(dim, ffn_dim), nn.GELU(), nn.Linear(ffn_dim, dim))
        self.norm2 = nn.LayerNorm(dim)

    def forward(self, hidden: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        attended, _ = self.attn(
            hidden, hidden, hidden, key_padding_mask=pad_mask, need_weights=False
        )
        hidden = self.norm1(hidden + attended)
        return self.norm2(hidden + self.ffn(hidden))


class ToyTransformer(nn.Module):
    def __init__(self, config: ToyConfig):
        super().__init__()
        self.config = config
        self.tok_emb = nn.Embedding(config.vocab_size, config.dim, padding_idx=PAD_ID)
        self.pos_emb = nn.Embedding(config.max_seq, config.dim)
        self.emb_norm = nn.LayerNorm(config.dim)
        self.blocks = nn.ModuleList(
            EncoderBlock(config.dim, config.n_heads, config.ffn_dim)
            for _ in range(config.n_blocks)
        )
        self.head = nn.Linear(config.dim, config.n_classes)

    def hidden_states(
        self, token_ids: torch.Tensor, pad_mask: torch.Tensor
    ) -> list[torch.Tensor]:
        """All per-layer states, embedding output first: n_blocks + 1 tensors (B, T, dim)."""
        positions = torch.arange(token_ids.shape[1], device=token_ids.device)
        hidden = self.emb_norm(self.tok_emb(token_ids) + self.pos_emb(positions))
        states = [hidden]
        for block in self.blocks:
            hidden = block(hidden, pad_mask)
            states.append(hidden)
        return states

    def logits(self, token_ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        final = self.hidden_states(token_ids, pad_mask)[-1]
        return self.head(gather_positions(final, classifier_positions(pad_mask)))


def classifier_positions(pad_mask: torch.Tensor) -> torch.Tensor:
    """Index of the last real (unpadded) token in each row."""
    return (~pad_mask).sum(dim=1) - 1


def gather_positions(hidden: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
    """Pick one (dim,) vector per row of a (B, T, dim) tensor."""
    return hidden[torch.arange(hidden.shape[0], device=hidden.device), positions]


def build_vocab(texts) -> dict[str, int]:
    """Word-level vocabulary over whitespace tokens; specials get the low ids."""
    vocab = {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}
    for word in sorted({w for text in texts for w in str(text).split()}):
        if word not in vocab:
            vocab[word] = len(vocab)
    return vocab


class Checkpoint:
    """A loaded (config, vocab, model) bundle plus its content-addressed tag."""

    def __init__(self, config: ToyConfig, vocab: dict[str, int], model: ToyTransformer):
        if config.vocab_size != len(vocab):
            raise ValueError(
                f"config says vocab_size={config.vocab_size} but vocab has {len(vocab)} entries"
            )
        self.config = config
        self.vocab = dict(vocab)
        self.model = model

    @property
    def n_export_layers(self) -> int:
        return self.config.n_blocks + 1

    def encode(self, texts, max_seq: int | None = None):
        """Texts -> (token_ids, pad_mask, seq_lens); BOS first, truncated, padded.

        The classifier position is the last real token of each row (the BOS
        anchor itself for empty text). Over-long inputs are always truncated
        to the position-table limit, never rejected.
        """
        limit = self.config.max_seq if max_seq is None else min(max_seq, self.config.max_seq)
        if limit < 1:
            raise ValueError("max_seq must be at least 1")
        rows = []
        for text in texts:
            ids = [BOS_ID] + [self.vocab.get(w, UNK_ID) for w in str(text).split()]
            rows.append(ids[:limit])
        seq_lens = [len(r) for r in rows]
        width = max(seq_lens, default=1)
        token_ids = torch.full((len(rows), width), PAD_ID, dtype=torch.long)
        pad_mask = torch.ones((len(rows), width), dtype=torch.bool)
        for i, row in enumerate(rows):
            token_ids[i, : len(row)] = torch.tensor(row, dtype=torch.long)
            pad_mask[i, : len(row)] = False
        return token_ids, pad_mask, seq_lens

    @property
    def content_hash(self) -> str:
        """Hash of vocab, architecture (name excluded), and all weights."""
        digest = hashlib.sha256()
        arch = {k: v for k, v in asdict(self.config).items() if k != "name"}
        digest.update(json.dumps(arch, sort_keys=True).encode("utf-8"))
        digest.update(json.dumps(self.vocab, sort_keys=True).encode("utf-8"))
        state = self.model.state_dict()
        for key in sorted(state):
            tensor = state[key].detach().cpu().contiguous()
            digest.update(key.encode("utf-8") + b"\x00")
            digest.update(str(tuple(tensor.shape)).encode("utf-8"))
            digest.update(tensor.numpy().tobytes())
        return digest.hexdigest()

    @property
    def tag(self) -> str:
        return f"{self.config.name}@{self.content_hash[:12]}"

    def renamed(self, name: str) -> "Checkpoint":
        return Checkpoint(replace(self.config, name=name), self.vocab, self.model)


def new_toy_checkpoint(
    vocab: dict[str, int],
    n_classes: int,
    *,
    dim: int = 16,
    n_blocks: int = 2,
    n_heads: int = 2,
    ffn_dim: int = 32,
    max_seq: int = 512,
    seed: int = 0,
    name: str = "toy",
) -> Checkpoint:
    config = ToyConfig(
        vocab_size=len(vocab),
        n_classes=n_classes,
        dim=dim,
        n_blocks=n_blocks,
        n_heads=n_heads,
        ffn_dim=ffn_dim,
        max_seq=max_seq,
        name=name,
    )
    torch.manual_seed(seed)
    return Checkpoint(config, vocab, ToyTransformer(config))


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    path = Path(path)
    payload = {
        "format": FORMAT_NAME,
        "config": asdict(checkpoint.config),
        "vocab": checkpoint.vocab,
        "state": {k: v.cpu() for k, v in checkpoint.model.state_dict().items()},
    }
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint file not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise ValueError(f"{path} is not a {FORMAT_NAME} checkpoint")
    config = ToyConfig(**payload["config"])
    model = ToyTransformer(config)
    model.load_state_dict(payload["state"])
    model.eval()
    return Checkpoint(config, payload["vocab"], model)
