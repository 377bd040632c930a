"""Declarative pipeline configuration for the command-line entry point.

One JSON document drives every subcommand; flags override file values, and
the VL_SEED environment variable overrides both. Validation failures raise
ConfigError, which the CLI maps to exit code 2.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .nnet import BiGRUConfig, TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    seed: int = 1111
    out_dir: str = "out"
    corpus_path: str | None = None
    corpus_format: str | None = None
    truncation_limit: int = 512
    min_ads: int = 20
    split_ratios: tuple[float, float, float] = (0.75, 0.05, 0.20)

    ngram_range: tuple[int, int] = (1, 2)
    min_df: int = 2
    case_mode: str = "preserve"

    classifier_kind: str = "softmax"
    nb_alpha: float = 1.0
    hidden: int = 64
    train: TrainConfig = field(default_factory=TrainConfig)
    bigru: BiGRUConfig = field(default_factory=BiGRUConfig)

    emb_before: str | None = None
    emb_after: str | None = None
    emb_style: str | None = None
    emb_token: str | None = None
    layer_k: int = 4

    sim_norm_threshold: float = 0.8
    name_sim_threshold: float = 0.7
    pair_cap: int = 200
    profile_cap: int = 200

    transfer_static_dim: int = 32
    transfer_max_len: int = 64
    source_model: str | None = None
    source_vocab: str | None = None
    source_labels: str | None = None

    def __post_init__(self):
        if not (0.0 <= self.sim_norm_threshold <= 2.0):
            raise ConfigError(f"sim_norm_threshold must be in [0, 2], got {self.sim_norm_threshold}")
        if not (0.0 <= self.name_sim_threshold <= 2.0):
            raise ConfigError(f"name_sim_threshold must be in [0, 2], got {self.name_sim_threshold}")
        if self.truncation_limit < 1:
            raise ConfigError(f"truncation_limit must be >= 1, got {self.truncation_limit}")
        if self.min_ads < 1:
            raise ConfigError(f"min_ads must be >= 1, got {self.min_ads}")

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True, default=repr).encode()
        ).hexdigest()[:16]

    def out(self) -> Path:
        p = Path(self.out_dir)
        p.mkdir(parents=True, exist_ok=True)
        return p


_NESTED_KEYS = {"train": TrainConfig, "bigru": BiGRUConfig}
_TUPLE_KEYS = {"split_ratios", "ngram_range"}


def load_config(path: str | None, overrides: dict | None = None) -> PipelineConfig:
    """Read the JSON config document, apply flag overrides, then VL_SEED."""
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config root must be a JSON object, got {type(raw).__name__}")

    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    known = set(PipelineConfig.__dataclass_fields__)
    unknown = set(merged) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    kwargs = {}
    for key, value in merged.items():
        if key in _NESTED_KEYS and isinstance(value, dict):
            try:
                value = _NESTED_KEYS[key](**value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad {key} section: {exc}") from exc
        elif key in _TUPLE_KEYS and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        config = PipelineConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    # the root seed flows into training unless the train section pinned its own
    train_section = merged.get("train")
    if train_section is None or (isinstance(train_section, dict) and "seed" not in train_section):
        config.train = TrainConfig(**{**asdict(config.train), "seed": config.seed})

    env_seed = os.environ.get("VL_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"VL_SEED must be an integer, got {env_seed!r}") from exc
        config.seed = seed
        config.train = TrainConfig(**{**asdict(config.train), "seed": seed})
    return config
