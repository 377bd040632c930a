"""Low-resource market adaptation.

Three ingredients: (1) zero-shot evaluation of a source-market classifier on
a target market, with unseen vendors routed to the catch-all class and
micro-F1 as the headline metric; (2) layer-combination modes that collapse a
token-mode embedding tensor into per-token input vectors; (3) a BiGRU trained
on those frozen combined representations, benchmarked against the zero-shot
route and an end-to-end BiGRU over static token-id embeddings.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import Corpus, LabelSpace, SplitSet
from .evalmetrics import EvalReport, evaluate, zero_shot_remap
from .nnet import BiGRUConfig, TrainConfig, TrainedClassifier, predict, train_gradient_model
from .repspace import EmbeddingTensor

COMBINE_MODES = ("embedding", "last", "second_to_last", "wsum_all", "wsum_last4")


def combination_weights(mode: str, n_layers: int, explicit=None) -> np.ndarray:
    """Per-layer weight vector realizing a combination mode.

    Layer index 0 is the embedding layer; deeper blocks follow in order.
    Explicit weights (any non-negative vector of length n_layers) override the
    named modes.
    """
    if explicit is not None:
        w = np.asarray(explicit, dtype=np.float64)
        if w.shape != (n_layers,) or (w < 0).any():
            raise ValueError(f"explicit weights must be {n_layers} non-negative values")
        return w
    if mode not in COMBINE_MODES:
        raise ValueError(f"mode must be one of {COMBINE_MODES}, got {mode!r}")
    w = np.zeros(n_layers)
    if mode == "embedding":
        w[0] = 1.0
    elif mode == "last":
        w[n_layers - 1] = 1.0
    elif mode == "second_to_last":
        if n_layers < 2:
            raise ValueError(f"mode {mode!r} needs >= 2 layers, tensor has {n_layers}")
        w[n_layers - 2] = 1.0
    elif mode == "wsum_all":
        w[:] = 1.0 / n_layers
    else:  # wsum_last4
        if n_layers < 4:
            raise ValueError(f"mode {mode!r} needs >= 4 layers, tensor has {n_layers}")
        w[n_layers - 4 :] = 0.25
    return w


def layer_combination(
    tensor: EmbeddingTensor, mode: str, explicit_weights=None
) -> list[np.ndarray]:
    """Collapse a token-mode tensor's layers: one (seq_len, dim) array per ad."""
    if tensor.mode != "token":
        raise ValueError("layer_combination expects a token-mode tensor")
    w = combination_weights(mode, tensor.n_layers, explicit_weights)
    return [
        np.einsum("tld,l->td", tensor.token_slab(i).astype(np.float64), w)
        for i in range(tensor.n_ads)
    ]


@dataclass(frozen=True)
class ZeroShotResult:
    report: EvalReport
    headline_metric: str
    headline_value: float
    remapped_vendors: int


def zero_shot_verify(
    source_model: TrainedClassifier,
    source_labels: LabelSpace,
    target_corpus: Corpus,
    target_features,
) -> ZeroShotResult:
    """Evaluate a source-trained classifier on a target corpus without training.

    Gold labels come from the source label space with unseen vendors mapped to
    its catch-all index; micro-F1 is the headline number.
    """
    gold, n_remapped = zero_shot_remap(source_labels, target_corpus)
    labels, _ = predict(source_model, target_features)
    report = evaluate(gold, labels, source_labels.n_classes)
    return ZeroShotResult(
        report=report,
        headline_metric="micro_f1",
        headline_value=report.micro_f1,
        remapped_vendors=n_remapped,
    )


def train_transfer_bigru(
    tensor: EmbeddingTensor,
    mode: str,
    labels,
    n_classes: int,
    config: TrainConfig,
    gru_config: BiGRUConfig,
    split: SplitSet | None = None,
    explicit_weights=None,
):
    """BiGRU over frozen combined token representations; returns (model, EvalReport).

    With a split, training uses the train part (val part for early stopping)
    and the report covers the test part; without one, the report covers the
    training data itself.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != tensor.n_ads:
        raise ValueError(f"{len(labels)} labels for {tensor.n_ads} ads")
    sequences = layer_combination(tensor, mode, explicit_weights)
    arch = {"bigru": asdict(gru_config)}
    if split is not None:
        tr, va, te = list(split.train), list(split.val), list(split.test)
        val_data = ([sequences[i] for i in va], labels[va]) if va else None
        model = train_gradient_model(
            "bigru",
            ([sequences[i] for i in tr], labels[tr]),
            config,
            n_classes,
            arch=arch,
            val_data=val_data,
        )
        eval_idx = te or tr
        pred, _ = predict(model, [sequences[i] for i in eval_idx])
        report = evaluate(labels[eval_idx], pred, n_classes)
    else:
        model = train_gradient_model("bigru", (sequences, labels), config, n_classes, arch=arch)
        pred, _ = predict(model, sequences)
        report = evaluate(labels, pred, n_classes)
    return model, report


def make_static_embeddings(n_tokens: int, dim: int, seed: int) -> np.ndarray:
    """Frozen random token-embedding table (stand-in for pretrained static vectors)."""
    rng = np.random.default_rng([seed, 0x57A71C])
    return rng.standard_normal((n_tokens, dim)) / np.sqrt(dim)


def load_static_embeddings(path) -> tuple[dict[str, int], np.ndarray]:
    """Text format: one `token v1 v2 ... vD` line per token."""
    ids: dict[str, int] = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            ids[parts[0]] = len(rows)
            rows.append(np.array([float(x) for x in parts[1:]]))
    if not rows:
        raise ValueError(f"no embedding rows found in {path}")
    return ids, np.stack(rows)


def token_id_sequences(
    corpus: Corpus,
    token_ids: dict[str, int],
    table: np.ndarray,
    max_len: int = 64,
    unk_id: int = 0,
) -> list[np.ndarray]:
    """Embed each ad's leading tokens through a static table: one (T, D) per ad."""
    out = []
    for ad in corpus.ads:
        toks = ad.merged_text.split()[:max_len] or ["[EMPTY]"]
        idx = [token_ids.get(t, unk_id) for t in toks]
        out.append(table[idx])
    return out


def build_token_vocab(corpus: Corpus, indices=None) -> dict[str, int]:
    """Token -> id map (id 0 reserved for unknowns) from the given ads."""
    ads = corpus.ads if indices is None else [corpus.ads[i] for i in indices]
    vocab: dict[str, int] = {"[UNK]": 0}
    for ad in ads:
        for tok in ad.merged_text.split():
            if tok not in vocab:
                vocab[tok] = len(vocab)
    return vocab


@dataclass
class TransferRun:
    source_tag: str
    target_tag: str
    rows: list[dict] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["model,mode,micro_f1,macro_f1,accuracy,params,wall_seconds"]
        for r in self.rows:
            lines.append(
                ",".join(
                    str(r.get(k, "skipped"))
                    for k in ("model", "mode", "micro_f1", "macro_f1", "accuracy", "params", "wall_seconds")
                )
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {"source": self.source_tag, "target": self.target_tag, "rows": self.rows},
            sort_keys=True,
        )


def _metric_cells(report: EvalReport) -> dict:
    return {
        "micro_f1": round(report.micro_f1, 6),
        "macro_f1": round(report.macro_f1, 6),
        "accuracy": round(report.accuracy, 6),
    }


def run_lr_benchmark(
    target_corpus: Corpus,
    target_labels,
    n_classes: int,
    split: SplitSet,
    token_tensor: EmbeddingTensor | None,
    config: TrainConfig,
    gru_config: BiGRUConfig,
    source_model: TrainedClassifier | None = None,
    source_label_space: LabelSpace | None = None,
    source_target_features=None,
    static_dim: int = 32,
    max_len: int = 64,
    source_tag: str = "",
    target_tag: str = "",
) -> TransferRun:
    """One comparison table: zero-shot, end-to-end BiGRU, and 5 transfer modes.

    Inputs that are unavailable produce rows with "skipped" metric cells
    rather than failing the whole run.
    """
    run = TransferRun(source_tag=source_tag, target_tag=target_tag)
    target_labels = np.asarray(target_labels, dtype=np.int64)

    if source_model is not None and source_label_space is not None and source_target_features is not None:
        t0 = time.perf_counter()
        zs = zero_shot_verify(source_model, source_label_space, target_corpus, source_target_features)
        row = {"model": "zero_shot", "mode": "-", **_metric_cells(zs.report)}
        row["params"] = int(sum(p.size for p in source_model.params.values()))
        row["wall_seconds"] = round(time.perf_counter() - t0, 3)
        run.rows.append(row)
    else:
        run.rows.append({"model": "zero_shot", "mode": "-"})

    t0 = time.perf_counter()
    vocab = build_token_vocab(target_corpus, split.train)
    table = make_static_embeddings(len(vocab), static_dim, config.seed)
    sequences = token_id_sequences(target_corpus, vocab, table, max_len=max_len)
    tr, va, te = list(split.train), list(split.val), list(split.test)
    e2e = train_gradient_model(
        "bigru",
        ([sequences[i] for i in tr], target_labels[tr]),
        config,
        n_classes,
        arch={"bigru": asdict(gru_config)},
        val_data=([sequences[i] for i in va], target_labels[va]) if va else None,
    )
    pred, _ = predict(e2e, [sequences[i] for i in te or tr])
    report = evaluate(target_labels[te or tr], pred, n_classes)
    row = {"model": "end_to_end_bigru", "mode": "static_ids", **_metric_cells(report)}
    row["params"] = int(sum(p.size for p in e2e.params.values()))
    row["wall_seconds"] = round(time.perf_counter() - t0, 3)
    run.rows.append(row)

    for mode in COMBINE_MODES:
        if token_tensor is None:
            run.rows.append({"model": "transfer_bigru", "mode": mode})
            continue
        t0 = time.perf_counter()
        model, report = train_transfer_bigru(
            token_tensor, mode, target_labels, n_classes, config, gru_config, split=split
        )
        row = {"model": "transfer_bigru", "mode": mode, **_metric_cells(report)}
        row["params"] = int(sum(p.size for p in model.params.values()))
        row["wall_seconds"] = round(time.perf_counter() - t0, 3)
        run.rows.append(row)
    return run
