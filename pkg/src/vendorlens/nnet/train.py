"""Training orchestration: config, deterministic loops, early stopping, prediction.

Every source of randomness (parameter init, batch shuffling, dropout masks)
derives from the single config seed, so identical config + data replays to
bit-identical parameters. Sequence models train on rectangular batches built
by bucketing same-length sequences together.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .gru import BiGRUClassifier, BiGRUConfig
from .models import MLPModel, SoftmaxModel, nb_fit, nb_predict_proba

GRADIENT_KINDS = ("softmax", "mlp", "bigru")


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, lr: float, grad_norm: float):
        super().__init__(
            f"non-finite loss at step {step} (lr {lr:.3e}, grad norm {grad_norm:.3e})"
        )
        self.step = step
        self.lr = lr
        self.grad_norm = grad_norm


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    warmup_steps: int = 500
    batch_size: int = 32
    max_epochs: int = 40
    seed: int = 1111
    class_weights: str = "uniform"  # or "balanced"
    decoupled_weight_decay: bool = True
    patience: int = 5  # early-stopping epochs on val macro-F1; 0 disables

    def __post_init__(self):
        if self.learning_rate <= 0 or self.beta1 <= 0 or self.beta2 <= 0:
            raise ValueError("rates must be positive")
        if self.warmup_steps < 0:
            raise ValueError(f"warmup_steps must be >= 0, got {self.warmup_steps}")
        if self.class_weights not in ("uniform", "balanced"):
            raise ValueError(f"class_weights must be uniform|balanced, got {self.class_weights!r}")

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True, default=repr).encode()
        ).hexdigest()[:16]


@dataclass
class TrainedClassifier:
    kind: str
    params: dict[str, np.ndarray]
    n_classes: int
    input_dim: int
    arch: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def class_weight_vector(y: np.ndarray, n_classes: int, mode: str) -> np.ndarray | None:
    """balanced: w_k = N / (K * count_k) over present classes (absent -> 0)."""
    if mode == "uniform":
        return None
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    weights = np.zeros(n_classes)
    present = counts > 0
    weights[present] = len(y) / (n_classes * counts[present])
    return weights


def _instantiate(kind: str, input_dim: int, n_classes: int, arch: dict, seed: int):
    if kind == "softmax":
        return SoftmaxModel(input_dim, n_classes, seed=seed)
    if kind == "mlp":
        return MLPModel(input_dim, n_classes, hidden=arch.get("hidden", 64), seed=seed)
    if kind == "bigru":
        cfg = BiGRUConfig(**arch.get("bigru", {})) if "bigru" in arch else BiGRUConfig()
        return BiGRUClassifier(input_dim, n_classes, cfg, seed=seed)
    raise ValueError(f"unknown gradient model kind {kind!r}")


def _as_sequences(X):
    """Normalize sequence input to a list of (T, D) float64 arrays."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return [X[i] for i in range(X.shape[0])]
    return [np.asarray(s, dtype=np.float64) for s in X]


def _length_buckets(sequences, indices):
    buckets: dict[int, list[int]] = {}
    for i in indices:
        buckets.setdefault(sequences[i].shape[0], []).append(i)
    return [buckets[t] for t in sorted(buckets)]


def _batches_for_epoch(kind, X, n, batch_size, rng):
    order = rng.permutation(n)
    if kind != "bigru":
        return [order[i : i + batch_size] for i in range(0, n, batch_size)]
    batches = []
    for bucket in _length_buckets(X, order.tolist()):
        for i in range(0, len(bucket), batch_size):
            batches.append(np.array(bucket[i : i + batch_size]))
    return batches


def _slice_inputs(kind, X, idx):
    if kind == "bigru":
        return np.stack([X[i] for i in idx])
    return X[idx]


def count_epoch_batches(kind, X, n, batch_size):
    if kind != "bigru":
        return math.ceil(n / batch_size)
    lengths: dict[int, int] = {}
    for s in X:
        lengths[s.shape[0]] = lengths.get(s.shape[0], 0) + 1
    return sum(math.ceil(c / batch_size) for c in lengths.values())


def train_nb(X, y, n_classes: int, alpha: float = 1.0) -> TrainedClassifier:
    params = nb_fit(X, np.asarray(y), n_classes, alpha=alpha)
    return TrainedClassifier(
        kind="nb",
        params=params,
        n_classes=n_classes,
        input_dim=params["feature_log_prob"].shape[1],
        meta={"alpha": alpha},
    )


def train_gradient_model(
    kind: str,
    data,
    config: TrainConfig,
    n_classes: int,
    arch: dict | None = None,
    val_data=None,
) -> TrainedClassifier:
    """Minimize class-weighted cross entropy with Adam + warmup/linear decay.

    `data` is (X, y); for kind="bigru" X is a list/array of (T, D) sequences.
    When `val_data` is given and config.patience > 0, training stops after
    `patience` epochs without val macro-F1 improvement and the best-epoch
    parameters are restored.
    """
    from ..evalmetrics import evaluate
    from .optim import Adam

    if kind not in GRADIENT_KINDS:
        raise ValueError(f"kind must be one of {GRADIENT_KINDS}, got {kind!r}")
    arch = dict(arch or {})
    X, y = data
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("training set is empty")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes}), got range [{y.min()}, {y.max()}]")
    if kind == "bigru":
        X = _as_sequences(X)
        input_dim = X[0].shape[1]
    else:
        input_dim = X.shape[1] if hasattr(X, "shape") else X.csr.shape[1]

    model = _instantiate(kind, input_dim, n_classes, arch, config.seed)
    n = len(y)
    steps_per_epoch = count_epoch_batches(kind, X, n, config.batch_size)
    total_steps = steps_per_epoch * config.max_epochs
    optimizer = Adam(
        model.params,
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        weight_decay=config.weight_decay,
        warmup_steps=config.warmup_steps,
        total_steps=total_steps,
        decoupled_weight_decay=config.decoupled_weight_decay,
    )
    weights_by_class = class_weight_vector(y, n_classes, config.class_weights)
    rng = np.random.default_rng([config.seed, 0xB5EED])

    epoch_losses: list[float] = []
    best_score = -1.0
    best_params = None
    best_epoch = 0
    stall = 0
    epochs_run = 0
    for epoch in range(config.max_epochs):
        losses = []
        for idx in _batches_for_epoch(kind, X, n, config.batch_size, rng):
            xb = _slice_inputs(kind, X, idx)
            yb = y[idx]
            wb = weights_by_class[yb] if weights_by_class is not None else None
            loss, grads = model.loss_and_grads((xb, yb, wb), train=True, rng=rng)
            if not np.isfinite(loss):
                gnorm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
                raise TrainingDiverged(optimizer.step_count + 1, optimizer.current_lr(), gnorm)
            optimizer.step(grads)
            losses.append(loss)
        epoch_losses.append(float(np.mean(losses)))
        epochs_run = epoch + 1
        if val_data is not None and config.patience > 0:
            labels, _ = _predict_model(model, kind, val_data[0])
            score = evaluate(np.asarray(val_data[1]), labels, n_classes).macro_f1
            if score > best_score:
                best_score = score
                best_params = {k: v.copy() for k, v in model.params.items()}
                best_epoch = epochs_run
                stall = 0
            else:
                stall += 1
                if stall >= config.patience:
                    break
    if best_params is not None:
        model.params.update(best_params)

    return TrainedClassifier(
        kind=kind,
        params=model.params,
        n_classes=n_classes,
        input_dim=input_dim,
        arch=arch,
        meta={
            "config_digest": config.digest(),
            "seed": config.seed,
            "epochs_run": epochs_run,
            "best_epoch": best_epoch if best_params is not None else epochs_run,
            "best_val_macro_f1": best_score if best_params is not None else None,
            "final_losses": epoch_losses[-5:],
            "loss_history": list(epoch_losses),
        },
    )


def _predict_model(model, kind: str, inputs):
    if kind == "bigru":
        sequences = _as_sequences(inputs)
        probs = np.zeros((len(sequences), model.n_classes))
        for bucket in _length_buckets(sequences, range(len(sequences))):
            for i in range(0, len(bucket), 256):
                chunk = bucket[i : i + 256]
                probs[chunk] = model.predict_proba(np.stack([sequences[j] for j in chunk]))
    else:
        probs = model.predict_proba(inputs)
    labels = np.argmax(probs, axis=1)  # argmax takes the lowest index on ties
    return labels, probs


def predict(model: TrainedClassifier, inputs):
    """(labels, probabilities) for any TrainedClassifier kind."""
    if model.kind == "nb":
        probs = nb_predict_proba(model.params, inputs)
        return np.argmax(probs, axis=1), probs
    live = _instantiate(model.kind, model.input_dim, model.n_classes, model.arch, seed=0)
    live.params = model.params
    return _predict_model(live, model.kind, inputs)
