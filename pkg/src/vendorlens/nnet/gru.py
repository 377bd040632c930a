"""Multi-layer bidirectional GRU classifier with hand-derived backpropagation.

Gate convention (gate order z | r | n inside the stacked matrices):

    z_t = sigmoid(x_t Wz + h_{t-1} Uz + bz)          update gate
    r_t = sigmoid(x_t Wr + h_{t-1} Ur + br)          reset gate
    n_t = tanh   (x_t Wn + r_t * (h_{t-1} Un) + bn)  candidate
    h_t = z_t * h_{t-1} + (1 - z_t) * n_t

Each layer runs a forward and a backward pass over time; their per-timestep
states are concatenated as the next layer's input. The classifier head takes
the concatenation of the forward direction's last state and the backward
direction's first state from the top layer, through two fully connected
layers (tanh in between) and a softmax. Dropout (inverted scaling) is applied
between recurrent layers and on the pooled state, training mode only.

All math is float64; batches must be rectangular (B, T, D) — callers bucket
ragged sequences by length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import cross_entropy_from_logits, sigmoid, softmax_probs


@dataclass(frozen=True)
class BiGRUConfig:
    layers: int = 2
    hidden: int = 64
    dropout: float = 0.65
    bidirectional: bool = True
    head_hidden: int | None = None  # defaults to `hidden`

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        if self.hidden < 1:
            raise ValueError(f"hidden must be >= 1, got {self.hidden}")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")


# "desk" keeps unit runtimes small; "paper" restores the published capacity.
BIGRU_PRESETS = {
    "desk": BiGRUConfig(hidden=64),
    "paper": BiGRUConfig(hidden=768),
}


def _gate_slices(hidden: int):
    return slice(0, hidden), slice(hidden, 2 * hidden), slice(2 * hidden, 3 * hidden)


def gru_forward(sequence, params: dict, direction: str = "forward") -> np.ndarray:
    """Single-direction GRU over one sequence; returns (T, H) states in input order.

    `params` holds W (D, 3H), U (H, 3H), b (3H,). The backward direction
    consumes the sequence reversed but reports states at their original
    positions.
    """
    X = np.asarray(sequence, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("sequence must be a non-empty (T, D) array of vectors")
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    states, _ = _run_direction(
        X[np.newaxis, :, :], params["W"], params["U"], params["b"], reverse=(direction == "backward")
    )
    return states[0]


def _run_direction(X, W, U, b, reverse: bool):
    """Batched single-direction GRU. X: (B,T,D) -> states (B,T,H) + cache."""
    B, T, _ = X.shape
    H = U.shape[0]
    sz, sr, sn = _gate_slices(H)
    xa = X @ W + b  # (B,T,3H)
    order = range(T - 1, -1, -1) if reverse else range(T)
    h = np.zeros((B, H))
    states = np.zeros((B, T, H))
    cache = []
    for t in order:
        hu = h @ U  # (B,3H)
        z = sigmoid(xa[:, t, sz] + hu[:, sz])
        r = sigmoid(xa[:, t, sr] + hu[:, sr])
        hu_n = hu[:, sn]
        n = np.tanh(xa[:, t, sn] + r * hu_n)
        h_prev = h
        h = z * h_prev + (1.0 - z) * n
        states[:, t, :] = h
        cache.append((t, h_prev, z, r, n, hu_n))
    return states, cache


def _backprop_direction(d_states, X, W, U, cache, need_dx: bool):
    """Backward through one direction. d_states: (B,T,H) grad w.r.t. each state."""
    B, T, D = X.shape
    H = U.shape[0]
    sz, sr, sn = _gate_slices(H)
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(3 * H)
    dX = np.zeros_like(X) if need_dx else None
    dh = np.zeros((B, H))
    for t, h_prev, z, r, n, hu_n in reversed(cache):
        dh = dh + d_states[:, t, :]
        dz = dh * (h_prev - n)
        dn = dh * (1.0 - z)
        dh_prev = dh * z

        da = np.empty((B, 3 * H))
        da[:, sn] = dn * (1.0 - n * n)
        dr = da[:, sn] * hu_n
        da[:, sz] = dz * z * (1.0 - z)
        da[:, sr] = dr * r * (1.0 - r)

        dW += X[:, t, :].T @ da
        db += da.sum(axis=0)
        if need_dx:
            dX[:, t, :] = da @ W.T

        # U sees raw h_prev for z and r but r-masked flow for the candidate
        dhu = np.concatenate([da[:, sz], da[:, sr], da[:, sn] * r], axis=1)
        dU += h_prev.T @ dhu
        dh = dh_prev + dhu @ U.T
    return dW, dU, db, dX


class BiGRUClassifier:
    """Stacked bidirectional GRU + 2-layer dense head, trained by exact BPTT."""

    kind = "bigru"

    def __init__(self, input_dim: int, n_classes: int, config: BiGRUConfig, seed: int = 1111):
        if n_classes < 2:
            raise ValueError(f"need >= 2 classes, got {n_classes}")
        self.input_dim = input_dim
        self.n_classes = n_classes
        self.config = config
        H = config.hidden
        Hh = config.head_hidden or H
        self.directions = ("f", "b") if config.bidirectional else ("f",)
        rng = np.random.default_rng(seed)
        params: dict[str, np.ndarray] = {}
        d_in = input_dim
        for layer in range(config.layers):
            for d in self.directions:
                scale_w = 1.0 / np.sqrt(d_in)
                scale_u = 1.0 / np.sqrt(H)
                params[f"l{layer}{d}_W"] = rng.uniform(-scale_w, scale_w, size=(d_in, 3 * H))
                params[f"l{layer}{d}_U"] = rng.uniform(-scale_u, scale_u, size=(H, 3 * H))
                params[f"l{layer}{d}_b"] = np.zeros(3 * H)
            d_in = H * len(self.directions)
        scale = 1.0 / np.sqrt(d_in)
        params["head_W1"] = rng.uniform(-scale, scale, size=(d_in, Hh))
        params["head_b1"] = np.zeros(Hh)
        scale = 1.0 / np.sqrt(Hh)
        params["head_W2"] = rng.uniform(-scale, scale, size=(Hh, n_classes))
        params["head_b2"] = np.zeros(n_classes)
        self.params = params

    def _forward(self, X: np.ndarray, train: bool, rng):
        cfg = self.config
        keep = 1.0 - cfg.dropout
        seq = np.asarray(X, dtype=np.float64)
        if seq.ndim != 3 or seq.shape[1] == 0:
            raise ValueError("input batch must be non-empty (B, T, D)")
        layer_caches = []
        for layer in range(cfg.layers):
            outs = []
            dir_caches = []
            for d in self.directions:
                states, cache = _run_direction(
                    seq,
                    self.params[f"l{layer}{d}_W"],
                    self.params[f"l{layer}{d}_U"],
                    self.params[f"l{layer}{d}_b"],
                    reverse=(d == "b"),
                )
                outs.append(states)
                dir_caches.append(cache)
            out = np.concatenate(outs, axis=2)
            mask = None
            if train and cfg.dropout > 0 and layer < cfg.layers - 1:
                mask = (rng.random(out.shape) < keep) / keep
                out = out * mask
            layer_caches.append({"input": seq, "dirs": dir_caches, "out_mask": mask, "states": outs})
            seq = out

        finals = [outs[0][:, -1, :]]
        if cfg.bidirectional:
            finals.append(outs[1][:, 0, :])
        pooled = np.concatenate(finals, axis=1)
        pool_mask = None
        if train and cfg.dropout > 0:
            pool_mask = (rng.random(pooled.shape) < keep) / keep
            pooled = pooled * pool_mask
        a1 = np.tanh(pooled @ self.params["head_W1"] + self.params["head_b1"])
        logits = a1 @ self.params["head_W2"] + self.params["head_b2"]
        head_cache = {"pooled": pooled, "pool_mask": pool_mask, "a1": a1}
        return logits, layer_caches, head_cache

    def predict_proba(self, X) -> np.ndarray:
        logits, _, _ = self._forward(X, train=False, rng=None)
        return softmax_probs(logits)

    def loss(self, batch) -> float:
        X, y, w = batch
        logits, _, _ = self._forward(X, train=False, rng=None)
        loss, _ = cross_entropy_from_logits(logits, y, w)
        return loss

    def loss_and_grads(self, batch, train: bool = False, rng=None):
        X, y, w = batch
        logits, layer_caches, head = self._forward(X, train=train, rng=rng)
        loss, dlogits = cross_entropy_from_logits(logits, y, w)
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}

        a1 = head["a1"]
        grads["head_W2"] = a1.T @ dlogits
        grads["head_b2"] = dlogits.sum(axis=0)
        da1 = dlogits @ self.params["head_W2"].T
        dz1 = da1 * (1.0 - a1 * a1)
        grads["head_W1"] = head["pooled"].T @ dz1
        grads["head_b1"] = dz1.sum(axis=0)
        dpooled = dz1 @ self.params["head_W1"].T
        if head["pool_mask"] is not None:
            dpooled = dpooled * head["pool_mask"]

        H = self.config.hidden
        top = layer_caches[-1]
        B, T, _ = top["input"].shape
        d_states_top = []
        for i, d in enumerate(self.directions):
            ds = np.zeros((B, T, H))
            if d == "f":
                ds[:, -1, :] = dpooled[:, :H]
            else:
                ds[:, 0, :] = dpooled[:, H:]
            d_states_top.append(ds)

        d_states_next = d_states_top
        for layer in range(self.config.layers - 1, -1, -1):
            entry = layer_caches[layer]
            seq_in = entry["input"]
            need_dx = layer > 0
            dX_total = np.zeros_like(seq_in) if need_dx else None
            for i, d in enumerate(self.directions):
                dW, dU, db, dX = _backprop_direction(
                    d_states_next[i],
                    seq_in,
                    self.params[f"l{layer}{d}_W"],
                    self.params[f"l{layer}{d}_U"],
                    entry["dirs"][i],
                    need_dx,
                )
                grads[f"l{layer}{d}_W"] = dW
                grads[f"l{layer}{d}_U"] = dU
                grads[f"l{layer}{d}_b"] = db
                if need_dx:
                    dX_total += dX
            if layer > 0:
                below = layer_caches[layer - 1]
                if below["out_mask"] is not None:
                    dX_total = dX_total * below["out_mask"]
                d_states_next = [
                    dX_total[:, :, i * H : (i + 1) * H] for i in range(len(self.directions))
                ]
        return loss, grads
