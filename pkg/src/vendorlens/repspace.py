"""Representation-space machinery: embedding tensors, linear CKA, layer selection.

The VLEMB1 container stores per-ad, per-layer float32 vectors, either one
vector per ad ("cls" mode) or one per token ("token" mode, ragged sequence
lengths). Linear CKA compares two row-aligned representation matrices; the
before/after per-layer profile turns that into distances (1 - similarity)
used to pick the layers that moved most during training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binfmt import FormatError, read_container, write_container

EMB_MAGIC = b"VLEMB1\x00\x00"
MODES = ("cls", "token")


@dataclass(frozen=True)
class EmbeddingTensor:
    mode: str
    values: np.ndarray  # cls: (n_ads, n_layers, dim); token: (total_tokens, n_layers, dim)
    ad_ids: tuple[str, ...]
    checkpoint_tag: str
    seq_lens: tuple[int, ...] | None = None  # token mode only

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "token":
            if self.seq_lens is None or len(self.seq_lens) != len(self.ad_ids):
                raise ValueError("token mode needs one seq_len per ad")
            offsets = np.concatenate([[0], np.cumsum(self.seq_lens)])
            object.__setattr__(self, "_offsets", offsets)
        if len(set(self.ad_ids)) != len(self.ad_ids):
            raise ValueError("ad_ids must be unique")

    @property
    def n_ads(self) -> int:
        return len(self.ad_ids)

    @property
    def n_layers(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def layer_matrix(self, layer: int) -> np.ndarray:
        """cls mode: the (n_ads, dim) slice of one layer."""
        if self.mode != "cls":
            raise ValueError("layer_matrix is defined for cls-mode tensors")
        return self.values[:, layer, :]

    def token_slab(self, ad_index: int) -> np.ndarray:
        """token mode: the (seq_len, n_layers, dim) slab of one ad."""
        if self.mode != "token":
            raise ValueError("token_slab is defined for token-mode tensors")
        lo, hi = self._offsets[ad_index], self._offsets[ad_index + 1]
        return self.values[lo:hi]

    def index_of(self, ad_id: str) -> int:
        try:
            return self.ad_ids.index(ad_id)
        except ValueError:
            raise KeyError(f"ad_id {ad_id!r} not present in tensor") from None


@dataclass(frozen=True)
class LayerWeights:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or (w < 0).any():
            raise ValueError("layer weights must be a 1-D non-negative vector")
        object.__setattr__(self, "weights", w)

    def normalized(self) -> "LayerWeights":
        total = self.weights.sum()
        if total <= 0:
            raise ValueError("cannot normalize all-zero layer weights")
        return LayerWeights(self.weights / total)

    @classmethod
    def one_hot(cls, n_layers: int, layer: int) -> "LayerWeights":
        w = np.zeros(n_layers)
        w[layer] = 1.0
        return cls(w)

    @classmethod
    def uniform_span(cls, n_layers: int, span) -> "LayerWeights":
        w = np.zeros(n_layers)
        idx = list(span)
        w[idx] = 1.0 / len(idx)
        return cls(w)


@dataclass(frozen=True)
class CkaProfile:
    similarity: tuple[float, ...]
    distance: tuple[float, ...]

    @property
    def n_layers(self) -> int:
        return len(self.similarity)


def save_embeddings(tensor: EmbeddingTensor, path) -> None:
    header = {
        "version": 1,
        "mode": tensor.mode,
        "n_ads": tensor.n_ads,
        "n_layers": tensor.n_layers,
        "dim": tensor.dim,
        "ad_ids": list(tensor.ad_ids),
        "checkpoint_tag": tensor.checkpoint_tag,
    }
    if tensor.mode == "token":
        header["seq_lens"] = list(tensor.seq_lens)
    payload = np.ascontiguousarray(tensor.values, dtype="<f4").tobytes()
    write_container(path, EMB_MAGIC, header, payload)


def load_embeddings(path) -> EmbeddingTensor:
    header, payload, payload_offset = read_container(path, EMB_MAGIC)
    if header.get("version") != 1:
        raise FormatError(f"unsupported VLEMB1 version {header.get('version')!r}", 12)
    mode = header.get("mode")
    if mode not in MODES:
        raise FormatError(f"mode must be one of {MODES}, got {mode!r}", 12)
    n_ads = int(header["n_ads"])
    n_layers = int(header["n_layers"])
    dim = int(header["dim"])
    ad_ids = tuple(header["ad_ids"])
    if len(ad_ids) != n_ads:
        raise FormatError(f"header lists {len(ad_ids)} ad_ids for n_ads={n_ads}", 12)
    if mode == "token":
        seq_lens = tuple(int(s) for s in header.get("seq_lens", ()))
        if len(seq_lens) != n_ads:
            raise FormatError("token mode needs one seq_len per ad", 12)
        rows = int(sum(seq_lens))
    else:
        seq_lens = None
        rows = n_ads
    expected_bytes = rows * n_layers * dim * 4
    if len(payload) != expected_bytes:
        raise FormatError(
            f"payload holds {len(payload)} bytes, expected {expected_bytes}",
            payload_offset + min(len(payload), expected_bytes),
        )
    flat = np.frombuffer(payload, dtype="<f4")
    if not np.all(np.isfinite(flat)):
        bad = int(np.flatnonzero(~np.isfinite(flat))[0])
        raise FormatError("non-finite value in payload", payload_offset + bad * 4)
    values = flat.reshape(rows, n_layers, dim) if rows else flat.reshape(0, n_layers, dim)
    return EmbeddingTensor(
        mode=mode,
        values=values,
        ad_ids=ad_ids,
        checkpoint_tag=header.get("checkpoint_tag", ""),
        seq_lens=seq_lens,
    )


def linear_cka(X, Y) -> float:
    """Linear centered kernel alignment between row-aligned matrices.

        CKA = ||Yc' Xc||_F^2 / (||Xc' Xc||_F * ||Yc' Yc||_F)

    Invariant to orthogonal transforms and isotropic scaling of either side;
    0.0 when either matrix is constant (all-zero after centering).
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2:
        raise ValueError("linear_cka expects 2-D matrices")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"row counts differ: {X.shape[0]} vs {Y.shape[0]}")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows for CKA")
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    cross = np.linalg.norm(Yc.T @ Xc) ** 2
    nx = np.linalg.norm(Xc.T @ Xc)
    ny = np.linalg.norm(Yc.T @ Yc)
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(cross / (nx * ny))


def cka_profile(before: EmbeddingTensor, after: EmbeddingTensor) -> CkaProfile:
    """Per-layer CKA similarity/distance between two cls-mode dumps over the same ads."""
    if before.mode != "cls" or after.mode != "cls":
        raise ValueError("cka_profile requires cls-mode tensors")
    if (before.n_ads, before.n_layers, before.dim) != (after.n_ads, after.n_layers, after.dim):
        raise ValueError(
            f"tensor shapes differ: {(before.n_ads, before.n_layers, before.dim)} vs "
            f"{(after.n_ads, after.n_layers, after.dim)}"
        )
    if before.ad_ids != after.ad_ids:
        raise ValueError("ad_ids are not aligned between the two tensors")
    sims = tuple(
        linear_cka(before.layer_matrix(l), after.layer_matrix(l)) for l in range(before.n_layers)
    )
    return CkaProfile(similarity=sims, distance=tuple(1.0 - s for s in sims))


def select_layers(profile: CkaProfile, k: int = 4) -> LayerWeights:
    """Uniform 1/k weights on the k most-changed layers; ties prefer deeper layers."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > profile.n_layers:
        raise ValueError(f"k={k} exceeds the {profile.n_layers} available layers")
    ranked = sorted(
        range(profile.n_layers), key=lambda l: (profile.distance[l], l), reverse=True
    )
    return LayerWeights.uniform_span(profile.n_layers, sorted(ranked[:k]))


def style_vector(tensor: EmbeddingTensor, weights: LayerWeights, ad) -> np.ndarray:
    """Weighted sum over layers of one ad's cls vectors: sum_l w_l * v(ad, l)."""
    if tensor.mode != "cls":
        raise ValueError("style_vector requires a cls-mode tensor")
    w = weights.weights
    if len(w) != tensor.n_layers:
        raise ValueError(f"{len(w)} weights for {tensor.n_layers} layers")
    idx = tensor.index_of(ad) if isinstance(ad, str) else int(ad)
    return tensor.values[idx].astype(np.float64).T @ w


def style_matrix(tensor: EmbeddingTensor, weights: LayerWeights) -> np.ndarray:
    """All ads' style vectors at once: (n_ads, dim)."""
    if tensor.mode != "cls":
        raise ValueError("style_matrix requires a cls-mode tensor")
    w = weights.weights
    if len(w) != tensor.n_layers:
        raise ValueError(f"{len(w)} weights for {tensor.n_layers} layers")
    return np.einsum("ald,l->ad", tensor.values.astype(np.float64), w)
