"""Open-set vendor identification over per-ad style vectors.

Vendor-to-vendor similarity is the mean cosine over all ordered cross pairs
of ad vectors; self-similarity uses all ordered pairs including the diagonal,
which makes sim_norm(A, A) = 2*sim/(self+self) an exact 1.0 and keeps
single-ad vendors well-defined. Normalized similarity may exceed 1 and is
reported unclipped — downstream consumers rank, they don't threshold on
absolute calibration alone.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, VendorNotFound
from .features import char_ngram_cosine
from .repspace import EmbeddingTensor, LayerWeights, style_matrix

DEFAULT_PAIR_CAP = 200
DISCLAIMER = (
    "# NOTE: similarity ranks are investigative leads for manual review,"
    " not evidence of shared identity."
)


@dataclass(frozen=True)
class VendorStyleSet:
    vendor_norm: str
    vectors: np.ndarray  # (n_ads, dim)

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("style set needs a non-empty (n_ads, dim) array")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite style vector for vendor {self.vendor_norm!r}")
        object.__setattr__(self, "vectors", v)

    @property
    def n_ads(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class SimilarityRecord:
    parent: str
    candidate: str
    sim: float
    sim_self_parent: float
    sim_self_candidate: float
    sim_norm: float
    name_sim: float
    rank: int
    degenerate: bool = False


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"vector dims differ: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)


def _subsample(vectors: np.ndarray, cap: int, vendor: str, seed: int) -> np.ndarray:
    if cap is None or vectors.shape[0] <= cap:
        return vectors
    digest = hashlib.blake2s(f"{vendor}\x1f{seed}".encode(), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    keep = np.sort(rng.choice(vectors.shape[0], size=cap, replace=False))
    return vectors[keep]


def build_style_sets(
    corpus: Corpus,
    tensor: EmbeddingTensor,
    weights: LayerWeights,
    cap: int = DEFAULT_PAIR_CAP,
    seed: int = 1111,
) -> dict[str, VendorStyleSet]:
    """Group per-ad style vectors by vendor_norm, aligned through ad_ids."""
    vendor_of = {ad.ad_id: ad.vendor_norm for ad in corpus.ads}
    missing = [i for i in tensor.ad_ids if i not in vendor_of]
    if missing:
        raise ValueError(f"tensor carries ad_ids absent from the corpus: {missing[:3]}...")
    matrix = style_matrix(tensor, weights)
    rows_by_vendor: dict[str, list[int]] = {}
    for row, ad_id in enumerate(tensor.ad_ids):
        rows_by_vendor.setdefault(vendor_of[ad_id], []).append(row)
    return {
        v: VendorStyleSet(v, _subsample(matrix[rows], cap, v, seed))
        for v, rows in rows_by_vendor.items()
    }


def pair_similarity(a: VendorStyleSet, b: VendorStyleSet) -> float:
    """Mean cosine over all |A| x |B| ordered cross pairs."""
    ua = _unit_rows(a.vectors)
    ub = _unit_rows(b.vectors)
    return float((ua @ ub.T).mean())


def self_similarity(a: VendorStyleSet) -> float:
    """Mean cosine over all ordered pairs including i == j (so it equals
    pair_similarity(A, A), and sim_norm(A, A) is exactly 1)."""
    return pair_similarity(a, a)


def normalized_similarity(a: VendorStyleSet, b: VendorStyleSet) -> float:
    denom = self_similarity(a) + self_similarity(b)
    if denom <= 0.0:
        raise ValueError(
            f"degenerate self-similarity denominator for ({a.vendor_norm!r}, {b.vendor_norm!r})"
        )
    return 2.0 * pair_similarity(a, b) / denom


def similarity_record(
    parent: VendorStyleSet, candidate: VendorStyleSet, rank: int = 0
) -> SimilarityRecord:
    sim = pair_similarity(parent, candidate)
    self_p = self_similarity(parent)
    self_c = self_similarity(candidate)
    denom = self_p + self_c
    degenerate = denom <= 0.0
    if parent.vendor_norm == candidate.vendor_norm and not degenerate:
        sim_norm = 1.0  # identity: 2s/(s+s)
    else:
        sim_norm = math.nan if degenerate else 2.0 * sim / denom
    return SimilarityRecord(
        parent=parent.vendor_norm,
        candidate=candidate.vendor_norm,
        sim=sim,
        sim_self_parent=self_p,
        sim_self_candidate=self_c,
        sim_norm=sim_norm,
        name_sim=char_ngram_cosine(parent.vendor_norm, candidate.vendor_norm),
        rank=rank,
        degenerate=degenerate,
    )


def rank_aliases(
    parent: str, style_sets: dict[str, VendorStyleSet], top_k: int | None = None
) -> list[SimilarityRecord]:
    """Candidates sorted by sim_norm descending (ties: lexicographic vendor name);
    degenerate-denominator records are excluded."""
    if parent not in style_sets:
        raise VendorNotFound(f"no style vectors for vendor {parent!r}")
    records = [
        similarity_record(style_sets[parent], style_sets[c])
        for c in style_sets
        if c != parent
    ]
    records = [r for r in records if not r.degenerate]
    records.sort(key=lambda r: (-r.sim_norm, r.candidate))
    ranked = [dataclasses.replace(r, rank=i + 1) for i, r in enumerate(records)]
    return ranked[:top_k] if top_k is not None else ranked


def detect_migrants(corpus: Corpus) -> list[tuple[str, tuple[str, ...]]]:
    """Vendors whose normalized handle appears in two or more markets."""
    markets: dict[str, set[str]] = {}
    for ad in corpus.ads:
        markets.setdefault(ad.vendor_norm, set()).add(ad.market)
    return [
        (v, tuple(sorted(ms))) for v, ms in sorted(markets.items()) if len(ms) >= 2
    ]


def name_similarity_pairs(
    vendors,
    style_sets: dict[str, VendorStyleSet] | None = None,
    threshold: float = 0.7,
) -> list[tuple[str, str, float, float]]:
    """Unordered vendor pairs whose char-gram name cosine clears the threshold,
    annotated with style sim_norm (NaN when style vectors are unavailable) so
    copycats — similar name, dissimilar style — stand out."""
    vendors = sorted(set(vendors))
    out = []
    for i, a in enumerate(vendors):
        for b in vendors[i + 1 :]:
            name_sim = char_ngram_cosine(a, b)
            if name_sim < threshold:
                continue
            if style_sets and a in style_sets and b in style_sets:
                try:
                    sim_norm = normalized_similarity(style_sets[a], style_sets[b])
                except ValueError:
                    sim_norm = math.nan
            else:
                sim_norm = math.nan
            out.append((a, b, name_sim, sim_norm))
    return out


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def alias_report(
    corpus: Corpus,
    style_sets: dict[str, VendorStyleSet],
    sim_norm_threshold: float = 0.8,
    name_sim_threshold: float = 0.7,
) -> dict[str, str]:
    """Deterministic CSV artifacts for analyst triage.

    Returns {"aliases": ..., "ranked": ..., "migrants": ..., "scatter": ...,
    "name_pairs": ...} — pairs above the sim_norm threshold, the full ranked
    lists, exact-handle migrants, a plot-ready (parent, candidate, sim_norm)
    scatter, and name-similarity pairs with their style scores.
    """
    markets_of: dict[str, set[str]] = {}
    n_ads_of: dict[str, int] = {}
    for ad in corpus.ads:
        markets_of.setdefault(ad.vendor_norm, set()).add(ad.market)
        n_ads_of[ad.vendor_norm] = n_ads_of.get(ad.vendor_norm, 0) + 1

    columns = (
        "parent,candidate,n_ads_parent,n_ads_candidate,sim,sim_self_parent,"
        "sim_self_candidate,sim_norm,name_sim,rank,markets_parent,markets_candidate"
    )

    def _row(r: SimilarityRecord) -> str:
        return ",".join(
            [
                r.parent,
                r.candidate,
                str(n_ads_of.get(r.parent, 0)),
                str(n_ads_of.get(r.candidate, 0)),
                _fmt(r.sim),
                _fmt(r.sim_self_parent),
                _fmt(r.sim_self_candidate),
                _fmt(r.sim_norm),
                _fmt(r.name_sim),
                str(r.rank),
                ";".join(sorted(markets_of.get(r.parent, ()))),
                ";".join(sorted(markets_of.get(r.candidate, ()))),
            ]
        )

    ranked_lines = [DISCLAIMER, columns]
    alias_lines = [DISCLAIMER, columns]
    scatter_lines = [DISCLAIMER, "parent,candidate,sim_norm"]
    seen_pairs = set()
    for parent in sorted(style_sets):
        for record in rank_aliases(parent, style_sets):
            ranked_lines.append(_row(record))
            key = tuple(sorted((record.parent, record.candidate)))
            if key in seen_pairs:
                continue
            seen_pairs.add(key)
            scatter_lines.append(
                f"{record.parent},{record.candidate},{_fmt(record.sim_norm)}"
            )
            if record.sim_norm >= sim_norm_threshold:
                alias_lines.append(_row(record))

    migrant_lines = [DISCLAIMER, "vendor,markets"]
    for vendor, markets in detect_migrants(corpus):
        migrant_lines.append(f"{vendor},{';'.join(markets)}")

    name_lines = [DISCLAIMER, "vendor_a,vendor_b,name_sim,sim_norm"]
    for a, b, name_sim, sim_norm in name_similarity_pairs(
        n_ads_of.keys(), style_sets, threshold=name_sim_threshold
    ):
        name_lines.append(f"{a},{b},{_fmt(name_sim)},{_fmt(sim_norm)}")

    return {
        "aliases": "\n".join(alias_lines) + "\n",
        "ranked": "\n".join(ranked_lines) + "\n",
        "migrants": "\n".join(migrant_lines) + "\n",
        "scatter": "\n".join(scatter_lines) + "\n",
        "name_pairs": "\n".join(name_lines) + "\n",
    }
