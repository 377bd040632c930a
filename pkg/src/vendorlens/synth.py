"""Seeded synthetic fixtures: corpora with planted structure plus embedding tensors.

Real marketplace corpora are gated, so every test and demo runs on generated
data with known ground truth: vendors with distinct vocabulary / casing /
punctuation signatures, sub-threshold vendors for the catch-all class,
migrants (same handle in several markets), one verbatim cross-market
duplicate vendor, alias pairs that share a style direction, copycats with
similar names but unrelated styles, an exact style-clone, and token tensors
whose class signal lives only in the deepest layer.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, _make_ad
from .repspace import EmbeddingTensor

SHARED_TOKENS = [
    "ship", "stealth", "gram", "pack", "fast", "escrow", "tracked", "quality",
    "pure", "lab", "tested", "direct", "deal", "bulk", "price", "list",
    "order", "refund", "vacuum", "sealed", "express", "domestic", "reship",
    "promo", "batch", "fresh", "grade", "sample", "discount", "trusted",
]

CASE_STYLES = ("lower", "upper", "title")
PUNCT_STYLES = ("!!", "...", "~", "##", ":)", "?!")


def _style_token(token: str, case_style: str) -> str:
    if case_style == "upper":
        return token.upper()
    if case_style == "title":
        return token.title()
    return token


def records_to_corpus(records: list[dict]) -> Corpus:
    """Build a Corpus from raw record dicts exactly as ingestion would."""
    ads = tuple(
        _make_ad(rec, line, f"ad-{line - 1:06d}") for line, rec in enumerate(records, start=1)
    )
    return Corpus(ads=ads, provenance="synthetic")


def _vendor_ad(rng, vendor_idx: int, sig_tokens, case_style, punct, lot: int) -> tuple[str, str]:
    n_sig = int(rng.integers(6, 10))
    n_shared = int(rng.integers(4, 8))
    sig = [sig_tokens[i] for i in rng.integers(0, len(sig_tokens), size=n_sig)]
    shared = [
        _style_token(SHARED_TOKENS[i], case_style)
        for i in rng.integers(0, len(SHARED_TOKENS), size=n_shared)
    ]
    body = sig + shared
    rng.shuffle(body)
    title = " ".join([sig_tokens[int(rng.integers(0, len(sig_tokens)))], shared[0], punct])
    description = " ".join(body + [f"lot{vendor_idx}x{lot}", punct])
    return title, description


def _signature(vendor_idx: int, case_style: str) -> list[str]:
    return [_style_token(f"v{vendor_idx}sig{j}", case_style) for j in range(10)]


def make_closed_set_records(
    seed: int = 1111,
    n_vendors: int = 30,
    ads_per_vendor: int = 50,
    n_small: int = 3,
    small_ads: int = 10,
    market: str = "alpha",
) -> tuple[list[dict], list[str]]:
    """Single-market corpus; the last n_small vendors stay under the 20-ad threshold.

    Returns (records, small_vendor_names).
    """
    rng = np.random.default_rng([seed, 0xC105ED])
    records = []
    small_vendors = []
    for v in range(n_vendors):
        case_style = CASE_STYLES[v % len(CASE_STYLES)]
        punct = PUNCT_STYLES[v % len(PUNCT_STYLES)]
        name = f"vendor{v:02d}"
        sig = _signature(v, case_style)
        n_ads = small_ads if v >= n_vendors - n_small else ads_per_vendor
        if v >= n_vendors - n_small:
            small_vendors.append(name)
        for a in range(n_ads):
            title, description = _vendor_ad(rng, v, sig, case_style, punct, a)
            records.append(
                {"market": market, "vendor": name, "title": title, "description": description}
            )
    return records, small_vendors


def _orthonormal_directions(rng, n: int, dim: int) -> np.ndarray:
    if n > dim:
        raise ValueError(f"cannot plant {n} orthogonal directions in {dim} dims")
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q[:, :n].T


IDENTIFY_NOISE_VENDORS = [
    "frostbyte", "silkcartel", "greenmile", "acidwolf",
    "plainpacks", "pharmanaut", "bitbazaar", "crypticat",
]
IDENTIFY_ALIAS_PAIRS = [
    ("dankduchess", "velvetqueen"),
    ("ozarkpharm", "hillbillyrx"),
    ("quickship", "rapidpost"),
]
IDENTIFY_COPYCATS = ("europills", "europills2")
IDENTIFY_CLONE = ("masterchem", "chemmaster")
MIRROR_VENDOR = "mirrorman"


def make_identify_fixture(
    seed: int = 1111,
    dim: int = 32,
    ads_per_vendor: int = 5,
    include_clone: bool = True,
    scale: float = 3.0,
    noise: float = 0.25,
) -> tuple[list[dict], Corpus, EmbeddingTensor]:
    """Multi-market corpus plus an aligned cls-mode style tensor.

    Planted ground truth: migrants ("agentq" under two casings, "nomadtrader"
    in three markets), one verbatim cross-market duplicate vendor, three alias
    pairs sharing a style direction, a copycat name pair with unrelated
    styles, and (optionally) an exact vector clone of a parent vendor.
    """
    rng = np.random.default_rng([seed, 0x1DF1])
    markets = ("alpha", "beta", "gamma")

    # (vendor_raw, market, n_ads, direction_group)
    plan: list[tuple[str, str, int, str]] = []
    for i, v in enumerate(IDENTIFY_NOISE_VENDORS):
        plan.append((v, markets[i % 3], ads_per_vendor, v))
    plan.append(("AgentQ", "alpha", 4, "agentq"))
    plan.append(("agentq", "beta", 4, "agentq"))
    for m in markets:
        plan.append(("nomadtrader", m, 3, "nomadtrader"))
    for a, b in IDENTIFY_ALIAS_PAIRS:
        group = f"alias:{a}"
        plan.append((a, "alpha", 6, group))
        plan.append((b, "beta", 6, group))
    plan.append((IDENTIFY_COPYCATS[0], "alpha", ads_per_vendor, IDENTIFY_COPYCATS[0]))
    plan.append((IDENTIFY_COPYCATS[1], "beta", ads_per_vendor, IDENTIFY_COPYCATS[1]))
    if include_clone:
        plan.append((IDENTIFY_CLONE[0], "alpha", 6, IDENTIFY_CLONE[0]))

    groups = sorted({g for _, _, _, g in plan}) + [MIRROR_VENDOR]
    dirs = _orthonormal_directions(rng, len(groups), dim)
    dir_of = {g: dirs[i] for i, g in enumerate(groups)}

    records: list[dict] = []
    vectors: list[np.ndarray] = []
    lot = 0
    for v_idx, (vendor, market, n_ads, group) in enumerate(plan):
        case_style = CASE_STYLES[v_idx % len(CASE_STYLES)]
        punct = PUNCT_STYLES[v_idx % len(PUNCT_STYLES)]
        sig = _signature(100 + v_idx, case_style)
        for _ in range(n_ads):
            title, description = _vendor_ad(rng, 100 + v_idx, sig, case_style, punct, lot)
            lot += 1
            records.append(
                {"market": market, "vendor": vendor, "title": title, "description": description}
            )
            vectors.append(scale * dir_of[group] + noise * rng.standard_normal(dim))

    # verbatim cross-market duplicate: one identical ad in two markets
    mirror_title = "mirror stock ~"
    mirror_desc = "identical listing text across markets ~"
    for m in ("alpha", "beta"):
        records.append(
            {"market": m, "vendor": MIRROR_VENDOR, "title": mirror_title, "description": mirror_desc}
        )
        vectors.append(scale * dir_of[MIRROR_VENDOR] + noise * rng.standard_normal(dim))

    corpus = records_to_corpus(records)

    if include_clone:
        parent_rows = [
            i for i, ad in enumerate(corpus.ads) if ad.vendor_norm == IDENTIFY_CLONE[0]
        ]
        clone_records = []
        for j, row in enumerate(parent_rows):
            ad = corpus.ads[row]
            clone_records.append(
                {
                    "market": "beta",
                    "vendor": IDENTIFY_CLONE[1],
                    "title": ad.title,
                    "description": ad.description.replace("lot", "clot", 1),
                }
            )
            vectors.append(vectors[row].copy())
        records.extend(clone_records)
        corpus = records_to_corpus(records)

    tensor = EmbeddingTensor(
        mode="cls",
        values=np.stack(vectors)[:, np.newaxis, :].astype(np.float32),
        ad_ids=tuple(corpus.ad_ids()),
        checkpoint_tag=f"synth-style-{seed}",
        seq_lens=None,
    )
    return records, corpus, tensor


def make_transfer_fixture(
    seed: int = 1111,
    n_vendors: int = 8,
    ads_per_vendor: int = 25,
    n_layers: int = 5,
    seq_len: int = 12,
    dim: int = 16,
    market: str = "delta",
    signal_scale: float = 3.0,
    token_noise: float = 1.0,
) -> tuple[list[dict], Corpus, EmbeddingTensor, np.ndarray]:
    """Target-market corpus plus a token tensor whose class signal sits only in
    the deepest layer. Returns (records, corpus, tensor, labels)."""
    rng = np.random.default_rng([seed, 0x7A6E7])
    records = []
    labels = []
    for v in range(n_vendors):
        case_style = CASE_STYLES[v % len(CASE_STYLES)]
        punct = PUNCT_STYLES[v % len(PUNCT_STYLES)]
        sig = _signature(200 + v, case_style)
        for a in range(ads_per_vendor):
            title, description = _vendor_ad(rng, 200 + v, sig, case_style, punct, a)
            records.append(
                {"market": market, "vendor": f"lrvendor{v:02d}", "title": title, "description": description}
            )
            labels.append(v)
    corpus = records_to_corpus(records)
    labels = np.array(labels, dtype=np.int64)

    class_dirs = _orthonormal_directions(rng, n_vendors, dim)
    n_ads = len(corpus)
    values = rng.standard_normal((n_ads * seq_len, n_layers, dim)) * token_noise
    deep = values[:, n_layers - 1, :]
    for i in range(n_ads):
        rows = slice(i * seq_len, (i + 1) * seq_len)
        deep[rows] += signal_scale * class_dirs[labels[i]]
    tensor = EmbeddingTensor(
        mode="token",
        values=values.astype(np.float32),
        ad_ids=tuple(corpus.ad_ids()),
        checkpoint_tag=f"synth-token-{seed}",
        seq_lens=tuple([seq_len] * n_ads),
    )
    return records, corpus, tensor, labels


def make_zero_shot_records(
    seed: int = 1111,
    n_known: int = 5,
    n_new: int = 5,
    source_ads: int = 25,
    target_ads: int = 10,
) -> tuple[list[dict], list[dict]]:
    """Source-market records plus a target market mixing known and new vendors.

    Known target vendors reuse their source signature so a source-trained
    classifier can recognize them; new vendors get fresh signatures.
    """
    rng = np.random.default_rng([seed, 0x2E05])
    source, target = [], []
    for v in range(n_known * 2):  # source has 2x known so "others" stays populated
        case_style = CASE_STYLES[v % len(CASE_STYLES)]
        punct = PUNCT_STYLES[v % len(PUNCT_STYLES)]
        sig = _signature(300 + v, case_style)
        for a in range(source_ads):
            title, description = _vendor_ad(rng, 300 + v, sig, case_style, punct, a)
            source.append(
                {"market": "alpha", "vendor": f"src{v:02d}", "title": title, "description": description}
            )
    for v in range(n_known):
        case_style = CASE_STYLES[v % len(CASE_STYLES)]
        punct = PUNCT_STYLES[v % len(PUNCT_STYLES)]
        sig = _signature(300 + v, case_style)
        for a in range(target_ads):
            title, description = _vendor_ad(rng, 300 + v, sig, case_style, punct, 1000 + a)
            target.append(
                {"market": "omega", "vendor": f"src{v:02d}", "title": title, "description": description}
            )
    for v in range(n_new):
        case_style = CASE_STYLES[(v + 1) % len(CASE_STYLES)]
        punct = PUNCT_STYLES[(v + 2) % len(PUNCT_STYLES)]
        sig = _signature(400 + v, case_style)
        for a in range(target_ads):
            title, description = _vendor_ad(rng, 400 + v, sig, case_style, punct, a)
            target.append(
                {"market": "omega", "vendor": f"new{v:02d}", "title": title, "description": description}
            )
    return source, target


def make_before_after_tensors(
    seed: int = 1111,
    n_ads: int = 60,
    n_layers: int = 5,
    dim: int = 16,
    ad_ids=None,
) -> tuple[EmbeddingTensor, EmbeddingTensor]:
    """cls-mode checkpoint pair where deeper layers drift further from 'before'."""
    rng = np.random.default_rng([seed, 0xC4A])
    if ad_ids is None:
        ad_ids = tuple(f"ad-{i:06d}" for i in range(n_ads))
    ad_ids = tuple(ad_ids)
    n_ads = len(ad_ids)
    before = rng.standard_normal((n_ads, n_layers, dim))
    after = np.empty_like(before)
    for layer in range(n_layers):
        mix = layer / max(n_layers - 1, 1)
        fresh = rng.standard_normal((n_ads, dim))
        after[:, layer, :] = np.sqrt(1 - mix**2) * before[:, layer, :] + mix * fresh
    tag = f"synth-ckpt-{seed}"
    t_before = EmbeddingTensor(
        mode="cls", values=before.astype(np.float32), ad_ids=ad_ids, checkpoint_tag=tag + "-before"
    )
    t_after = EmbeddingTensor(
        mode="cls", values=after.astype(np.float32), ad_ids=ad_ids, checkpoint_tag=tag + "-after"
    )
    return t_before, t_after
