"""Traditional string/token/sequence similarity metrics over ad texts.

Three classic measures — edit-distance similarity with adjacent
transpositions, Jaccard overlap of whitespace token sets, and
Ratcliff-Obershelp matching-block ratio — plus their arithmetic mean, vendor
cross-market similarity profiles, and a filter that flags vendors whose ads
are verbatim-identical across markets.

Empty-vs-empty comparisons score 1.0 (indistinguishable strings);
empty-vs-non-empty score 0.0.
"""

from __future__ import annotations

import difflib
import hashlib
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, VendorNotFound

DEFAULT_PROFILE_CAP = 200


@dataclass(frozen=True)
class StyleSimilarity:
    dl: float
    jac: float
    ro: float
    avg: float


def damerau_levenshtein(a: str, b: str) -> int:
    """Edit distance with insert/delete/substitute plus adjacent transposition.

    Restricted (optimal-string-alignment) variant: each character pair takes
    part in at most one transposition.
    """
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev2 = None
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        ca = a[i - 1]
        for j in range(1, lb + 1):
            cost = 0 if ca == b[j - 1] else 1
            best = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if i > 1 and j > 1 and ca == b[j - 2] and a[i - 2] == b[j - 1]:
                best = min(best, prev2[j - 2] + 1)
            cur[j] = best
        prev2, prev = prev, cur
    return prev[lb]


def dl_similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - damerau_levenshtein(a, b) / max(len(a), len(b))


def jaccard_similarity(a, b) -> float:
    """Jaccard overlap of token sets; strings are whitespace-tokenized first."""
    sa = set(a.split()) if isinstance(a, str) else set(a)
    sb = set(b.split()) if isinstance(b, str) else set(b)
    if not sa and not sb:
        return 1.0
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


def ratcliff_obershelp(a: str, b: str) -> float:
    """Matching-block ratio 2M/(|a|+|b|): recursively take the longest common
    block (earliest in `a` on ties) and recurse on both flanks."""
    if not a and not b:
        return 1.0
    return difflib.SequenceMatcher(None, a, b, autojunk=False).ratio()


def avg_pair_similarity(ad_a: str, ad_b: str) -> StyleSimilarity:
    dl = dl_similarity(ad_a, ad_b)
    jac = jaccard_similarity(ad_a, ad_b)
    ro = ratcliff_obershelp(ad_a, ad_b)
    return StyleSimilarity(dl=dl, jac=jac, ro=ro, avg=(dl + jac + ro) / 3)


def _stable_subseed(seed: int, *parts: str) -> int:
    digest = hashlib.blake2s(
        ("\x1f".join(parts) + f"\x1f{seed}").encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def _sample_texts(texts: list[str], cap: int, seed: int, *salt: str) -> list[str]:
    if cap is None or len(texts) <= cap:
        return texts
    rng = np.random.default_rng(_stable_subseed(seed, *salt))
    keep = sorted(rng.choice(len(texts), size=cap, replace=False).tolist())
    return [texts[i] for i in keep]


def vendor_similarity_profile(
    corpus: Corpus,
    vendor: str,
    market_x: str,
    market_y: str,
    cap: int = DEFAULT_PROFILE_CAP,
    seed: int = 1111,
) -> float:
    """Mean avg-similarity over the vendor's ad pairs between two markets.

    Cross-market (market_x != market_y): all (adX, adY) pairs. Within-market
    (market_x == market_y): distinct unordered pairs. Each side is capped at
    `cap` ads by deterministic seeded subsampling.
    """
    ads_x = [a.merged_text for a in corpus.vendor_market_ads(vendor, market_x)]
    if not ads_x:
        raise VendorNotFound(f"vendor {vendor!r} has no ads in market {market_x!r}")
    if market_x == market_y:
        ads_x = _sample_texts(ads_x, cap, seed, vendor, market_x)
        pairs = [(ads_x[i], ads_x[j]) for i in range(len(ads_x)) for j in range(i + 1, len(ads_x))]
        if not pairs:
            raise ValueError(
                f"vendor {vendor!r} has a single ad in market {market_x!r}: "
                "no within-market pairs to average"
            )
    else:
        ads_y = [a.merged_text for a in corpus.vendor_market_ads(vendor, market_y)]
        if not ads_y:
            raise VendorNotFound(f"vendor {vendor!r} has no ads in market {market_y!r}")
        ads_x = _sample_texts(ads_x, cap, seed, vendor, market_x)
        ads_y = _sample_texts(ads_y, cap, seed, vendor, market_y)
        pairs = [(tx, ty) for tx in ads_x for ty in ads_y]
    return sum(avg_pair_similarity(tx, ty).avg for tx, ty in pairs) / len(pairs)


def flag_identical_vendors(
    corpus: Corpus, cap: int = DEFAULT_PROFILE_CAP, seed: int = 1111
) -> list[str]:
    """Vendors present in >= 2 markets whose pooled cross-market profile is exactly 1.0.

    The pooled profile is the mean avg-similarity over every ad pair drawn
    from two different markets of the same vendor; it is 1.0 only when all
    such pairs are verbatim-identical. Flagged vendors are candidates for
    removal before any learning step (the removal itself is a separate
    filter).
    """
    by_vendor_market: dict[str, dict[str, list[str]]] = {}
    for ad in corpus.ads:
        by_vendor_market.setdefault(ad.vendor_norm, {}).setdefault(ad.market, []).append(
            ad.merged_text
        )
    flagged = []
    for vendor in sorted(by_vendor_market):
        markets = by_vendor_market[vendor]
        if len(markets) < 2:
            continue
        sampled = {
            m: _sample_texts(texts, cap, seed, vendor, m) for m, texts in markets.items()
        }
        ordered = sorted(sampled)
        total = 0.0
        n_pairs = 0
        for i, mx in enumerate(ordered):
            for my in ordered[i + 1 :]:
                for tx in sampled[mx]:
                    for ty in sampled[my]:
                        # identical strings score exactly 1.0 on every metric
                        total += 1.0 if tx == ty else avg_pair_similarity(tx, ty).avg
                        n_pairs += 1
        if total / n_pairs == 1.0:
            flagged.append(vendor)
    return flagged


def remove_vendors(corpus: Corpus, vendors) -> Corpus:
    """Corpus filter dropping every ad of the given vendor_norms."""
    drop = set(vendors)
    return Corpus(
        ads=tuple(a for a in corpus.ads if a.vendor_norm not in drop),
        provenance=corpus.provenance,
    )
