"""Advertisement corpus ingestion, preprocessing, labeling, and splits.

Records enter as raw (market, vendor, title, description) rows from JSONL or
CSV. Ingestion merges title and description with a single "[SEP]" token,
lowercases vendor handles into vendor_norm, and assigns stable ad ids in file
order. Downstream steps (dedup, truncation, "others" bucketing, stratified
splitting) are pure functions from Corpus to Corpus or to small value objects.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

SEP_TOKEN = "[SEP]"
OTHERS_LABEL = "others"

REQUIRED_FIELDS = ("market", "vendor", "title", "description")


class RecordError(ValueError):
    """A malformed input record; carries the 1-based line number."""

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class VendorNotFound(KeyError):
    pass


@dataclass(frozen=True)
class Ad:
    ad_id: str
    market: str
    vendor_raw: str
    vendor_norm: str
    title: str
    description: str
    merged_text: str
    token_count: int


@dataclass(frozen=True)
class Corpus:
    """Immutable, ordered collection of ads; safe to share across workers."""

    ads: tuple[Ad, ...]
    provenance: str = ""

    def __len__(self):
        return len(self.ads)

    @property
    def markets(self) -> set[str]:
        return {ad.market for ad in self.ads}

    @property
    def vendors(self) -> set[str]:
        return {ad.vendor_norm for ad in self.ads}

    def ad_ids(self) -> list[str]:
        return [ad.ad_id for ad in self.ads]

    def by_vendor(self) -> dict[str, list[Ad]]:
        groups: dict[str, list[Ad]] = {}
        for ad in self.ads:
            groups.setdefault(ad.vendor_norm, []).append(ad)
        return groups

    def vendor_market_ads(self, vendor: str, market: str) -> list[Ad]:
        return [a for a in self.ads if a.vendor_norm == vendor and a.market == market]


@dataclass(frozen=True)
class LabelSpace:
    """vendor_norm -> contiguous class index; sub-threshold vendors share others_index."""

    class_of: dict[str, int]
    others_index: int
    min_ads: int
    class_names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def label_for(self, vendor_norm: str) -> int:
        return self.class_of.get(vendor_norm, self.others_index)

    def labels(self, corpus: Corpus) -> np.ndarray:
        return np.array([self.label_for(a.vendor_norm) for a in corpus.ads], dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "class_of": dict(sorted(self.class_of.items())),
            "others_index": self.others_index,
            "min_ads": self.min_ads,
            "class_names": list(self.class_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabelSpace":
        return cls(
            class_of=dict(d["class_of"]),
            others_index=int(d["others_index"]),
            min_ads=int(d["min_ads"]),
            class_names=tuple(d["class_names"]),
        )


@dataclass(frozen=True)
class SplitSet:
    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]
    ratios: tuple[float, float, float]
    seed: int

    def parts(self):
        return {"train": self.train, "val": self.val, "test": self.test}


def _make_ad(record: dict, line: int, ad_id: str) -> Ad:
    for key in REQUIRED_FIELDS:
        if record.get(key) is None:
            raise RecordError(f"missing field {key!r}", line)
    vendor_raw = str(record["vendor"])
    title = str(record["title"])
    description = str(record["description"])
    merged = f"{title} {SEP_TOKEN} {description}"
    return Ad(
        ad_id=ad_id,
        market=str(record["market"]),
        vendor_raw=vendor_raw,
        vendor_norm=vendor_raw.lower(),
        title=title,
        description=description,
        merged_text=merged,
        token_count=len(merged.split()),
    )


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def ingest(path, format: str | None = None) -> Corpus:
    """Read raw ad records and build a Corpus (record count preserved, no dedup yet).

    `format` is "jsonl" or "csv"; inferred from the file suffix when omitted.
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format not in ("jsonl", "csv"):
        raise ValueError(f"unknown corpus format {format!r}")

    ads: list[Ad] = []
    if format == "jsonl":
        with path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise RecordError(f"invalid JSON ({exc.msg})", line_no) from exc
                ads.append(_make_ad(record, line_no, f"ad-{len(ads):06d}"))
    else:
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            for row_no, record in enumerate(reader, start=2):  # header is line 1
                ads.append(_make_ad(record, row_no, f"ad-{len(ads):06d}"))

    return Corpus(ads=tuple(ads), provenance=_file_digest(path))


def dedupe(corpus: Corpus) -> Corpus:
    """Drop exact-duplicate merged_text per (market, vendor_norm), keeping first occurrences.

    Cross-vendor and cross-market duplicates are kept: identical text under two
    handles or in two markets is linkage evidence, not noise.
    """
    seen: set[tuple[str, str, str]] = set()
    kept = []
    for ad in corpus.ads:
        key = (ad.market, ad.vendor_norm, ad.merged_text)
        if key in seen:
            continue
        seen.add(key)
        kept.append(ad)
    return Corpus(ads=tuple(kept), provenance=corpus.provenance)


def truncate(corpus: Corpus, limit: int = 512) -> Corpus:
    """Keep only the first `limit` whitespace tokens of each merged_text."""
    if limit < 1:
        raise ValueError(f"truncation limit must be >= 1, got {limit}")
    out = []
    for ad in corpus.ads:
        if ad.token_count <= limit:
            out.append(ad)
            continue
        tokens = ad.merged_text.split()[:limit]
        out.append(replace(ad, merged_text=" ".join(tokens), token_count=limit))
    return Corpus(ads=tuple(out), provenance=corpus.provenance)


def bucket_others(corpus: Corpus, min_ads: int = 20) -> LabelSpace:
    """Assign vendors with fewer than min_ads ads to a shared "others" class.

    Qualified vendors get contiguous indices 0..K-2 in lexicographic order;
    others_index is K-1 and is always reserved, even when nothing maps to it.
    """
    if min_ads < 1:
        raise ValueError(f"min_ads must be >= 1, got {min_ads}")
    counts: dict[str, int] = {}
    for ad in corpus.ads:
        counts[ad.vendor_norm] = counts.get(ad.vendor_norm, 0) + 1
    qualified = sorted(v for v, n in counts.items() if n >= min_ads)
    class_of = {v: i for i, v in enumerate(qualified)}
    others_index = len(qualified)
    for v in counts:
        if v not in class_of:
            class_of[v] = others_index
    return LabelSpace(
        class_of=class_of,
        others_index=others_index,
        min_ads=min_ads,
        class_names=tuple(qualified) + (OTHERS_LABEL,),
    )


def _apportion(n: int, ratios, allocated, cum_total) -> list[int]:
    # Cumulative largest-remainder: keeps each split within 1 of its global target.
    want = [ratios[t] * cum_total - allocated[t] for t in range(3)]
    base = [max(0, int(np.floor(w))) for w in want]
    base = [min(b, n) for b in base]
    while sum(base) > n:  # only possible via the max(0, .) clamp; trim largest
        base[int(np.argmax(base))] -= 1
    leftover = n - sum(base)
    residues = sorted(range(3), key=lambda t: (-(want[t] - base[t]), t))
    for t in residues[:leftover]:
        base[t] += 1
    return base


def split(
    corpus: Corpus,
    ratios: tuple[float, float, float] = (0.75, 0.05, 0.20),
    seed: int = 1111,
    label_space: LabelSpace | None = None,
) -> SplitSet:
    """Deterministic stratified train/val/test partition of corpus indices.

    Stratification groups by class label when a LabelSpace is given, else by
    vendor_norm. Any non-others group with at least 3 ads is guaranteed a
    presence in train.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be three non-negative numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1.0, got sum {sum(ratios)!r}")

    if label_space is not None:
        key_of = lambda ad: label_space.label_for(ad.vendor_norm)
        others_key = label_space.others_index
    else:
        key_of = lambda ad: ad.vendor_norm
        others_key = None

    groups: dict = {}
    for i, ad in enumerate(corpus.ads):
        groups.setdefault(key_of(ad), []).append(i)

    rng = np.random.default_rng(seed)
    parts: list[list[int]] = [[], [], []]
    allocated = [0, 0, 0]
    cum_total = 0
    for key in sorted(groups, key=str):
        idx = groups[key]
        idx = [idx[j] for j in rng.permutation(len(idx))]
        n = len(idx)
        cum_total += n
        alloc = _apportion(n, ratios, allocated, cum_total)
        if key != others_key and n >= 3 and alloc[0] == 0 and ratios[0] > 0:
            donor = 1 if alloc[1] >= alloc[2] else 2
            alloc[donor] -= 1
            alloc[0] += 1
        for t in range(3):
            allocated[t] += alloc[t]
        parts[0].extend(idx[: alloc[0]])
        parts[1].extend(idx[alloc[0] : alloc[0] + alloc[1]])
        parts[2].extend(idx[alloc[0] + alloc[1] :])

    return SplitSet(
        train=tuple(sorted(parts[0])),
        val=tuple(sorted(parts[1])),
        test=tuple(sorted(parts[2])),
        ratios=ratios,
        seed=seed,
    )


def manifest(corpus: Corpus, label_space: LabelSpace | None = None) -> dict:
    """Summary dict written as the corpus manifest JSON."""
    per_market: dict[str, int] = {}
    for ad in corpus.ads:
        per_market[ad.market] = per_market.get(ad.market, 0) + 1
    out = {
        "n_ads": len(corpus),
        "n_vendors": len(corpus.vendors),
        "per_market": dict(sorted(per_market.items())),
        "provenance": corpus.provenance,
    }
    if label_space is not None:
        others = [v for v, c in label_space.class_of.items() if c == label_space.others_index]
        out["n_classes"] = label_space.n_classes
        out["others_count"] = len(others)
    return out


def save_corpus(corpus: Corpus, path) -> None:
    """Write the processed-corpus artifact (one JSON object per ad, ad_id included)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for ad in corpus.ads:
            fh.write(
                json.dumps(
                    {
                        "ad_id": ad.ad_id,
                        "market": ad.market,
                        "vendor": ad.vendor_raw,
                        "vendor_norm": ad.vendor_norm,
                        "title": ad.title,
                        "description": ad.description,
                        "merged_text": ad.merged_text,
                        "token_count": ad.token_count,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def load_corpus(path) -> Corpus:
    """Read a processed-corpus artifact back, trusting its merged_text and ad ids."""
    path = Path(path)
    ads = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            try:
                ads.append(
                    Ad(
                        ad_id=rec["ad_id"],
                        market=rec["market"],
                        vendor_raw=rec["vendor"],
                        vendor_norm=rec["vendor_norm"],
                        title=rec.get("title", ""),
                        description=rec.get("description", ""),
                        merged_text=rec["merged_text"],
                        token_count=int(rec["token_count"]),
                    )
                )
            except KeyError as exc:
                raise RecordError(f"missing field {exc.args[0]!r}", line_no) from exc
    return Corpus(ads=tuple(ads), provenance=_file_digest(path))
