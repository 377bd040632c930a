"""Lexical features: word n-gram TF-IDF matrices and character n-gram name vectors.

The vocabulary is fit once on training texts with deterministic lexicographic
term ordering; transforms are pure functions of (vocabulary, texts). Term
weighting is tf * idf with idf = ln((1+N)/(1+df)) + 1 and L2 row
normalization. Raw-count transforms are kept alongside TF-IDF because the
multinomial NB classifier consumes counts.

Character n-gram vectors for vendor-name matching pad names with boundary
symbols ("^", "$") so short names still produce at least one gram.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

CASE_MODES = ("preserve", "lower")


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    df: tuple[int, ...]
    n_docs: int
    ngram_range: tuple[int, int]
    min_df: int
    case_mode: str

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def index_of(self, term: str) -> int | None:
        return self._index.get(term)

    def idf(self) -> np.ndarray:
        df = np.asarray(self.df, dtype=np.float64)
        return np.log((1.0 + self.n_docs) / (1.0 + df)) + 1.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "terms": list(self.terms),
                "df": list(self.df),
                "config": {
                    "n_docs": self.n_docs,
                    "ngram_range": list(self.ngram_range),
                    "min_df": self.min_df,
                    "case_mode": self.case_mode,
                },
            },
            ensure_ascii=False,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        d = json.loads(text)
        cfg = d["config"]
        return cls(
            terms=tuple(d["terms"]),
            df=tuple(int(x) for x in d["df"]),
            n_docs=int(cfg["n_docs"]),
            ngram_range=tuple(cfg["ngram_range"]),
            min_df=int(cfg["min_df"]),
            case_mode=cfg["case_mode"],
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class SparseDocMatrix:
    """CSR document-term matrix (row offsets / column indices / float values)."""

    csr: sp.csr_matrix

    @property
    def n_docs(self) -> int:
        return self.csr.shape[0]

    @property
    def n_terms(self) -> int:
        return self.csr.shape[1]

    @property
    def row_offsets(self) -> np.ndarray:
        return self.csr.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self.csr.indices

    @property
    def values(self) -> np.ndarray:
        return self.csr.data

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()


def tokenize(text: str, case_mode: str = "preserve") -> list[str]:
    if case_mode not in CASE_MODES:
        raise ValueError(f"case_mode must be one of {CASE_MODES}, got {case_mode!r}")
    if case_mode == "lower":
        text = text.lower()
    return text.split()


def _term_stream(tokens: list[str], ngram_range: tuple[int, int]):
    lo, hi = ngram_range
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            yield " ".join(tokens[i : i + n])


def fit_vocabulary(
    texts,
    ngram_range: tuple[int, int] = (1, 2),
    min_df: int = 2,
    case_mode: str = "preserve",
) -> Vocabulary:
    texts = list(texts)
    if not texts:
        raise ValueError("cannot fit a vocabulary on an empty training corpus")
    lo, hi = ngram_range
    if not (1 <= lo <= hi):
        raise ValueError(f"ngram_range must satisfy 1 <= lo <= hi, got {ngram_range}")
    if min_df < 1:
        raise ValueError(f"min_df must be >= 1, got {min_df}")
    df_counts: dict[str, int] = {}
    for text in texts:
        for term in set(_term_stream(tokenize(text, case_mode), ngram_range)):
            df_counts[term] = df_counts.get(term, 0) + 1
    kept = sorted(t for t, c in df_counts.items() if c >= min_df)
    return Vocabulary(
        terms=tuple(kept),
        df=tuple(df_counts[t] for t in kept),
        n_docs=len(texts),
        ngram_range=(lo, hi),
        min_df=min_df,
        case_mode=case_mode,
    )


def transform_counts(vocab: Vocabulary, texts) -> SparseDocMatrix:
    """Raw term-count rows over the fitted vocabulary (OOV terms ignored)."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for text in texts:
        counts: dict[int, int] = {}
        for term in _term_stream(tokenize(text, vocab.case_mode), vocab.ngram_range):
            col = vocab.index_of(term)
            if col is not None:
                counts[col] = counts.get(col, 0) + 1
        for col in sorted(counts):
            indices.append(col)
            data.append(float(counts[col]))
        indptr.append(len(indices))
    csr = sp.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int32), np.array(indptr)),
        shape=(len(indptr) - 1, vocab.n_terms),
    )
    return SparseDocMatrix(csr=csr)


def transform_tfidf(vocab: Vocabulary, texts) -> SparseDocMatrix:
    """tf * idf rows, L2-normalized (all-zero rows stay zero)."""
    counts = transform_counts(vocab, texts).csr.astype(np.float64)
    weighted = counts.multiply(vocab.idf()[np.newaxis, :]).tocsr()
    norms = np.sqrt(np.asarray(weighted.multiply(weighted).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    weighted = sp.diags(scale) @ weighted
    return SparseDocMatrix(csr=weighted.tocsr())


def char_ngram_vector(name: str, n: int = 3) -> dict[str, float]:
    """L2-normalized character n-gram counts of the boundary-padded name.

    Padded form is "^" + name + "$"; when the padded form is not longer than
    n, the whole padded string is the single gram.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    padded = f"^{name}$"
    if len(padded) <= n:
        grams = [padded]
    else:
        grams = [padded[i : i + n] for i in range(len(padded) - n + 1)]
    counts: dict[str, float] = {}
    for g in grams:
        counts[g] = counts.get(g, 0.0) + 1.0
    norm = math.sqrt(sum(v * v for v in counts.values()))
    return {g: v / norm for g, v in counts.items()}


def char_ngram_cosine(name_a: str, name_b: str, n: int = 3) -> float:
    va = char_ngram_vector(name_a, n)
    vb = char_ngram_vector(name_b, n)
    if len(vb) < len(va):
        va, vb = vb, va
    return sum(w * vb.get(g, 0.0) for g, w in va.items())
