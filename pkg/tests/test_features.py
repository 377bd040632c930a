"""Vocabulary fitting, TF-IDF weighting, and character n-gram name vectors."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ngrams_of_doc, tfidf_rows_oracle
from vendorlens.features import (
    Vocabulary,
    char_ngram_cosine,
    char_ngram_vector,
    fit_vocabulary,
    tokenize,
    transform_counts,
    transform_tfidf,
)

docs_strategy = st.lists(
    st.text(alphabet="abc ", min_size=1, max_size=12).filter(lambda s: s.split()),
    min_size=1,
    max_size=8,
)


class TestFitVocabulary:
    def test_unigrams_and_bigrams(self):
        vocab = fit_vocabulary(["a b", "b c"], ngram_range=(1, 2), min_df=1)
        assert set(vocab.terms) == {"a", "b", "c", "a b", "b c"}

    def test_min_df_two(self):
        vocab = fit_vocabulary(["a b", "b c"], ngram_range=(1, 2), min_df=2)
        assert list(vocab.terms) == ["b"]

    def test_case_preserved_by_default(self):
        vocab = fit_vocabulary(["A a", "A a"], ngram_range=(1, 1), min_df=1)
        assert set(vocab.terms) == {"A", "a"}

    def test_case_lower_mode(self):
        vocab = fit_vocabulary(["A a"], ngram_range=(1, 1), min_df=1, case_mode="lower")
        assert list(vocab.terms) == ["a"]

    def test_lexicographic_contiguous(self):
        vocab = fit_vocabulary(["zz aa mm"], ngram_range=(1, 1), min_df=1)
        assert list(vocab.terms) == sorted(vocab.terms)
        assert [vocab.index_of(t) for t in vocab.terms] == list(range(len(vocab.terms)))

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            fit_vocabulary([], ngram_range=(1, 2), min_df=1)

    def test_bad_params_rejected(self):
        with pytest.raises(ValueError):
            fit_vocabulary(["a"], ngram_range=(2, 1), min_df=1)
        with pytest.raises(ValueError):
            fit_vocabulary(["a"], ngram_range=(1, 1), min_df=0)

    @given(docs_strategy)
    @settings(max_examples=60, deadline=None)
    def test_df_matches_enumeration_oracle(self, docs):
        vocab = fit_vocabulary(docs, ngram_range=(1, 2), min_df=1)
        for term in vocab.terms:
            expected_df = sum(
                1 for d in docs if term in set(ngrams_of_doc(d.split(), 1, 2))
            )
            assert vocab.df[vocab.index_of(term)] == expected_df


class TestTfidf:
    def test_hand_example_two_docs(self):
        # docs ["a","a b"]: idf(a)=ln(3/3)+1=1, idf(b)=ln(3/2)+1
        vocab = fit_vocabulary(["a", "a b"], ngram_range=(1, 1), min_df=1)
        idf = vocab.idf()
        assert idf[vocab.index_of("a")] == pytest.approx(1.0, abs=1e-12)
        assert idf[vocab.index_of("b")] == pytest.approx(math.log(3 / 2) + 1, abs=1e-12)
        X = transform_tfidf(vocab, ["a", "a b"]).toarray()
        w_b = math.log(3 / 2) + 1
        norm = math.hypot(1.0, w_b)
        assert X[1, vocab.index_of("a")] == pytest.approx(1.0 / norm, abs=1e-9)
        assert X[1, vocab.index_of("b")] == pytest.approx(w_b / norm, abs=1e-9)
        # frozen oracle values for the normalized second row
        assert X[1, vocab.index_of("a")] == pytest.approx(0.5797386, abs=1e-6)
        assert X[1, vocab.index_of("b")] == pytest.approx(0.8148025, abs=1e-6)

    def test_oov_doc_zero_row(self):
        vocab = fit_vocabulary(["a b"], ngram_range=(1, 1), min_df=1)
        X = transform_tfidf(vocab, ["zz qq"]).toarray()
        assert not X.any()

    def test_rows_unit_norm_or_zero(self):
        vocab = fit_vocabulary(["a b", "b c", "c d"], ngram_range=(1, 2), min_df=1)
        X = transform_tfidf(vocab, ["a b c", "zz", "d"]).toarray()
        norms = np.linalg.norm(X, axis=1)
        for n in norms:
            assert n == pytest.approx(1.0, abs=1e-9) or n == 0.0

    def test_deterministic(self):
        docs = ["a b c", "c d", "a a b"]
        vocab = fit_vocabulary(docs, ngram_range=(1, 2), min_df=1)
        X1 = transform_tfidf(vocab, docs).toarray()
        X2 = transform_tfidf(vocab, docs).toarray()
        assert np.array_equal(X1, X2)

    def test_count_scaling_invariance(self):
        # doubling every term count leaves the normalized row unchanged
        vocab = fit_vocabulary(["a b", "b c"], ngram_range=(1, 1), min_df=1)
        single = transform_tfidf(vocab, ["a b"]).toarray()
        double = transform_tfidf(vocab, ["a a b b"]).toarray()
        assert np.allclose(single, double, atol=1e-12)

    @given(docs_strategy)
    @settings(max_examples=40, deadline=None)
    def test_matches_hand_oracle(self, docs):
        vocab = fit_vocabulary(docs, ngram_range=(1, 2), min_df=1)
        X = transform_tfidf(vocab, docs).toarray()
        df = {t: vocab.df[vocab.index_of(t)] for t in vocab.terms}
        expected = tfidf_rows_oracle(
            [ngrams_of_doc(d.split(), 1, 2) for d in docs],
            list(vocab.terms),
            df,
            len(docs),
        )
        assert np.allclose(X, np.asarray(expected), atol=1e-12)

    @given(docs_strategy, docs_strategy)
    @settings(max_examples=40, deadline=None)
    def test_nonzero_columns_exist_in_vocabulary(self, train_docs, new_docs):
        vocab = fit_vocabulary(train_docs, ngram_range=(1, 2), min_df=1)
        X = transform_tfidf(vocab, new_docs)
        assert all(0 <= j < len(vocab.terms) for j in X.col_indices)

    def test_counts_are_raw_integers(self):
        vocab = fit_vocabulary(["a a b"], ngram_range=(1, 1), min_df=1)
        X = transform_counts(vocab, ["a a a b"]).toarray()
        assert X[0, vocab.index_of("a")] == 3.0
        assert X[0, vocab.index_of("b")] == 1.0


class TestVocabularySerialization:
    def test_round_trip_bit_identical_transform(self, tmp_path):
        docs = ["a b c", "b c d", "d e"]
        vocab = fit_vocabulary(docs, ngram_range=(1, 2), min_df=1)
        path = tmp_path / "vocab.json"
        vocab.save(path)
        again = Vocabulary.load(path)
        assert again == vocab
        X1 = transform_tfidf(vocab, docs).toarray()
        X2 = transform_tfidf(again, docs).toarray()
        assert np.array_equal(X1, X2)

    def test_file_bytes_stable(self, tmp_path):
        vocab = fit_vocabulary(["a b"], ngram_range=(1, 2), min_df=1)
        p1, p2 = tmp_path / "v1.json", tmp_path / "v2.json"
        vocab.save(p1)
        vocab.save(p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestCharNgramNames:
    def test_identical_names_cosine_one(self):
        assert char_ngram_cosine("samevendor", "samevendor") == pytest.approx(
            1.0, abs=1e-12
        )

    def test_houseofdank_variant_high(self):
        assert char_ngram_cosine("houseofdank", "houseofdank2.0") > 0.7

    def test_unrelated_names_low(self):
        assert char_ngram_cosine("fence", "tinsel") <= 0.2

    def test_short_name_single_padded_gram(self):
        vec = char_ngram_vector("ab", n=5)
        assert list(vec) == ["^ab$"]
        assert vec["^ab$"] == pytest.approx(1.0, abs=1e-12)

    def test_n_below_one_rejected(self):
        with pytest.raises(ValueError):
            char_ngram_vector("abc", n=0)

    def test_vector_unit_norm(self):
        vec = char_ngram_vector("houseofdank", n=3)
        assert math.sqrt(sum(v * v for v in vec.values())) == pytest.approx(
            1.0, abs=1e-12
        )


class TestTokenize:
    def test_whitespace_and_case_modes(self):
        assert tokenize("A  b\tC", "preserve") == ["A", "b", "C"]
        assert tokenize("A  b\tC", "lower") == ["a", "b", "c"]

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            tokenize("a", "upper")
