"""Vendor similarity, alias ranking, migrants, and report assembly."""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import corpus_of, make_ad, make_corpus
from vendorlens.corpus import VendorNotFound
from vendorlens.identify import (
    DISCLAIMER,
    VendorStyleSet,
    alias_report,
    build_style_sets,
    cosine,
    detect_migrants,
    name_similarity_pairs,
    normalized_similarity,
    pair_similarity,
    rank_aliases,
    self_similarity,
    similarity_record,
)
from vendorlens.repspace import EmbeddingTensor, LayerWeights


def style_set(name: str, rows) -> VendorStyleSet:
    return VendorStyleSet(name, np.asarray(rows, dtype=np.float64))


class TestCosine:
    def test_self_is_one(self):
        assert cosine([3.0, -4.0], [3.0, -4.0]) == pytest.approx(1.0, abs=1e-15)

    def test_orthogonal_units(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_hand_value_four_fifths(self):
        assert cosine([1.0, 2.0], [2.0, 1.0]) == pytest.approx(0.8, abs=1e-12)

    def test_zero_vector_defined_as_zero(self):
        assert cosine([0.0, 0.0], [1.0, 2.0]) == 0.0
        assert cosine([0.0, 0.0], [0.0, 0.0]) == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            cosine([1.0], [1.0, 2.0])


class TestPairAndSelfSimilarity:
    def test_single_ad_identical_vectors(self):
        a = style_set("a", [[1.0, 1.0]])
        b = style_set("b", [[1.0, 1.0]])
        assert pair_similarity(a, b) == pytest.approx(1.0, abs=1e-15)
        assert self_similarity(a) == pytest.approx(1.0, abs=1e-15)
        assert normalized_similarity(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_two_by_one_hand_enumeration(self):
        a = style_set("a", [[1.0, 0.0], [0.0, 1.0]])
        b = style_set("b", [[1.0, 2.0]])
        expected = (cosine([1, 0], [1, 2]) + cosine([0, 1], [1, 2])) / 2
        assert pair_similarity(a, b) == pytest.approx(expected, abs=1e-12)

    def test_self_similarity_two_orthogonal_ads(self):
        a = style_set("a", [[1.0, 0.0], [0.0, 1.0]])
        # ordered pairs: (1+0+0+1)/4
        assert self_similarity(a) == pytest.approx(0.5, abs=1e-15)

    def test_self_equals_pair_with_itself(self):
        rng = np.random.default_rng(4)
        a = style_set("a", rng.normal(size=(7, 3)))
        assert self_similarity(a) == pair_similarity(a, a)

    def test_pair_symmetry_exact(self):
        rng = np.random.default_rng(5)
        a = style_set("a", rng.normal(size=(4, 3)))
        b = style_set("b", rng.normal(size=(6, 3)))
        assert pair_similarity(a, b) == pytest.approx(pair_similarity(b, a), abs=1e-15)
        assert normalized_similarity(a, b) == pytest.approx(
            normalized_similarity(b, a), abs=1e-15
        )

    def test_style_set_validation(self):
        with pytest.raises(ValueError):
            style_set("a", np.empty((0, 3)))
        with pytest.raises(ValueError):
            style_set("a", [[1.0, math.nan]])


class TestNormalizedSimilarity:
    def test_identity_is_exactly_one(self):
        rng = np.random.default_rng(6)
        a = style_set("a", rng.normal(size=(5, 4)))
        assert normalized_similarity(a, a) == 1.0
        assert similarity_record(a, a).sim_norm == 1.0

    def test_clone_vendor_is_one(self):
        rng = np.random.default_rng(7)
        vectors = rng.normal(size=(8, 5))
        a = style_set("origvendor", vectors)
        b = style_set("clonevendor", vectors.copy())
        assert normalized_similarity(a, b) == pytest.approx(1.0, abs=1e-6)

    def test_unclipped_formula_and_upper_bound(self):
        # With the diagonal-inclusive convention, self(A) equals the squared
        # norm of the mean unit vector and sim(A,B) the dot of the two means,
        # so 2s/(sa+sb) <= 1 by AM-GM; the value is reported straight from the
        # formula, never clamped.
        rng = np.random.default_rng(11)
        for _ in range(25):
            a = style_set("a", rng.normal(size=(rng.integers(1, 5), 3)))
            b = style_set("b", rng.normal(size=(rng.integers(1, 5), 3)))
            sim = pair_similarity(a, b)
            expected = 2.0 * sim / (self_similarity(a) + self_similarity(b))
            assert normalized_similarity(a, b) == pytest.approx(expected, abs=1e-15)
            assert normalized_similarity(a, b) <= 1.0 + 1e-12

    def test_degenerate_denominator_raises(self):
        a = style_set("a", [[0.0, 0.0]])
        b = style_set("b", [[0.0, 0.0]])
        with pytest.raises(ValueError):
            normalized_similarity(a, b)

    def test_degenerate_record_flagged_nan(self):
        a = style_set("a", [[0.0, 0.0]])
        b = style_set("b", [[0.0, 0.0]])
        record = similarity_record(a, b)
        assert record.degenerate
        assert math.isnan(record.sim_norm)


class TestRankAliases:
    def three_vendor_sets(self):
        rng = np.random.default_rng(8)
        parent_vectors = rng.normal(size=(6, 4))
        return {
            "parent": style_set("parent", parent_vectors),
            "clone": style_set("clone", parent_vectors.copy()),
            "noise": style_set("noise", rng.normal(size=(6, 4)) + 30.0),
        }

    def test_clone_ranks_first(self):
        ranked = rank_aliases("parent", self.three_vendor_sets())
        assert ranked[0].candidate == "clone"
        assert ranked[0].rank == 1
        assert ranked[0].sim_norm == pytest.approx(1.0, abs=1e-6)

    def test_ranks_are_one_based_and_unique(self):
        ranked = rank_aliases("parent", self.three_vendor_sets())
        assert [r.rank for r in ranked] == list(range(1, len(ranked) + 1))

    def test_top_k_larger_than_candidates(self):
        ranked = rank_aliases("parent", self.three_vendor_sets(), top_k=50)
        assert len(ranked) == 2

    def test_tie_breaks_lexicographically(self):
        base = np.array([[1.0, 0.0]])
        sets = {
            "parent": style_set("parent", base),
            "zeta": style_set("zeta", base.copy()),
            "alpha": style_set("alpha", base.copy()),
        }
        ranked = rank_aliases("parent", sets)
        assert [r.candidate for r in ranked] == ["alpha", "zeta"]

    def test_unknown_parent(self):
        with pytest.raises(VendorNotFound):
            rank_aliases("ghost", self.three_vendor_sets())

    def test_degenerate_candidates_excluded(self):
        # the denominator hits zero only when BOTH self terms vanish
        sets = {
            "deadparent": style_set("deadparent", [[0.0, 0.0]]),
            "deadtwin": style_set("deadtwin", [[0.0, 0.0]]),
            "live": style_set("live", [[0.5, 0.5]]),
        }
        ranked = rank_aliases("deadparent", sets)
        assert [r.candidate for r in ranked] == ["live"]

    def test_ranking_invariant_to_isotropic_scaling(self):
        sets = self.three_vendor_sets()
        scaled = {
            name: style_set(name, 41.5 * s.vectors) for name, s in sets.items()
        }
        order = [r.candidate for r in rank_aliases("parent", sets)]
        order_scaled = [r.candidate for r in rank_aliases("parent", scaled)]
        assert order == order_scaled
        for r, s in zip(rank_aliases("parent", sets), rank_aliases("parent", scaled)):
            assert r.sim_norm == pytest.approx(s.sim_norm, abs=1e-9)


class TestBuildStyleSets:
    def tensor_and_corpus(self):
        corpus = make_corpus(
            make_ad("one", vendor="acme", market="m1", ad_id="ad-000000"),
            make_ad("two", vendor="acme", market="m1", ad_id="ad-000001"),
            make_ad("three", vendor="bolt", market="m2", ad_id="ad-000002"),
        )
        rng = np.random.default_rng(9)
        tensor = EmbeddingTensor(
            mode="cls",
            values=rng.normal(size=(3, 2, 4)).astype(np.float32),
            ad_ids=("ad-000000", "ad-000001", "ad-000002"),
            checkpoint_tag="t",
        )
        return corpus, tensor

    def test_groups_rows_by_vendor(self):
        corpus, tensor = self.tensor_and_corpus()
        weights = LayerWeights.one_hot(2, 1)
        sets = build_style_sets(corpus, tensor, weights)
        assert set(sets) == {"acme", "bolt"}
        assert sets["acme"].n_ads == 2 and sets["bolt"].n_ads == 1
        expected = tensor.values[0, 1, :].astype(np.float64)
        assert np.allclose(sets["acme"].vectors[0], expected, atol=1e-12)

    def test_unknown_ad_id_rejected(self):
        corpus, tensor = self.tensor_and_corpus()
        stranger = EmbeddingTensor(
            mode="cls",
            values=tensor.values,
            ad_ids=("ad-000000", "ad-000001", "ad-999999"),
            checkpoint_tag="t",
        )
        with pytest.raises(ValueError):
            build_style_sets(corpus, stranger, LayerWeights.one_hot(2, 0))

    def test_cap_subsampling_is_deterministic(self):
        ads = [
            make_ad(f"text {i}", vendor="big", market="m", ad_id=f"ad-{i:06d}")
            for i in range(12)
        ]
        corpus = make_corpus(*ads)
        rng = np.random.default_rng(10)
        tensor = EmbeddingTensor(
            mode="cls",
            values=rng.normal(size=(12, 1, 3)).astype(np.float32),
            ad_ids=tuple(a.ad_id for a in ads),
            checkpoint_tag="t",
        )
        w = LayerWeights.one_hot(1, 0)
        first = build_style_sets(corpus, tensor, w, cap=5, seed=3)["big"]
        second = build_style_sets(corpus, tensor, w, cap=5, seed=3)["big"]
        assert first.n_ads == 5
        assert np.array_equal(first.vectors, second.vectors)


class TestMigrants:
    def test_single_market_excluded(self):
        corpus = corpus_of({("solo", "m1"): ["a", "b"]})
        assert detect_migrants(corpus) == []

    def test_three_market_vendor_listed(self):
        corpus = corpus_of(
            {
                ("roamer", "m1"): ["a"],
                ("roamer", "m2"): ["b"],
                ("roamer", "m3"): ["c"],
                ("homebody", "m1"): ["d"],
            }
        )
        assert detect_migrants(corpus) == [("roamer", ("m1", "m2", "m3"))]

    def test_case_variants_collapse_to_one_entry(self):
        corpus = make_corpus(
            make_ad("x", vendor="AgentQ", market="m1"),
            make_ad("y", vendor="agentq", market="m2"),
        )
        assert detect_migrants(corpus) == [("agentq", ("m1", "m2"))]


class TestNamePairs:
    def test_suffixed_variant_clears_threshold(self):
        pairs = name_similarity_pairs(["europills", "europills2"])
        assert len(pairs) == 1
        a, b, name_sim, sim_norm = pairs[0]
        assert (a, b) == ("europills", "europills2")
        assert name_sim >= 0.7
        assert math.isnan(sim_norm)  # no style sets supplied

    def test_unrelated_names_excluded(self):
        assert name_similarity_pairs(["fence", "tinsel"]) == []

    def test_identical_names_score_one(self):
        pairs = name_similarity_pairs(["dupe", "dupe", "other"], threshold=0.99)
        assert pairs == []  # identical strings dedupe to a single vendor
        pairs = name_similarity_pairs(["dupex", "dupey"], threshold=0.0)
        assert pairs[0][2] < 1.0

    def test_threshold_zero_lists_every_pair(self):
        pairs = name_similarity_pairs(["aa", "bb", "cc"], threshold=0.0)
        assert len(pairs) == 3

    def test_style_annotation_attached(self):
        vec = np.array([[1.0, 0.0]])
        sets = {
            "copya": style_set("copya", vec),
            "copyb": style_set("copyb", vec.copy()),
        }
        pairs = name_similarity_pairs(["copya", "copyb"], sets, threshold=0.0)
        assert pairs[0][3] == pytest.approx(1.0, abs=1e-12)


class TestAliasReport:
    def planted_world(self):
        """Three planted clone pairs (sim_norm 1) plus orthogonal noise vendors."""
        dim = 8
        sets = {}
        corpus_spec = {}
        pairs = [("p1", "c1"), ("p2", "c2"), ("p3", "c3")]
        for i, (p, c) in enumerate(pairs):
            v = np.zeros((1, dim))
            v[0, i] = 1.0
            sets[p] = style_set(p, v)
            sets[c] = style_set(c, v.copy())
            corpus_spec[(p, "m1")] = [f"{p} text"]
            corpus_spec[(c, "m2")] = [f"{c} text"]
        for j, name in enumerate(["noisea", "noiseb"]):
            v = np.zeros((1, dim))
            v[0, 4 + j] = 1.0
            sets[name] = style_set(name, v)
            corpus_spec[(name, "m1")] = [f"{name} text"]
        return corpus_of(corpus_spec), sets

    def test_exactly_three_planted_pairs(self):
        corpus, sets = self.planted_world()
        report = alias_report(corpus, sets, sim_norm_threshold=0.9)
        lines = report["aliases"].strip().split("\n")
        assert lines[0] == DISCLAIMER
        assert lines[1].startswith("parent,candidate,")
        rows = lines[2:]
        assert len(rows) == 3
        found = {tuple(sorted(r.split(",")[:2])) for r in rows}
        assert found == {("c1", "p1"), ("c2", "p2"), ("c3", "p3")}

    def test_vacuous_threshold_empty_alias_section(self):
        corpus, sets = self.planted_world()
        report = alias_report(corpus, sets, sim_norm_threshold=1.01)
        assert len(report["aliases"].strip().split("\n")) == 2  # disclaimer + header

    def test_threshold_zero_lists_every_unordered_pair(self):
        corpus, sets = self.planted_world()
        report = alias_report(corpus, sets, sim_norm_threshold=0.0)
        rows = report["aliases"].strip().split("\n")[2:]
        n = len(sets)
        assert len(rows) == n * (n - 1) // 2

    def test_report_is_deterministic(self):
        corpus, sets = self.planted_world()
        first = alias_report(corpus, sets)
        second = alias_report(corpus, sets)
        assert first == second

    def test_ranked_section_covers_all_parents(self):
        corpus, sets = self.planted_world()
        report = alias_report(corpus, sets)
        rows = report["ranked"].strip().split("\n")[2:]
        assert len(rows) == len(sets) * (len(sets) - 1)
        parents = {r.split(",")[0] for r in rows}
        assert parents == set(sets)

    def test_migrant_section_and_column_header(self):
        corpus = make_corpus(
            make_ad("x", vendor="mover", market="m1", ad_id="mm-1"),
            make_ad("y", vendor="mover", market="m2", ad_id="mm-2"),
        )
        sets = {"mover": style_set("mover", [[1.0, 0.0]])}
        report = alias_report(corpus, sets)
        migrant_rows = report["migrants"].strip().split("\n")
        assert migrant_rows[1] == "vendor,markets"
        assert migrant_rows[2] == "mover,m1;m2"

    def test_scatter_has_unordered_unique_pairs(self):
        corpus, sets = self.planted_world()
        report = alias_report(corpus, sets)
        rows = report["scatter"].strip().split("\n")[2:]
        n = len(sets)
        assert len(rows) == n * (n - 1) // 2
        keys = [tuple(sorted(r.split(",")[:2])) for r in rows]
        assert len(set(keys)) == len(keys)

    def test_every_artifact_carries_disclaimer(self):
        corpus, sets = self.planted_world()
        report = alias_report(corpus, sets)
        for text in report.values():
            assert text.startswith(DISCLAIMER)
