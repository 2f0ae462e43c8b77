"""Metric values against brute-force oracles, plus report accounting."""

import math

import numpy as np
import pytest

from crossrec.metrics import (EvalReport, auc_user, diversity, hit_ratio,
                              novelty, top_n)


def auc_oracle(pos, neg):
    """Exhaustive pair counting, the definitional oracle."""
    hits = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                hits += 1.0
            elif p == n:
                hits += 0.5
    return hits / (len(pos) * len(neg))


class TestAucUser:
    def test_perfect_separation(self):
        assert auc_user([0.9], [0.1, 0.2]) == 1.0

    def test_pair_counting_example(self):
        assert auc_user([0.6, 0.2], [0.4, 0.1]) == 0.75

    def test_tie_counts_half(self):
        assert auc_user([0.5], [0.5]) == 0.5

    def test_empty_list_signals_exclusion(self):
        with pytest.raises(ValueError, match="excluded"):
            auc_user([], [0.1])
        with pytest.raises(ValueError, match="excluded"):
            auc_user([0.5], [])

    def test_equals_exhaustive_pair_counting(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            pos = rng.choice(np.linspace(0, 1, 21), size=rng.integers(1, 12)).tolist()
            neg = rng.choice(np.linspace(0, 1, 21), size=rng.integers(1, 12)).tolist()
            assert auc_user(pos, neg) == auc_oracle(pos, neg)

    def test_invariant_under_monotone_transforms(self):
        rng = np.random.default_rng(6)
        pos = rng.uniform(size=8)
        neg = rng.uniform(size=11)
        base = auc_user(pos, neg)
        for transform in (lambda x: 3 * x + 2, np.exp, lambda x: x ** 3):
            assert auc_user(transform(pos), transform(neg)) == pytest.approx(base)


class TestHitRatio:
    def test_single_positive_hit(self):
        assert hit_ratio(["a", "b"], {"a"}, 10) == 1.0

    def test_no_overlap(self):
        assert hit_ratio(["a", "b"], {"z"}, 10) == 0.0

    def test_partial_overlap(self):
        ranked = ["a", "b", "c", "x", "y"]
        assert hit_ratio(ranked, {"a", "b", "c", "d", "e"}, 10) == pytest.approx(0.6)

    def test_monotone_in_n(self):
        rng = np.random.default_rng(8)
        items = [f"i{j}" for j in range(30)]
        positives = set(rng.choice(items, size=6, replace=False).tolist())
        ranked = rng.permutation(items).tolist()
        values = [hit_ratio(ranked[:n], positives, n) for n in range(1, 31)]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_empty_positives_signals_exclusion(self):
        with pytest.raises(ValueError, match="excluded"):
            hit_ratio(["a"], set(), 10)

    def test_oversized_ranked_list_rejected(self):
        with pytest.raises(ValueError, match="more than n"):
            hit_ratio(["a", "b", "c"], {"a"}, 2)


class TestNovelty:
    def test_most_popular_item_of_uniform_two_item_corpus(self):
        counts = {"a": 5, "b": 5}
        assert novelty({"u": ["a"]}, counts) == pytest.approx(1.0)

    def test_unseen_items_get_the_smoothed_maximum(self):
        counts = {"a": 9, "b": 1}
        seen = novelty({"u": ["a"]}, counts)
        unseen = novelty({"u": ["z"]}, counts)
        assert unseen == pytest.approx(-math.log2(1 / 11))
        assert unseen > seen

    def test_duplicated_lists_leave_the_mean_unchanged(self):
        counts = {"a": 3, "b": 1}
        single = novelty({"u": ["a", "b"]}, counts)
        doubled = novelty({"u": ["a", "b"], "v": ["a", "b"]}, counts)
        assert doubled == pytest.approx(single)


class TestDiversity:
    def test_identical_vectors_give_zero(self):
        vectors = {"a": [1.0, 0.0], "b": [1.0, 0.0]}
        assert diversity({"u": ["a", "b"]}, vectors) == pytest.approx(0.0)

    def test_orthogonal_vectors_give_one(self):
        vectors = {"a": [1.0, 0.0], "b": [0.0, 1.0]}
        assert diversity({"u": ["a", "b"]}, vectors) == pytest.approx(1.0)

    def test_three_item_list_against_pairwise_oracle(self):
        root_half = 1.0 / math.sqrt(2.0)
        vectors = {"a": [1.0, 0.0], "b": [0.0, 1.0], "c": [root_half, root_half]}
        expected = (1.0 + (1.0 - root_half) + (1.0 - root_half)) / 3.0
        value = diversity({"u": ["a", "b", "c"]}, vectors)
        assert value == pytest.approx(expected)
        assert value == pytest.approx(0.5286, abs=1e-4)

    def test_single_item_lists_contribute_zero(self):
        vectors = {"a": [1.0, 0.0], "b": [0.0, 1.0]}
        assert diversity({"u": ["a"], "v": ["a", "b"]}, vectors) == pytest.approx(0.5)

    def test_missing_vector_rejected(self):
        with pytest.raises(ValueError, match="topic vector"):
            diversity({"u": ["a", "zzz"]}, {"a": [1.0]})


class TestTopN:
    def test_basic_ranking(self):
        assert top_n({"a": 0.9, "b": 0.8}, 1) == ["a"]

    def test_exclusion(self):
        assert top_n({"a": 0.9, "b": 0.8}, 1, exclude={"a"}) == ["b"]

    def test_ties_break_by_ascending_id(self):
        scores = {"b": 0.5, "a": 0.5, "c": 0.4}
        oracle = sorted(scores, key=lambda it: (-scores[it], it))
        assert top_n(scores, 3) == oracle == ["a", "b", "c"]

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            top_n({"a": 1.0}, 0)


class TestEvalReport:
    def test_averages_recompute_from_per_user_values(self):
        report = EvalReport()
        values = {"u1": 0.25, "u2": 0.75, "u3": 0.5}
        report.add_metric("auc", values, excluded_users=2)
        assert report.summary["auc"] == pytest.approx(np.mean(list(values.values())))
        assert report.included["auc"] == 3
        assert report.excluded["auc"] == 2
