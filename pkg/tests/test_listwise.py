"""Listwise mean/variance criterion: values, gradient, and properties."""

import numpy as np
import pytest

from crossrec.listwise import (attention_loss, attention_loss_grad, class_stats,
                               listwise_grad, listwise_loss, total_loss)


def fd_grad(pos, neg, h=1e-6):
    """Central-difference oracle for the loss gradient."""
    pos = np.asarray(pos, dtype=float)
    neg = np.asarray(neg, dtype=float)
    d_pos = np.zeros_like(pos)
    d_neg = np.zeros_like(neg)
    for i in range(pos.size):
        up, down = pos.copy(), pos.copy()
        up[i] += h
        down[i] -= h
        d_pos[i] = (listwise_loss(up, neg) - listwise_loss(down, neg)) / (2 * h)
    for j in range(neg.size):
        up, down = neg.copy(), neg.copy()
        up[j] += h
        down[j] -= h
        d_neg[j] = (listwise_loss(pos, up) - listwise_loss(pos, down)) / (2 * h)
    return d_pos, d_neg


class TestClassStats:
    def test_constant_list(self):
        stats = class_stats([1.0, 1.0, 1.0])
        assert stats.mean == 1.0
        assert stats.variance == 0.0
        assert stats.count == 3

    def test_direct_arithmetic(self):
        stats = class_stats([0.2, 0.4, 0.6])
        assert stats.mean == pytest.approx(0.4)
        assert stats.variance == pytest.approx(0.08 / 3)  # population divisor

    def test_singleton_variance_is_exactly_zero(self):
        stats = class_stats([0.7])
        assert stats.mean == pytest.approx(0.7)
        assert stats.variance == 0.0

    def test_empty_class_rejected(self):
        with pytest.raises(ValueError, match="empty class"):
            class_stats([])


class TestListwiseLoss:
    def test_ideal_classification_is_zero(self):
        assert listwise_loss([1.0, 1.0, 1.0], [0.0, 0.0]) == 0.0

    def test_constant_half_predictions(self):
        assert listwise_loss([0.5, 0.5], [0.5, 0.5, 0.5]) == pytest.approx(0.5)

    def test_direct_arithmetic(self):
        # means 0.7 / 0.2, variances 0.01 / 0.01
        assert listwise_loss([0.8, 0.6], [0.1, 0.3]) == pytest.approx(0.15)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            listwise_loss([], [0.1])
        with pytest.raises(ValueError):
            listwise_loss([0.9], [])

    def test_non_negative_and_zero_only_at_ideal(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            pos = rng.uniform(-2, 2, size=rng.integers(1, 20))
            neg = rng.uniform(-2, 2, size=rng.integers(1, 20))
            value = listwise_loss(pos, neg)
            assert value >= 0.0
            ideal = np.all(pos == 1.0) and np.all(neg == 0.0)
            assert (value == 0.0) == ideal

    def test_permutation_invariance(self):
        rng = np.random.default_rng(7)
        pos = rng.uniform(0, 1, size=9)
        neg = rng.uniform(0, 1, size=13)
        base = listwise_loss(pos, neg)
        for _ in range(10):
            assert listwise_loss(rng.permutation(pos),
                                 rng.permutation(neg)) == pytest.approx(base, abs=1e-12)

    def test_duplicate_rating_shifts_loss_through_class_stats_only(self):
        pos = [0.8, 0.6, 0.9]
        neg = [0.2, 0.1]
        dup_pos = pos + [pos[0]]
        expected = ((1 - class_stats(dup_pos).mean) ** 2
                    + class_stats(neg).mean ** 2
                    + class_stats(dup_pos).variance + class_stats(neg).variance)
        assert listwise_loss(dup_pos, neg) == pytest.approx(expected, abs=1e-12)


class TestListwiseGrad:
    def test_ideal_lists_have_zero_gradient(self):
        d_pos, d_neg = listwise_grad([1.0, 1.0], [0.0, 0.0, 0.0])
        np.testing.assert_array_equal(d_pos, 0.0)
        np.testing.assert_array_equal(d_neg, 0.0)

    def test_singleton_positive_formula(self):
        # variance term of a singleton contributes nothing: 2(0.5 - 1)/1 = -1
        d_pos, d_neg = listwise_grad([0.5], [0.25])
        assert d_pos[0] == pytest.approx(-1.0)
        assert d_neg[0] == pytest.approx(2 * 0.25 + 0.0)

    def test_matches_finite_differences_on_random_instances(self):
        rng = np.random.default_rng(99)
        worst = 0.0
        for _ in range(1000):
            pos = rng.uniform(-2, 2, size=rng.integers(1, 51))
            neg = rng.uniform(-2, 2, size=rng.integers(1, 51))
            d_pos, d_neg = listwise_grad(pos, neg)
            fd_pos, fd_neg = fd_grad(pos, neg)
            worst = max(worst, np.max(np.abs(d_pos - fd_pos)),
                        np.max(np.abs(d_neg - fd_neg)))
        assert worst < 1e-6

    def test_gradient_descent_reaches_the_minimum(self):
        """The loss is convex in the ratings; plain descent must drive it
        below 1e-6 from any start inside (0, 1)."""
        rng = np.random.default_rng(17)
        pos = rng.uniform(0.0, 1.0, size=12)
        neg = rng.uniform(0.0, 1.0, size=30)
        for _ in range(10_000):
            d_pos, d_neg = listwise_grad(pos, neg)
            pos = pos - 0.4 * d_pos
            neg = neg - 0.4 * d_neg
            if listwise_loss(pos, neg) < 1e-6:
                break
        assert listwise_loss(pos, neg) < 1e-6


class TestAttentionLoss:
    def test_perfect_match(self):
        assert attention_loss(1.0) == 0.0

    def test_worst_match(self):
        assert attention_loss(0.0) == 1.0

    def test_direct_arithmetic(self):
        assert attention_loss(0.6) == pytest.approx(0.16)

    def test_out_of_range_score_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            attention_loss(1.2)
        with pytest.raises(ValueError, match="outside"):
            attention_loss_grad(-0.1)

    def test_grad_matches_finite_differences(self):
        h = 1e-7
        for score in (0.1, 0.5, 0.9):
            numeric = (attention_loss(score + h) - attention_loss(score - h)) / (2 * h)
            assert attention_loss_grad(score) == pytest.approx(numeric, abs=1e-6)


class TestTotalLoss:
    def test_addition(self):
        assert total_loss(0.5, 0.16) == pytest.approx(0.66)

    def test_zero(self):
        assert total_loss(0.0, 0.0) == 0.0

    def test_bookkeeping_identity(self):
        lw = listwise_loss([0.7, 0.9], [0.2])
        at = attention_loss(0.8)
        assert total_loss(lw, at) == lw + at
