"""Synthetic two-network generator: determinism, outlier locality, density."""

import numpy as np
import pytest

from crossrec.data import Network, UserKind
from crossrec.synth import SynthConfig, generate


def small_config(**overrides):
    base = dict(users=30, items=60, topics=8, intervals=5, new_user_fraction=0.3,
                base_sparsity=0.9, outlier_intervals=frozenset(),
                outlier_strength=0.0, drift_rate=0.05, seed=7)
    base.update(overrides)
    return SynthConfig(**base)


def interaction_key(dataset):
    return sorted((r.user_id, r.item_id, r.timestamp, r.network.value)
                  for r in dataset.interactions)


class TestConfigValidation:
    def test_zero_users_rejected(self):
        with pytest.raises(ValueError):
            small_config(users=0)

    def test_outlier_interval_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="outlier"):
            small_config(outlier_intervals=frozenset({9}))

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            small_config(new_user_fraction=1.0)
        with pytest.raises(ValueError):
            small_config(base_sparsity=0.0)


class TestDeterminism:
    def test_same_seed_twice_is_identical(self):
        a = generate(small_config())
        b = generate(small_config())
        assert interaction_key(a) == interaction_key(b)
        for user in a.records:
            np.testing.assert_array_equal(a.records[user].source_stream,
                                          b.records[user].source_stream)
        np.testing.assert_array_equal(a.item_topics, b.item_topics)

    def test_different_seeds_differ(self):
        a = generate(small_config(seed=1))
        b = generate(small_config(seed=2))
        assert interaction_key(a) != interaction_key(b)


class TestOutliers:
    def test_zero_strength_matches_a_run_without_outliers(self):
        with_marker = generate(small_config(outlier_intervals=frozenset({3}),
                                            outlier_strength=0.0))
        without = generate(small_config())
        assert interaction_key(with_marker) == interaction_key(without)
        for user in without.records:
            np.testing.assert_array_equal(
                with_marker.records[user].source_stream,
                without.records[user].source_stream)

    def test_injection_changes_only_designated_intervals(self):
        plain = generate(small_config())
        boosted = generate(small_config(outlier_intervals=frozenset({3}),
                                        outlier_strength=3.0))
        changed = False
        for user in plain.records:
            for attr in ("source_stream", "target_stream"):
                a = getattr(plain.records[user], attr)
                b = getattr(boosted.records[user], attr)
                if a is None:
                    continue
                np.testing.assert_array_equal(np.delete(a, 2, axis=0),
                                              np.delete(b, 2, axis=0))
                if not np.array_equal(a[2], b[2]):
                    changed = True
        assert changed, "a strong outlier boost must move some interval-3 snapshot"


class TestShapes:
    def test_snapshots_are_non_negative_and_k_wide(self):
        dataset = generate(small_config())
        for snap in dataset.snapshots:
            assert snap.frequencies.shape == (8,)
            assert np.all(snap.frequencies >= 0)

    def test_new_users_expose_no_target_stream(self):
        dataset = generate(small_config())
        n_new = sum(kind is UserKind.NEW for kind in dataset.kinds.values())
        assert n_new == 9  # floor(30 * 0.3)
        for user, kind in dataset.kinds.items():
            record = dataset.records[user]
            assert (record.target_stream is None) == (kind is UserKind.NEW)

    def test_ground_truth_keeps_target_interactions_for_new_users(self):
        dataset = generate(small_config())
        new_users = {u for u, k in dataset.kinds.items() if k is UserKind.NEW}
        assert any(r.user_id in new_users and r.network is Network.TARGET
                   for r in dataset.interactions)

    def test_item_topics_live_on_a_sparse_simplex(self):
        dataset = generate(small_config())
        sums = dataset.item_topics.sum(axis=1)
        np.testing.assert_allclose(sums, 1.0, atol=1e-12)
        assert np.all((dataset.item_topics > 0).sum(axis=1) <= 3)


class TestDensity:
    def test_realized_density_tracks_the_sparsity_target(self):
        """Counting oracle over the generated matrix: distinct target-network
        pairs per cell should land within +-20% of 1 - base_sparsity."""
        config = SynthConfig(users=100, items=500, topics=8, intervals=5,
                             new_user_fraction=0.3, base_sparsity=0.996,
                             drift_rate=0.02, seed=13)
        dataset = generate(config)
        pairs = {(r.user_id, r.item_id) for r in dataset.interactions
                 if r.network is Network.TARGET}
        density = len(pairs) / (config.users * config.items)
        assert 0.004 * 0.8 <= density <= 0.004 * 1.2
