"""Deterministic two-network interaction generator with drift and outliers.

Stands in for an unavailable paired social-network corpus: every user has a
latent topical preference that drifts over time, interacts on two networks
that share that preference but use independent noise, and can be hit by
seasonal outlier intervals where an off-profile topic is temporarily
boosted and fully removed afterwards.

Randomness is partitioned per (user, interval, network) seed streams, so
toggling outlier injection cannot change any other interval's draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import (DAY, Granularity, Interaction, IntervalGrid, Network,
                   TopicalSnapshot, UserKind, UserRecord)

_NET_CODE = {Network.SOURCE: 0, Network.TARGET: 1}


@dataclass(frozen=True)
class SynthConfig:
    users: int
    items: int
    topics: int
    intervals: int
    new_user_fraction: float = 0.3
    base_sparsity: float = 0.99
    outlier_intervals: frozenset = frozenset()
    outlier_strength: float = 0.0
    drift_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if min(self.users, self.items, self.topics, self.intervals) < 1:
            raise ValueError("users, items, topics and intervals must be >= 1")
        if not 0.0 < self.new_user_fraction < 1.0:
            raise ValueError("new_user_fraction must be in (0, 1)")
        if not 0.0 < self.base_sparsity < 1.0:
            raise ValueError("base_sparsity must be in (0, 1)")
        if self.outlier_strength < 0.0 or self.drift_rate < 0.0:
            raise ValueError("outlier_strength and drift_rate must be >= 0")
        bad = [t for t in self.outlier_intervals if not 1 <= t <= self.intervals]
        if bad:
            raise ValueError(f"outlier intervals {sorted(bad)} outside [1, {self.intervals}]")
        object.__setattr__(self, "outlier_intervals", frozenset(self.outlier_intervals))


@dataclass
class SynthDataset:
    config: SynthConfig
    grid: IntervalGrid
    kinds: dict
    records: dict                     # user -> UserRecord (new users: source only)
    item_topics: np.ndarray           # (items, topics), rows on the simplex
    interactions: list[Interaction]   # ground truth, both networks
    snapshots: list[TopicalSnapshot] = field(default_factory=list)


def _sparse_simplex(rng: np.random.Generator, n_topics: int, active: int = 3) -> np.ndarray:
    """Non-negative vector summing to 1 with at most `active` non-zero topics."""
    active = min(active, n_topics)
    vec = np.zeros(n_topics)
    picks = rng.choice(n_topics, size=active, replace=False)
    vec[picks] = rng.dirichlet(np.ones(active))
    return vec


def _stream_rng(seed: int, namespace: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, namespace, *key)))


def generate(config: SynthConfig) -> SynthDataset:
    """Produce the full dataset for `config`, bit-identical per seed."""
    n_users, n_items = config.users, config.items
    n_topics, n_intervals = config.topics, config.intervals

    item_rng = _stream_rng(config.seed, 0)
    item_topics = np.stack([_sparse_simplex(item_rng, n_topics) for _ in range(n_items)])

    # events per (user, interval, network) sized so the distinct user-item
    # density per network lands near 1 - base_sparsity
    lam = n_items * (1.0 - config.base_sparsity) / n_intervals

    n_new = int(n_users * config.new_user_fraction)
    kinds = {u: (UserKind.NEW if u < n_new else UserKind.EXISTING) for u in range(n_users)}

    interactions: list[Interaction] = []
    snapshots: list[TopicalSnapshot] = []
    records: dict = {}

    for user in range(n_users):
        pref_rng = _stream_rng(config.seed, 1, user)
        pref = _sparse_simplex(pref_rng, n_topics)
        streams = {net: np.zeros((n_intervals, n_topics)) for net in Network}

        for interval in range(1, n_intervals + 1):
            effective = pref
            if interval in config.outlier_intervals:
                out_rng = _stream_rng(config.seed, 3, user, interval)
                low_half = np.argsort(pref, kind="stable")[: max(1, n_topics // 2)]
                boosted = pref.copy()
                boosted[out_rng.choice(low_half)] += config.outlier_strength
                effective = boosted / boosted.sum()

            weights = item_topics @ effective
            prob = weights / weights.sum()
            for network in (Network.SOURCE, Network.TARGET):
                draw_rng = _stream_rng(config.seed, 2, user, interval, _NET_CODE[network])
                count = draw_rng.poisson(lam)
                if count == 0:
                    continue
                drawn = draw_rng.choice(n_items, size=count, replace=True, p=prob)
                picked = sorted(set(int(i) for i in drawn))
                offsets = draw_rng.integers(0, 14 * DAY, size=len(picked))
                base_ts = (interval - 1) * 14 * DAY
                for rank, item in enumerate(picked):
                    interactions.append(Interaction(user, item, base_ts + int(offsets[rank]),
                                                    network))
                streams[network][interval - 1] = item_topics[picked].sum(axis=0)
                snapshots.append(TopicalSnapshot(user, interval, network,
                                                 streams[network][interval - 1].copy()))

            # drift applies after the interval completes; outlier boost never persists
            if config.drift_rate > 0.0:
                pref = np.clip(pref + config.drift_rate * pref_rng.normal(size=n_topics), 0.0, None)
                total = pref.sum()
                pref = pref / total if total > 0 else np.full(n_topics, 1.0 / n_topics)

        if kinds[user] is UserKind.NEW:
            records[user] = UserRecord(user, UserKind.NEW, streams[Network.SOURCE], None)
        else:
            records[user] = UserRecord(user, UserKind.EXISTING, streams[Network.SOURCE],
                                       streams[Network.TARGET])

    grid = IntervalGrid(origin=0, granularity=Granularity.BIWEEKLY, count=n_intervals)
    return SynthDataset(config=config, grid=grid, kinds=kinds, records=records,
                        item_topics=item_topics, interactions=interactions,
                        snapshots=snapshots)
