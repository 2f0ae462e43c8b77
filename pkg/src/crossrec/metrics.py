"""Ranking metrics (per-user AUC, HR@N, novelty, diversity) and report assembly.

Metrics are computed per participating user and averaged across users. A
user with no test positives (or, for AUC, no negatives) is *excluded*; the
report keeps an explicit count of exclusions per metric instead of silently
dropping anyone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np


def auc_user(pos_scores, neg_scores) -> float:
    """Fraction of (positive, negative) score pairs ranked correctly, ties 0.5.

    Computed by exhaustive pair counting (chunked), so it matches the
    brute-force definition exactly.
    """
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("user excluded: empty score list")
    greater = 0
    equal = 0
    chunk = max(1, 2_000_000 // max(neg.size, 1))
    for start in range(0, pos.size, chunk):
        block = pos[start:start + chunk, None]
        greater += int((block > neg[None, :]).sum())
        equal += int((block == neg[None, :]).sum())
    return (greater + 0.5 * equal) / (pos.size * neg.size)


def hit_ratio(ranked_top_n: Iterable, test_positives: Iterable, n: int) -> float:
    """|top-n hits| / min(n, |test positives|), bounded at 1."""
    ranked = list(ranked_top_n)
    if len(ranked) > n:
        raise ValueError(f"ranked list has {len(ranked)} items, more than n={n}")
    positives = set(test_positives)
    if not positives:
        raise ValueError("user excluded: no test positives")
    hits = len(set(ranked) & positives)
    return hits / min(n, len(positives))


def novelty(recommended: Mapping, train_counts: Mapping) -> float:
    """Mean self-information -log2(p) of recommended items' training share.

    `train_counts` maps item -> training interaction count; items unseen in
    training get the smoothed share 1 / (total + 1).
    """
    total = sum(train_counts.values())
    unseen = 1.0 / (total + 1)
    values = []
    for user in recommended:
        for item in recommended[user]:
            share = train_counts.get(item, 0) / total if total > 0 else 0.0
            values.append(-math.log2(share if share > 0 else unseen))
    if not values:
        raise ValueError("no recommendations to score")
    return float(np.mean(values))


def diversity(recommended: Mapping, item_vectors: Mapping) -> float:
    """Mean over users of intra-list dissimilarity: average 1 - cosine over
    unordered item pairs. Lists with fewer than two items contribute 0."""
    per_user = []
    for user in recommended:
        items = list(recommended[user])
        for item in items:
            if item not in item_vectors:
                raise ValueError(f"item {item!r} has no topic vector")
        if len(items) < 2:
            per_user.append(0.0)
            continue
        vectors = np.stack([np.asarray(item_vectors[i], dtype=float) for i in items])
        norms = np.linalg.norm(vectors, axis=1)
        pair_values = []
        for a in range(len(items)):
            for b in range(a + 1, len(items)):
                denom = norms[a] * norms[b]
                cos = float(vectors[a] @ vectors[b] / denom) if denom > 0 else 0.0
                pair_values.append(1.0 - cos)
        per_user.append(float(np.mean(pair_values)))
    if not per_user:
        raise ValueError("no recommendation lists")
    return float(np.mean(per_user))


def top_n(scores: Mapping, n: int, exclude: Iterable = ()) -> list:
    """Highest-n scored items outside `exclude`, ties broken by ascending id."""
    if n < 1:
        raise ValueError("n must be >= 1")
    excluded = set(exclude)
    ranked = sorted((item for item in scores if item not in excluded),
                    key=lambda item: (-scores[item], item))
    return ranked[:n]


@dataclass
class EvalReport:
    """Per-user metric values plus averages and exclusion accounting."""
    per_user: dict[str, dict] = field(default_factory=dict)
    summary: dict[str, float] = field(default_factory=dict)
    included: dict[str, int] = field(default_factory=dict)
    excluded: dict[str, int] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def add_metric(self, name: str, values: Mapping, excluded_users: int) -> None:
        self.per_user[name] = dict(sorted(values.items(), key=lambda kv: str(kv[0])))
        self.included[name] = len(values)
        self.excluded[name] = excluded_users
        if values:
            self.summary[name] = float(np.mean(list(values.values())))

    def add_scalar(self, name: str, value: float) -> None:
        self.summary[name] = float(value)
        self.included[name] = 1
        self.excluded[name] = 0
