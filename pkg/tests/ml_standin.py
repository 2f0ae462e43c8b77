"""Deterministic MovieLens-100K-scale stand-in for the loss-criterion runs.

The real corpus cannot be redistributed with the repository, so ordering
experiments fall back to this generator: same scale (943 users, 1682 items,
~100k implicit events), a planted low-rank preference structure users act
on, a popularity skew so non-personalized ranking is competitive but
beatable, and uniform random timestamps. The acceptance tests prefer a real
`u.data` (via ML100K_PATH or ./data/ml-100k/u.data) when one is present.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

N_USERS = 943
N_ITEMS = 1682
TARGET_EVENTS = 100_000


def find_real_ml100k() -> Path | None:
    candidates = []
    env = os.environ.get("ML100K_PATH")
    if env:
        candidates.append(Path(env))
    candidates.append(Path("data/ml-100k/u.data"))
    for path in candidates:
        if path.is_file():
            return path
    return None


def write_standin(path, seed: int = 20) -> Path:
    """Write a `UserID::MovieID::Rating::Timestamp` file, ~100k events."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 7070)))
    d_true = 16
    user_vecs = rng.normal(0.0, 1.0, size=(N_USERS, d_true))
    item_vecs = rng.normal(0.0, 1.0, size=(N_ITEMS, d_true))
    # popularity skew: a few hundred broadly appealing items, long tail after
    pop_rank = rng.permutation(N_ITEMS)
    item_bias = 1.0 / np.sqrt(1.0 + pop_rank)

    raw_counts = rng.lognormal(mean=0.0, sigma=0.9, size=N_USERS)
    counts = np.clip(raw_counts / raw_counts.sum() * TARGET_EVENTS, 20, 650)
    counts = counts.astype(int)

    lines = []
    for user in range(N_USERS):
        affinity = item_vecs @ user_vecs[user] / np.sqrt(d_true)
        logits = 1.6 * affinity + 2.2 * item_bias
        weights = np.exp(logits - logits.max())
        prob = weights / weights.sum()
        n_events = min(int(counts[user]), N_ITEMS)
        items = rng.choice(N_ITEMS, size=n_events, replace=False, p=prob)
        stamps = rng.integers(874_000_000, 893_000_000, size=n_events)
        ratings = rng.integers(1, 6, size=n_events)
        for item, rating, ts in zip(items.tolist(), ratings.tolist(), stamps.tolist()):
            lines.append(f"{user + 1}::{item + 1}::{rating}::{ts}")
    order = rng.permutation(len(lines))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines[i] for i in order) + "\n")
    return path
