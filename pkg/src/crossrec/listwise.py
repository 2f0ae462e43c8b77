"""Per-user listwise classification loss over a predicted rating list.

The criterion treats ranking under implicit feedback as two-class
classification: interacted items should score 1, non-interacted items 0.
Per user the loss is

    (1 - mean_pos)^2 + mean_neg^2 + var_pos + var_neg

with population variances, so both class means are pulled to their targets
while both classes collapse toward single points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ClassStats:
    mean: float
    variance: float  # population variance, divisor n
    count: int


def class_stats(ratings) -> ClassStats:
    """Mean and population variance of one class of ratings."""
    arr = np.asarray(ratings, dtype=float)
    if arr.size == 0:
        raise ValueError("empty class")
    mean = float(arr.mean())
    variance = float(((arr - mean) ** 2).mean())
    return ClassStats(mean=mean, variance=variance, count=arr.size)


def listwise_loss(pos_ratings, neg_ratings) -> float:
    """Loss for one user's rating list; zero exactly at the ideal classification."""
    pos = class_stats(pos_ratings)
    neg = class_stats(neg_ratings)
    return (1.0 - pos.mean) ** 2 + neg.mean ** 2 + pos.variance + neg.variance


def listwise_grad(pos_ratings, neg_ratings):
    """Gradient of `listwise_loss` w.r.t. every rating.

    For positive rating r_i (class mean mu, size n):
        d/dr_i = 2(mu - 1)/n + 2(r_i - mu)/n
    and for negative rating r_j (class mean nu, size m):
        d/dr_j = 2 nu/m + 2(r_j - nu)/m.
    """
    pos = np.asarray(pos_ratings, dtype=float)
    neg = np.asarray(neg_ratings, dtype=float)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("empty class")
    mu = pos.mean()
    nu = neg.mean()
    d_pos = 2.0 * (mu - 1.0) / pos.size + 2.0 * (pos - mu) / pos.size
    d_neg = 2.0 * nu / neg.size + 2.0 * (neg - nu) / neg.size
    return d_pos, d_neg


def attention_loss(score: float) -> float:
    """(1 - score)^2 for a similarity head run on a duplicated input.

    A perfectly trained head outputs 1 on identical halves; callers sum one
    term per network for users active on both.
    """
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"attention score {score} outside [0, 1]")
    return (1.0 - score) ** 2


def attention_loss_grad(score: float) -> float:
    """d attention_loss / d score."""
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"attention score {score} outside [0, 1]")
    return -2.0 * (1.0 - score)


def total_loss(listwise: float, attention: float) -> float:
    """Unweighted sum of the two components."""
    return listwise + attention
