"""Matrix factorization under three optimization criteria, plus popularity
baselines.

The scoring function is always the inner product of d-dimensional user and
item factors; only the training criterion differs (pointwise squared error,
pairwise BPR, or the listwise mean/variance criterion). Users and items are
dense integer indices here; id mapping happens in the experiment layer.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .data import (FullNegatives, Interaction, IntervalGrid, SampledNegatives,
                   interval_of)
from .listwise import class_stats, listwise_grad, listwise_loss
from .nn import adam_init, adam_step


@dataclass
class MFParams:
    user_factors: np.ndarray  # (n_users, d)
    item_factors: np.ndarray  # (n_items, d)

    @property
    def d(self) -> int:
        return self.user_factors.shape[1]

    def param_dict(self) -> dict[str, np.ndarray]:
        return {"user_factors": self.user_factors, "item_factors": self.item_factors}


def init_params(n_users: int, n_items: int, d: int, seed: int) -> MFParams:
    if d < 1:
        raise ValueError("latent dimensionality must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 100)))
    return MFParams(user_factors=rng.normal(0.0, 0.1, size=(n_users, d)),
                    item_factors=rng.normal(0.0, 0.1, size=(n_items, d)))


def predict(params: MFParams, user: int, item: int) -> float:
    if not 0 <= user < params.user_factors.shape[0]:
        raise IndexError(f"unknown user {user}")
    if not 0 <= item < params.item_factors.shape[0]:
        raise IndexError(f"unknown item {item}")
    return float(params.user_factors[user] @ params.item_factors[item])


def predict_items(params: MFParams, user: int, items) -> np.ndarray:
    """Scores for one user against an array of item indices."""
    items = np.asarray(items, dtype=int)
    return params.item_factors[items] @ params.user_factors[user]


@dataclass
class EpochStats:
    epoch: int
    loss: float
    mean_pos: float
    mean_neg: float
    var_pos: float
    var_neg: float
    auc: float | None = None


def _group_by_user(positives: Iterable[tuple[int, int]]) -> dict[int, np.ndarray]:
    grouped: dict[int, list[int]] = {}
    for user, item in positives:
        grouped.setdefault(int(user), []).append(int(item))
    return {u: np.array(sorted(set(items)), dtype=int)
            for u, items in sorted(grouped.items())}


def _sample_negatives(rng: np.random.Generator, n_items: int, pos_set: set,
                      want: int) -> np.ndarray:
    """`want` distinct item indices outside `pos_set` (rejection sampling)."""
    want = min(want, n_items - len(pos_set))
    if want <= 0:
        return np.empty(0, dtype=int)
    out: set = set()
    while len(out) < want:
        draws = rng.integers(0, n_items, size=2 * (want - len(out)) + 8)
        for item in draws.tolist():
            if item not in pos_set and item not in out:
                out.add(item)
                if len(out) == want:
                    break
    return np.array(sorted(out), dtype=int)


@dataclass
class ListwiseTrainConfig:
    d: int = 32
    epochs: int = 60
    lr: float = 0.005
    neg_policy: object = SampledNegatives(ratio=4.0)
    seed: int = 0


def train_listwise(positives: Iterable[tuple[int, int]], n_users: int, n_items: int,
                   config: ListwiseTrainConfig,
                   auc_probe: Callable[[MFParams], float] | None = None
                   ) -> tuple[MFParams, list[EpochStats]]:
    """Optimize the factors with the per-user listwise criterion under Adam.

    One training instance per user per epoch: their full positive list
    against a negative list drawn by `neg_policy` (resampled every epoch).
    The trace records the per-epoch class means/variances and loss, plus the
    `auc_probe` value when a probe is supplied.
    """
    grouped = _group_by_user(positives)
    params = init_params(n_users, n_items, config.d, config.seed)
    if config.epochs == 0 or not grouped:
        return params, []
    state = adam_init(params.param_dict(), lr=config.lr)
    users = np.array(sorted(grouped), dtype=int)
    trace = []
    for epoch in range(1, config.epochs + 1):
        epoch_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 200, epoch)))
        order = epoch_rng.permutation(len(users))
        sums = np.zeros(5)  # loss, mean_pos, mean_neg, var_pos, var_neg
        for slot in order:
            user = int(users[slot])
            pos_items = grouped[user]
            pos_set = set(pos_items.tolist())
            if isinstance(config.neg_policy, FullNegatives):
                neg_items = np.setdiff1d(np.arange(n_items), pos_items)
            elif isinstance(config.neg_policy, SampledNegatives):
                neg_rng = np.random.default_rng(
                    np.random.SeedSequence((config.seed, 300, epoch, user,
                                            config.neg_policy.seed)))
                want = int(config.neg_policy.ratio * len(pos_items))
                neg_items = _sample_negatives(neg_rng, n_items, pos_set, want)
            else:
                raise TypeError(f"unknown negative policy {config.neg_policy!r}")
            if neg_items.size == 0:
                continue

            w = params.user_factors[user]
            pos_ratings = params.item_factors[pos_items] @ w
            neg_ratings = params.item_factors[neg_items] @ w
            d_pos, d_neg = listwise_grad(pos_ratings, neg_ratings)

            grads = {"user_factors": np.zeros_like(params.user_factors),
                     "item_factors": np.zeros_like(params.item_factors)}
            grads["user_factors"][user] = (d_pos @ params.item_factors[pos_items]
                                           + d_neg @ params.item_factors[neg_items])
            grads["item_factors"][pos_items] += np.outer(d_pos, w)
            grads["item_factors"][neg_items] += np.outer(d_neg, w)
            adam_step(params.param_dict(), grads, state)

            pos_stats = class_stats(pos_ratings)
            neg_stats = class_stats(neg_ratings)
            sums += (listwise_loss(pos_ratings, neg_ratings), pos_stats.mean,
                     neg_stats.mean, pos_stats.variance, neg_stats.variance)
        means = sums / len(order)
        trace.append(EpochStats(epoch=epoch, loss=means[0], mean_pos=means[1],
                                mean_neg=means[2], var_pos=means[3], var_neg=means[4],
                                auc=auc_probe(params) if auc_probe else None))
    return params, trace


@dataclass
class PointwiseTrainConfig:
    d: int = 32
    epochs: int = 60
    lr: float = 0.005
    neg_ratio: int = 4
    seed: int = 0
    batch_size: int = 1024


def train_pointwise(positives: Iterable[tuple[int, int]], n_users: int, n_items: int,
                    config: PointwiseTrainConfig) -> MFParams:
    """Squared-error regression on targets 1 (positives) / 0 (sampled negatives)."""
    grouped = _group_by_user(positives)
    params = init_params(n_users, n_items, config.d, config.seed)
    if config.epochs == 0 or not grouped:
        return params
    state = adam_init(params.param_dict(), lr=config.lr)
    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, 400, epoch)))
        u_col, i_col, targets = [], [], []
        for user in sorted(grouped):
            pos_items = grouped[user]
            negs = _sample_negatives(rng, n_items, set(pos_items.tolist()),
                                     config.neg_ratio * len(pos_items))
            u_col.append(np.full(len(pos_items) + len(negs), user))
            i_col.append(np.concatenate([pos_items, negs]))
            targets.append(np.concatenate([np.ones(len(pos_items)), np.zeros(len(negs))]))
        u_all = np.concatenate(u_col)
        i_all = np.concatenate(i_col)
        t_all = np.concatenate(targets)
        order = rng.permutation(u_all.size)
        for start in range(0, u_all.size, config.batch_size):
            batch = order[start:start + config.batch_size]
            ub, ib, tb = u_all[batch], i_all[batch], t_all[batch]
            wu = params.user_factors[ub]
            hi = params.item_factors[ib]
            err = 2.0 * ((wu * hi).sum(axis=1) - tb) / batch.size
            grads = {"user_factors": np.zeros_like(params.user_factors),
                     "item_factors": np.zeros_like(params.item_factors)}
            np.add.at(grads["user_factors"], ub, err[:, None] * hi)
            np.add.at(grads["item_factors"], ib, err[:, None] * wu)
            adam_step(params.param_dict(), grads, state)
    return params


@dataclass
class BPRTrainConfig:
    d: int = 32
    epochs: int = 60
    lr: float = 0.005
    samples_per_epoch: int | None = None  # defaults to |positives|
    weight_decay: float = 0.01
    seed: int = 0
    batch_size: int = 1024


def bpr_triplet_loss(pos_score: float, neg_score: float) -> float:
    """-ln sigmoid(pos - neg), the per-triplet ordering loss (without decay)."""
    return float(np.log1p(np.exp(-(pos_score - neg_score))))


def train_bpr(positives: Iterable[tuple[int, int]], n_users: int, n_items: int,
              config: BPRTrainConfig) -> MFParams:
    """Pairwise ranking: per triplet (u, i, j) minimize -ln sigma(r_ui - r_uj)
    with L2 weight decay on the touched factors."""
    grouped = _group_by_user(positives)
    params = init_params(n_users, n_items, config.d, config.seed)
    if config.epochs == 0 or not grouped:
        return params
    state = adam_init(params.param_dict(), lr=config.lr)
    pairs = np.array([(u, i) for u in sorted(grouped) for i in grouped[u].tolist()],
                     dtype=int)
    n_samples = config.samples_per_epoch or len(pairs)
    pos_sets = {u: set(items.tolist()) for u, items in grouped.items()}
    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, 500, epoch)))
        picks = rng.integers(0, len(pairs), size=n_samples) if n_samples != len(pairs) \
            else rng.permutation(len(pairs))
        users = pairs[picks, 0]
        pos_items = pairs[picks, 1]
        neg_items = rng.integers(0, n_items, size=n_samples)
        for idx in range(n_samples):  # resample collisions with the user's positives
            while int(neg_items[idx]) in pos_sets[int(users[idx])]:
                neg_items[idx] = rng.integers(0, n_items)
        for start in range(0, n_samples, config.batch_size):
            ub = users[start:start + config.batch_size]
            ib = pos_items[start:start + config.batch_size]
            jb = neg_items[start:start + config.batch_size]
            wu = params.user_factors[ub]
            hi = params.item_factors[ib]
            hj = params.item_factors[jb]
            x = ((wu * hi).sum(axis=1) - (wu * hj).sum(axis=1))
            coeff = (1.0 / (1.0 + np.exp(-x)) - 1.0)[:, None] / ub.size
            decay = 2.0 * config.weight_decay / ub.size
            grads = {"user_factors": np.zeros_like(params.user_factors),
                     "item_factors": np.zeros_like(params.item_factors)}
            np.add.at(grads["user_factors"], ub, coeff * (hi - hj) + decay * wu)
            np.add.at(grads["item_factors"], ib, coeff * wu + decay * hi)
            np.add.at(grads["item_factors"], jb, -coeff * wu + decay * hj)
            adam_step(params.param_dict(), grads, state)
    return params


def pop_scores(train: Iterable[Interaction]) -> Counter:
    """Item -> interaction count; the same ranking is served to every user."""
    counts: Counter = Counter()
    for record in train:
        counts[record.item_id] += 1
    return counts


def timepop_scores(train: Iterable[Interaction], grid: IntervalGrid,
                   interval: int) -> Counter:
    """Popularity counted inside a single interval only."""
    if not 1 <= interval <= grid.count:
        raise ValueError(f"interval {interval} outside grid [1, {grid.count}]")
    counts: Counter = Counter()
    for record in train:
        if interval_of(grid, record.timestamp) == interval:
            counts[record.item_id] += 1
    return counts
