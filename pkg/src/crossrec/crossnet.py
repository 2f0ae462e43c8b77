"""Time-aware cross-network recommender.

Per user and interval the model embeds topical activity snapshots, extracts
three temporal preference levels (short: latest interval; long: sum of all
past intervals; long-short: attention-weighted sum of past intervals that
suppresses outlier intervals), integrates them (direct sum for new users, a
neural combiner plus a per-user embedding for existing users), and scores
items with a neural rating head. Training minimizes the listwise
mean/variance criterion plus an attention self-match loss, per instance,
under Adam. All gradients are hand-derived; `instance_loss` exposes the
exact (loss, grads) pair so the whole model is finite-difference checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .data import ListwiseInstance, Network, UserKind, UserRecord
from .listwise import attention_loss, attention_loss_grad, listwise_grad, listwise_loss
from .nn import (DenseNet, adam_step, backward, dense_grads_to_dict, forward,
                 init_dense)

ABLATION_VARIANTS = ("full", "no-short", "no-long", "no-longshort", "no-temporal")

_MASKS = {
    "full": (1.0, 1.0, 1.0),
    "no-short": (0.0, 1.0, 1.0),
    "no-long": (1.0, 0.0, 1.0),
    "no-longshort": (1.0, 1.0, 0.0),
    "no-temporal": (0.0, 0.0, 0.0),
}


@dataclass(frozen=True)
class CrossNetConfig:
    n_topics: int
    embed_dim: int = 32      # k, per-network preference width
    item_dim: int = 32       # D, item embedding width
    user_dim: int = 16       # D', existing-user embedding width
    dropout: float = 0.3
    seed: int = 0
    # hidden sizing: vector-output combiner follows the 2 x output rule;
    # scalar-output heads use 2 x input (the literal rule would give 2 units)
    attention_hidden: int | None = None
    integration_hidden: int | None = None
    rating_hidden: int | None = None
    normalize_history: bool = False  # mean- instead of sum-pool past intervals
    mask_short: float = 1.0
    mask_long: float = 1.0
    mask_long_short: float = 1.0


@dataclass
class TopicEmbeddingTable:
    """Independent per-network topic vectors, one row per topic."""
    source: np.ndarray  # (n_topics, k)
    target: np.ndarray  # (n_topics, k)

    def for_network(self, network: Network) -> np.ndarray:
        return self.source if network is Network.SOURCE else self.target


@dataclass
class PreferenceBundle:
    short: np.ndarray
    long: np.ndarray
    long_short: np.ndarray
    short_term_cache: np.ndarray  # (t, k) rows s^1..s^t


def ablation_masks(variant: str) -> dict[str, float]:
    if variant not in _MASKS:
        raise ValueError(f"unknown ablation variant {variant!r}; "
                         f"choose from {ABLATION_VARIANTS}")
    short, long_, long_short = _MASKS[variant]
    return {"mask_short": short, "mask_long": long_, "mask_long_short": long_short}


def ablate(variant: str):
    """Model constructor with the variant's preference components zeroed out."""
    masks = ablation_masks(variant)

    def build(config: CrossNetConfig, existing_users: Iterable, items: Iterable):
        return CrossNetModel(replace(config, **masks), existing_users, items)

    return build


# ---------------------------------------------------------------------------
# preference-extraction primitives


def embed_interval(snapshot, table: TopicEmbeddingTable, network: Network) -> list[np.ndarray]:
    """One f * v embedding per non-zero-frequency topic, in topic index order."""
    freqs = np.asarray(snapshot.frequencies, dtype=float)
    vectors = table.for_network(network)
    if freqs.shape[0] != vectors.shape[0]:
        raise ValueError(f"snapshot has {freqs.shape[0]} topics, table {vectors.shape[0]}")
    active = np.nonzero(freqs)[0]
    return [freqs[c] * vectors[c] for c in active]


def short_term(embeddings: Iterable[np.ndarray], dim: int | None = None) -> np.ndarray:
    """Componentwise sum of an interval's topic embeddings; empty sums to zero."""
    embeddings = [np.asarray(e, dtype=float) for e in embeddings]
    if not embeddings:
        if dim is None:
            raise ValueError("empty embedding list needs an explicit dim")
        return np.zeros(dim)
    widths = {e.shape[0] for e in embeddings}
    if len(widths) != 1:
        raise ValueError(f"mixed embedding dimensionalities {sorted(widths)}")
    return np.sum(embeddings, axis=0)


def long_term(history: Iterable[np.ndarray], dim: int | None = None) -> np.ndarray:
    """Sum of cached short-term vectors over intervals before the current one."""
    history = [np.asarray(s, dtype=float) for s in history]
    if not history:
        if dim is None:
            raise ValueError("empty history needs an explicit dim")
        return np.zeros(dim)
    return np.sum(history, axis=0)


def attention_scores(current: np.ndarray, history: Iterable[np.ndarray],
                     head: DenseNet) -> np.ndarray:
    """Similarity of the current short-term vector to each past one, in [0, 1].

    Scores are per-pair sigmoid outputs, deliberately not normalized across
    intervals (the self-match target of 1 rules out a softmax).
    """
    current = np.asarray(current, dtype=float)
    history = [np.asarray(s, dtype=float) for s in history]
    if not history:
        return np.zeros(0)
    stacked = np.stack(history)
    batch = np.concatenate([np.tile(current, (stacked.shape[0], 1)), stacked], axis=1)
    out, _ = forward(head, batch)
    return out[:, 0]


def long_short_term(history: Iterable[np.ndarray], scores: np.ndarray,
                    dim: int | None = None) -> np.ndarray:
    """Attention-weighted sum of past short-term vectors."""
    history = [np.asarray(s, dtype=float) for s in history]
    scores = np.asarray(scores, dtype=float)
    if len(history) != scores.shape[0]:
        raise ValueError(f"{len(history)} history vectors vs {scores.shape[0]} scores")
    if not history:
        if dim is None:
            raise ValueError("empty history needs an explicit dim")
        return np.zeros(dim)
    return (scores[:, None] * np.stack(history)).sum(axis=0)


def integrate_new(sp: np.ndarray, lp: np.ndarray, lsp: np.ndarray) -> np.ndarray:
    """Direct sum of the three components (all on the same network space)."""
    sp, lp, lsp = (np.asarray(v, dtype=float) for v in (sp, lp, lsp))
    if not sp.shape == lp.shape == lsp.shape:
        raise ValueError("preference components differ in length")
    return sp + lp + lsp


def integrate_existing(v_e: np.ndarray, sp: np.ndarray, lp: np.ndarray,
                       lsp: np.ndarray, head: DenseNet, train: bool = False,
                       rng: np.random.Generator | None = None) -> np.ndarray:
    """Neural combiner over [v_e; sp; lp; lsp] for cross-network preferences."""
    z = np.concatenate([np.asarray(v, dtype=float) for v in (v_e, sp, lp, lsp)])
    out, _ = forward(head, z, train=train, rng=rng)
    return out


def predict_rating(p: np.ndarray, v_i: np.ndarray, head: DenseNet,
                   train: bool = False,
                   rng: np.random.Generator | None = None) -> float:
    """Sigmoid rating for one (preference, item embedding) pair."""
    x = np.concatenate([np.asarray(p, dtype=float), np.asarray(v_i, dtype=float)])
    out, _ = forward(head, x, train=train, rng=rng)
    return float(out[0])


# ---------------------------------------------------------------------------
# the full model


class CrossNetModel:
    def __init__(self, config: CrossNetConfig, existing_users: Iterable, items: Iterable):
        self.config = config
        self.existing_index = {u: i for i, u in enumerate(sorted(set(existing_users), key=str))}
        self.item_ids = sorted(set(items), key=str)
        if not self.item_ids:
            raise ValueError("empty item catalog")
        self.item_index = {it: i for i, it in enumerate(self.item_ids)}

        k, D, Dp = config.embed_dim, config.item_dim, config.user_dim
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, 11)))
        self.table = TopicEmbeddingTable(
            source=rng.normal(0.0, 0.1, size=(config.n_topics, k)),
            target=rng.normal(0.0, 0.1, size=(config.n_topics, k)))
        self.user_emb = rng.normal(0.0, 0.1, size=(len(self.existing_index), Dp))
        self.item_emb = rng.normal(0.0, 0.1, size=(len(self.item_ids), D))

        att_hidden = config.attention_hidden or 2 * (2 * k)
        int_hidden = config.integration_hidden or 2 * k
        rate_hidden = config.rating_hidden or 2 * (k + D)
        self.att_src = init_dense([2 * k, att_hidden, 1], ["relu", "sigmoid"],
                                  config.dropout, rng)
        self.att_tgt = init_dense([2 * k, att_hidden, 1], ["relu", "sigmoid"],
                                  config.dropout, rng)
        self.integrate = init_dense([Dp + 6 * k, int_hidden, k], ["relu", "identity"],
                                    config.dropout, rng)
        self.rate = init_dense([k + D, rate_hidden, 1], ["relu", "sigmoid"],
                               config.dropout, rng)

    # -- parameters ---------------------------------------------------------

    def params(self) -> dict[str, np.ndarray]:
        out = {"topics.source": self.table.source, "topics.target": self.table.target,
               "users.existing": self.user_emb, "items.embed": self.item_emb}
        out.update(self.att_src.param_dict("att_src"))
        out.update(self.att_tgt.param_dict("att_tgt"))
        out.update(self.integrate.param_dict("integrate"))
        out.update(self.rate.param_dict("rate"))
        return out

    def set_params(self, values: Mapping[str, np.ndarray]) -> None:
        current = self.params()
        for name, value in values.items():
            if name not in current:
                raise KeyError(f"unknown parameter {name!r}")
            if current[name].shape != value.shape:
                raise ValueError(f"shape mismatch for {name!r}")
            current[name][...] = value

    def _networks(self, record: UserRecord) -> list[Network]:
        if record.kind is UserKind.NEW:
            return [Network.SOURCE]
        return [Network.SOURCE, Network.TARGET]

    def _att_head(self, network: Network) -> DenseNet:
        return self.att_src if network is Network.SOURCE else self.att_tgt

    # -- forward ------------------------------------------------------------

    def _forward(self, record: UserRecord, upto: int, item_rows: np.ndarray,
                 train: bool, rng: np.random.Generator | None):
        """Everything needed for prediction and backprop at the end of `upto`.

        History is intervals 1..upto; predictions target interval upto + 1.
        """
        cfg = self.config
        k = cfg.embed_dim
        if upto < 1:
            raise ValueError("need at least one completed interval")
        if record.source_stream.shape[0] < upto:
            raise ValueError(f"user {record.user_id} stream shorter than t={upto}")

        fwd: dict = {"record": record, "upto": upto, "item_rows": item_rows,
                     "networks": self._networks(record), "per_net": {}}
        norm = 1.0 / (upto - 1) if (cfg.normalize_history and upto > 1) else 1.0
        fwd["norm"] = norm

        sp_parts, lp_parts, lsp_parts = [], [], []
        for network in fwd["networks"]:
            stream = (record.source_stream if network is Network.SOURCE
                      else record.target_stream)
            X = stream[:upto]
            S = X @ self.table.for_network(network)      # rows s^1..s^upto
            hist = S[:-1]
            head = self._att_head(network)
            att_in = np.concatenate([np.tile(S[-1], (hist.shape[0], 1)), hist], axis=1)
            att_out, att_cache = forward(head, att_in, train=train, rng=rng)
            alphas = att_out[:, 0]
            dup_in = np.concatenate([S[-1], S[-1]])
            dup_out, dup_cache = forward(head, dup_in, train=train, rng=rng)

            sp = S[-1]
            lp = hist.sum(axis=0) * norm if hist.size else np.zeros(k)
            lsp = ((alphas[:, None] * hist).sum(axis=0) * norm if hist.size
                   else np.zeros(k))
            fwd["per_net"][network] = {"X": X, "S": S, "alphas": alphas,
                                       "att_cache": att_cache,
                                       "dup_score": float(dup_out[0]),
                                       "dup_cache": dup_cache}
            sp_parts.append(sp)
            lp_parts.append(lp)
            lsp_parts.append(lsp)

        sp_cat = np.concatenate(sp_parts)
        lp_cat = np.concatenate(lp_parts)
        lsp_cat = np.concatenate(lsp_parts)
        spm = cfg.mask_short * sp_cat
        lpm = cfg.mask_long * lp_cat
        lspm = cfg.mask_long_short * lsp_cat

        if record.kind is UserKind.NEW:
            p = spm + lpm + lspm
        else:
            v_e = self.user_emb[self.existing_index[record.user_id]]
            z = np.concatenate([v_e, spm, lpm, lspm])
            p, int_cache = forward(self.integrate, z, train=train, rng=rng)
            fwd["int_cache"] = int_cache

        rate_in = np.concatenate([np.tile(p, (item_rows.shape[0], 1)),
                                  self.item_emb[item_rows]], axis=1)
        rate_out, rate_cache = forward(self.rate, rate_in, train=train, rng=rng)
        fwd.update(p=p, rate_cache=rate_cache, ratings=rate_out[:, 0])
        return fwd

    def _backward(self, fwd: dict, d_ratings: np.ndarray,
                  d_dup: Mapping[Network, float]) -> dict[str, np.ndarray]:
        """Backpropagate rating and attention-loss gradients into every parameter."""
        cfg = self.config
        k = cfg.embed_dim
        record: UserRecord = fwd["record"]
        grads = {name: np.zeros_like(arr) for name, arr in self.params().items()}

        rate_grads, d_rate_in = backward(self.rate, fwd["rate_cache"],
                                         d_ratings[:, None])
        for name, g in dense_grads_to_dict(self.rate, rate_grads, "rate").items():
            grads[name] += g
        dp = d_rate_in[:, :k].sum(axis=0)
        np.add.at(grads["items.embed"], fwd["item_rows"], d_rate_in[:, k:])

        if record.kind is UserKind.NEW:
            d_spm = d_lpm = d_lspm = dp
        else:
            int_grads, dz = backward(self.integrate, fwd["int_cache"], dp)
            for name, g in dense_grads_to_dict(self.integrate, int_grads,
                                               "integrate").items():
                grads[name] += g
            Dp = cfg.user_dim
            width = len(fwd["networks"]) * k
            grads["users.existing"][self.existing_index[record.user_id]] += dz[:Dp]
            d_spm = dz[Dp:Dp + width]
            d_lpm = dz[Dp + width:Dp + 2 * width]
            d_lspm = dz[Dp + 2 * width:]

        d_sp_cat = cfg.mask_short * d_spm
        d_lp_cat = cfg.mask_long * d_lpm
        d_lsp_cat = cfg.mask_long_short * d_lspm
        norm = fwd["norm"]

        for slot, network in enumerate(fwd["networks"]):
            net_fwd = fwd["per_net"][network]
            S, X, alphas = net_fwd["S"], net_fwd["X"], net_fwd["alphas"]
            hist = S[:-1]
            head = self._att_head(network)
            prefix = "att_src" if network is Network.SOURCE else "att_tgt"
            d_sp = d_sp_cat[slot * k:(slot + 1) * k]
            d_lp = d_lp_cat[slot * k:(slot + 1) * k]
            d_lsp = d_lsp_cat[slot * k:(slot + 1) * k]

            dS = np.zeros_like(S)
            dS[-1] += d_sp
            if hist.size:
                dS[:-1] += norm * d_lp
                d_lsp_n = norm * d_lsp
                dS[:-1] += alphas[:, None] * d_lsp_n
                d_alpha = hist @ d_lsp_n
                att_grads, d_att_in = backward(head, net_fwd["att_cache"],
                                               d_alpha[:, None])
                for name, g in dense_grads_to_dict(head, att_grads, prefix).items():
                    grads[name] += g
                dS[-1] += d_att_in[:, :k].sum(axis=0)
                dS[:-1] += d_att_in[:, k:]

            dup_grads, d_dup_in = backward(head, net_fwd["dup_cache"],
                                           np.array([d_dup[network]]))
            for name, g in dense_grads_to_dict(head, dup_grads, prefix).items():
                grads[name] += g
            dS[-1] += d_dup_in[:k] + d_dup_in[k:]

            table_key = ("topics.source" if network is Network.SOURCE
                         else "topics.target")
            grads[table_key] += X.T @ dS
        return grads

    # -- public API ---------------------------------------------------------

    def preference_bundle(self, record: UserRecord, upto: int) -> PreferenceBundle:
        """Eval-mode short/long/long-short components at the end of `upto`."""
        rows = np.zeros(0, dtype=int)
        fwd = self._forward(record, upto, rows, train=False, rng=None)
        k = self.config.embed_dim
        sp, lp, lsp = [], [], []
        for network in fwd["networks"]:
            S = fwd["per_net"][network]["S"]
            hist = S[:-1]
            alphas = fwd["per_net"][network]["alphas"]
            sp.append(S[-1])
            lp.append(hist.sum(axis=0) if hist.size else np.zeros(k))
            lsp.append((alphas[:, None] * hist).sum(axis=0) if hist.size else np.zeros(k))
        caches = np.concatenate([fwd["per_net"][n]["S"] for n in fwd["networks"]], axis=1)
        return PreferenceBundle(short=np.concatenate(sp), long=np.concatenate(lp),
                                long_short=np.concatenate(lsp), short_term_cache=caches)

    def user_preference(self, record: UserRecord, upto: int) -> np.ndarray:
        """Eval-mode integrated preference vector p at the end of `upto`."""
        rows = np.zeros(0, dtype=int)
        fwd = self._forward(record, upto, rows, train=False, rng=None)
        return fwd["p"]

    def score_items(self, record: UserRecord, upto: int,
                    items: Iterable | None = None) -> dict:
        """Eval-mode ratings for `items` (default: whole catalog) at t+1."""
        ids = self.item_ids if items is None else list(items)
        rows = np.array([self._item_row(it) for it in ids], dtype=int)
        fwd = self._forward(record, upto, rows, train=False, rng=None)
        return dict(zip(ids, fwd["ratings"].tolist()))

    def _item_row(self, item) -> int:
        try:
            return self.item_index[item]
        except KeyError:
            raise ValueError(f"instance references unknown item {item!r}") from None

    def instance_loss(self, instance: ListwiseInstance, record: UserRecord,
                      train: bool = False, rng: np.random.Generator | None = None
                      ) -> tuple[dict[str, float], dict[str, np.ndarray]]:
        """Total loss components and full parameter gradients for one instance.

        With `train=False` (dropout off) the gradients are exactly the
        derivatives of the returned total, which is what the
        finite-difference checks exercise.
        """
        if instance.target_interval < 2:
            raise ValueError("instances need at least one completed history interval")
        upto = instance.target_interval - 1
        rows = np.array([self._item_row(it) for it in
                         list(instance.positives) + list(instance.negatives)], dtype=int)
        fwd = self._forward(record, upto, rows, train=train, rng=rng)

        n_pos = len(instance.positives)
        pos_ratings = fwd["ratings"][:n_pos]
        neg_ratings = fwd["ratings"][n_pos:]
        lw = listwise_loss(pos_ratings, neg_ratings)
        at = sum(attention_loss(fwd["per_net"][n]["dup_score"]) for n in fwd["networks"])

        d_pos, d_neg = listwise_grad(pos_ratings, neg_ratings)
        d_dup = {n: attention_loss_grad(fwd["per_net"][n]["dup_score"])
                 for n in fwd["networks"]}
        grads = self._backward(fwd, np.concatenate([d_pos, d_neg]), d_dup)
        losses = {"listwise": lw, "attention": at, "total": lw + at}
        return losses, grads


@dataclass
class EpochLosses:
    listwise_new: float = 0.0
    attention_new: float = 0.0
    listwise_existing: float = 0.0
    attention_existing: float = 0.0
    n_new: int = 0
    n_existing: int = 0

    @property
    def total(self) -> float:
        return (self.listwise_new + self.attention_new
                + self.listwise_existing + self.attention_existing)


def train_epoch(model: CrossNetModel, instances: list[ListwiseInstance],
                records: Mapping, state, epoch: int, seed: int = 0,
                dropout: bool = True) -> EpochLosses:
    """One pass over all instances, new and existing users interleaved.

    Instances are visited in a seeded shuffled order; each one contributes a
    full forward/backward and an Adam step. Returns the mean loss components
    per user kind.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 20, epoch)))
    order = rng.permutation(len(instances))
    sums = {UserKind.NEW: np.zeros(2), UserKind.EXISTING: np.zeros(2)}
    counts = {UserKind.NEW: 0, UserKind.EXISTING: 0}
    params = model.params()
    for slot in order:
        instance = instances[slot]
        record = records[instance.user_id]
        losses, grads = model.instance_loss(instance, record, train=dropout, rng=rng)
        adam_step(params, grads, state)
        sums[record.kind] += (losses["listwise"], losses["attention"])
        counts[record.kind] += 1
    out = EpochLosses(n_new=counts[UserKind.NEW], n_existing=counts[UserKind.EXISTING])
    if counts[UserKind.NEW]:
        out.listwise_new, out.attention_new = sums[UserKind.NEW] / counts[UserKind.NEW]
    if counts[UserKind.EXISTING]:
        out.listwise_existing, out.attention_existing = (
            sums[UserKind.EXISTING] / counts[UserKind.EXISTING])
    return out
