"""Experiment drivers: dataset directories, training runs, and evaluations.

A dataset directory holds the delimited artifacts (`interactions.csv`,
plus `snapshots.csv`, `users.csv`, `item_topics.csv` and `dataset.json`
for cross-network data). A run directory holds the effective config echo,
a checkpoint, traces, and reports. Everything in between lives here, so
the CLI stays a thin argument layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from . import data as D
from . import metrics as M
from . import mf
from .config import config_digest
from .crossnet import (ABLATION_VARIANTS, CrossNetConfig, CrossNetModel,
                       EpochLosses, ablation_masks, train_epoch)
from .nn import adam_init, forward
from .synth import SynthDataset

DATASET_MANIFEST = "dataset.json"


# ---------------------------------------------------------------------------
# dataset directories


def write_interactions_dataset(directory, interactions: list[D.Interaction],
                               source_format: str) -> dict:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    D.save_interactions(directory / "interactions.csv", interactions)
    users = {r.user_id for r in interactions}
    items = {r.item_id for r in interactions}
    pairs = {(r.user_id, r.item_id) for r in interactions}
    manifest = {
        "kind": "interactions",
        "source_format": source_format,
        "users": len(users),
        "items": len(items),
        "events": len(interactions),
        "distinct_pairs": len(pairs),
        "sparsity": 1.0 - len(pairs) / (len(users) * len(items)),
    }
    with (directory / DATASET_MANIFEST).open("w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return manifest


def write_synth_dataset(dataset: SynthDataset, directory) -> dict:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    D.save_interactions(directory / "interactions.csv", dataset.interactions)
    D.save_snapshots(directory / "snapshots.csv", dataset.snapshots)
    D.save_user_kinds(directory / "users.csv", dataset.kinds)
    D.save_item_topics(directory / "item_topics.csv",
                       {i: dataset.item_topics[i] for i in range(dataset.item_topics.shape[0])})
    cfg = dataset.config
    config_map = {
        "users": cfg.users, "items": cfg.items, "topics": cfg.topics,
        "intervals": cfg.intervals, "new_user_fraction": cfg.new_user_fraction,
        "base_sparsity": cfg.base_sparsity,
        "outlier_intervals": sorted(cfg.outlier_intervals),
        "outlier_strength": cfg.outlier_strength, "drift_rate": cfg.drift_rate,
        "seed": cfg.seed,
    }
    manifest = {
        "kind": "cross-network-synthetic",
        "config": config_map,
        "config_digest": config_digest({k: v for k, v in config_map.items()}),
        "grid": {"origin": dataset.grid.origin,
                 "granularity": dataset.grid.granularity.value,
                 "count": dataset.grid.count},
        "topics": cfg.topics,
        "events": len(dataset.interactions),
    }
    with (directory / DATASET_MANIFEST).open("w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return manifest


@dataclass
class CrossData:
    grid: D.IntervalGrid
    n_topics: int
    kinds: dict
    records: dict
    interactions: list[D.Interaction]
    item_topics: dict
    catalog: list
    manifest: dict


def load_cross_dataset(directory) -> CrossData:
    directory = Path(directory)
    manifest_path = directory / DATASET_MANIFEST
    if not manifest_path.exists():
        raise FileNotFoundError(f"no dataset manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("kind") != "cross-network-synthetic":
        raise ValueError(f"{directory} is not a cross-network dataset")
    grid = D.IntervalGrid(origin=manifest["grid"]["origin"],
                          granularity=D.Granularity(manifest["grid"]["granularity"]),
                          count=manifest["grid"]["count"])
    interactions = D.load_interactions(directory / "interactions.csv")
    snapshots, n_topics = D.load_snapshots(directory / "snapshots.csv")
    kinds = D.load_user_kinds(directory / "users.csv")
    item_topics = D.load_item_topics(directory / "item_topics.csv")
    records = D.build_user_records(snapshots, kinds, grid.count, n_topics)
    return CrossData(grid=grid, n_topics=n_topics, kinds=kinds, records=records,
                     interactions=interactions, item_topics=item_topics,
                     catalog=sorted(item_topics, key=str), manifest=manifest)


def load_interactions_dataset(directory_or_file) -> list[D.Interaction]:
    path = Path(directory_or_file)
    if path.is_dir():
        path = path / "interactions.csv"
    return D.load_interactions(path)


# ---------------------------------------------------------------------------
# matrix-factorization protocol (random pair holdout)


@dataclass
class MFContext:
    users: list
    items: list
    split: D.HoldoutSplit
    train_pairs: list[tuple[int, int]]
    test_pos: dict[int, list[int]]     # user row -> test-positive item rows
    test_neg: dict[int, list[int]]     # user row -> sampled never-interacted rows
    train_seen: dict[int, set]
    train_interactions: list[D.Interaction]


def prepare_mf_context(interactions: list[D.Interaction], fraction: float,
                       seed: int) -> MFContext:
    split = D.random_holdout(interactions, fraction, seed)
    u_row = {u: i for i, u in enumerate(split.users)}
    i_row = {it: j for j, it in enumerate(split.items)}
    train_pairs = [(u_row[r.user_id], i_row[r.item_id]) for r in split.train]
    test_pos: dict[int, list[int]] = {}
    for r in split.test_positives:
        test_pos.setdefault(u_row[r.user_id], []).append(i_row[r.item_id])
    test_neg: dict[int, list[int]] = {}
    for user, item in split.test_negatives:
        test_neg.setdefault(u_row[user], []).append(i_row[item])
    train_seen: dict[int, set] = {}
    for u, i in train_pairs:
        train_seen.setdefault(u, set()).add(i)
    return MFContext(users=split.users, items=split.items, split=split,
                     train_pairs=train_pairs, test_pos=test_pos, test_neg=test_neg,
                     train_seen=train_seen, train_interactions=split.train)


def mf_auc_probe(context: MFContext) -> Callable[[mf.MFParams], float]:
    """Mean per-user test AUC, for per-epoch traces."""
    def probe(params: mf.MFParams) -> float:
        scores = params.user_factors @ params.item_factors.T
        values = []
        for user in sorted(context.test_pos):
            negs = context.test_neg.get(user, [])
            if not negs:
                continue
            values.append(M.auc_user(scores[user, context.test_pos[user]],
                                     scores[user, negs]))
        return float(np.mean(values)) if values else float("nan")
    return probe


def score_matrix_for(model_name: str, tensors: Mapping[str, np.ndarray],
                     context: MFContext) -> np.ndarray:
    """(n_users, n_items) score matrix for any of the MF-protocol models."""
    n_users, n_items = len(context.users), len(context.items)
    if model_name in ("mf-listwise", "mf-pointwise", "mf-bpr"):
        return tensors["user_factors"] @ tensors["item_factors"].T
    if model_name in ("pop", "timepop"):
        row = np.zeros(n_items)
        lookup = {it: idx for idx, it in enumerate(tensors["item_ids"].tolist())}
        for j, item in enumerate(context.items):
            if item in lookup:
                row[j] = tensors["scores"][lookup[item]]
        return np.tile(row, (n_users, 1))
    raise ValueError(f"unknown model {model_name!r}")


def evaluate_mf(model_name: str, tensors: Mapping[str, np.ndarray],
                context: MFContext, metric_names: Iterable[str], top_k: int = 10,
                item_vectors: Mapping | None = None) -> M.EvalReport:
    scores = score_matrix_for(model_name, tensors, context)
    report = M.EvalReport()
    metric_names = list(metric_names)

    rec_lists: dict = {}
    eligible = sorted(context.test_pos)
    for user in eligible:
        row = {item: float(scores[user, j]) for j, item in enumerate(context.items)}
        exclude = {context.items[j] for j in context.train_seen.get(user, set())}
        rec_lists[context.users[user]] = M.top_n(row, top_k, exclude=exclude)

    if "auc" in metric_names:
        values, excluded = {}, 0
        for user in eligible:
            negs = context.test_neg.get(user, [])
            if not negs:
                excluded += 1
                continue
            values[context.users[user]] = M.auc_user(scores[user, context.test_pos[user]],
                                                     scores[user, negs])
        report.add_metric("auc", values, excluded)
    if "hr" in metric_names:
        values = {}
        for user in eligible:
            positives = {context.items[j] for j in context.test_pos[user]}
            values[context.users[user]] = M.hit_ratio(
                rec_lists[context.users[user]], positives, top_k)
        report.add_metric(f"hr@{top_k}", values, 0)
    if "novelty" in metric_names:
        counts = mf.pop_scores(context.train_interactions)
        report.add_scalar("novelty", M.novelty(rec_lists, counts))
    if "diversity" in metric_names:
        if item_vectors is None:
            raise ValueError("diversity requested but the dataset has no item "
                             "topic vectors")
        report.add_scalar("diversity", M.diversity(rec_lists, item_vectors))
    unknown = set(metric_names) - {"auc", "hr", "novelty", "diversity"}
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    return report


def train_mf_model(model_name: str, interactions: list[D.Interaction],
                   options: Mapping, trace_auc: bool = True):
    """Train one MF-protocol model; returns (tensors, trace, context)."""
    fraction = float(options.get("holdout_fraction", 0.1))
    seed = int(options.get("seed", 0))
    context = prepare_mf_context(interactions, fraction, seed)
    n_users, n_items = len(context.users), len(context.items)
    d = int(options.get("d", 32))
    epochs = int(options.get("epochs", 60))
    lr = float(options.get("lr", 0.005))
    trace: list[mf.EpochStats] = []

    if model_name == "mf-listwise":
        cfg = mf.ListwiseTrainConfig(
            d=d, epochs=epochs, lr=lr, seed=seed,
            neg_policy=D.SampledNegatives(ratio=float(options.get("neg_ratio", 4))))
        probe = mf_auc_probe(context) if trace_auc else None
        params, trace = mf.train_listwise(context.train_pairs, n_users, n_items,
                                          cfg, auc_probe=probe)
        tensors = {"user_factors": params.user_factors,
                   "item_factors": params.item_factors}
    elif model_name == "mf-pointwise":
        cfg = mf.PointwiseTrainConfig(d=d, epochs=epochs, lr=lr, seed=seed,
                                      neg_ratio=int(options.get("neg_ratio", 4)))
        params = mf.train_pointwise(context.train_pairs, n_users, n_items, cfg)
        tensors = {"user_factors": params.user_factors,
                   "item_factors": params.item_factors}
    elif model_name == "mf-bpr":
        cfg = mf.BPRTrainConfig(d=d, epochs=epochs, lr=lr, seed=seed,
                                weight_decay=float(options.get("weight_decay", 0.01)))
        params = mf.train_bpr(context.train_pairs, n_users, n_items, cfg)
        tensors = {"user_factors": params.user_factors,
                   "item_factors": params.item_factors}
    elif model_name in ("pop", "timepop"):
        if model_name == "pop":
            counts = mf.pop_scores(context.train_interactions)
        else:
            granularity = D.Granularity(str(options.get("granularity", "biweekly")))
            grid = D.grid_from_interactions(context.train_interactions, granularity)
            counts = mf.timepop_scores(context.train_interactions, grid, grid.count)
        items = sorted(counts, key=str)
        tensors = {"item_ids": np.array(items),
                   "scores": np.array([float(counts[i]) for i in items])}
    else:
        raise ValueError(f"unknown model {model_name!r}")
    return tensors, trace, context


# ---------------------------------------------------------------------------
# cross-network protocol (temporal split, incremental updates)


def build_instances_for(dataset: CrossData, target_intervals: Iterable[int],
                        neg_policy) -> list[D.ListwiseInstance]:
    """Listwise instances labeled by target-network ground truth at t+1."""
    buckets = D.slice_intervals(dataset.interactions, dataset.grid)
    instances: list[D.ListwiseInstance] = []
    for target in target_intervals:
        if target < 2:
            continue
        positives = D.positives_at(buckets, target, D.Network.TARGET)
        built, _ = D.build_listwise_instances(positives, target, dataset.catalog,
                                              neg_policy)
        instances.extend(built)
    return instances


def crossnet_config_from(dataset: CrossData, options: Mapping) -> CrossNetConfig:
    return CrossNetConfig(
        n_topics=dataset.n_topics,
        embed_dim=int(options.get("embed_dim", 32)),
        item_dim=int(options.get("item_dim", 32)),
        user_dim=int(options.get("user_dim", 16)),
        dropout=float(options.get("dropout", 0.3)),
        seed=int(options.get("seed", 0)),
        normalize_history=bool(options.get("normalize_history", False)),
        **ablation_masks(str(options.get("variant", "full"))),
    )


def train_crossnet_model(dataset: CrossData, options: Mapping
                         ) -> tuple[CrossNetModel, list[EpochLosses]]:
    config = crossnet_config_from(dataset, options)
    train_n = int(options["train_intervals"])
    test_m = int(options.get("test_intervals", 1))
    D.temporal_split(dataset.grid, train_n, test_m)  # validates the window
    seed = int(options.get("seed", 0))
    policy = D.SampledNegatives(ratio=float(options.get("neg_ratio", 4)), seed=seed)
    instances = build_instances_for(dataset, range(2, train_n + 1), policy)
    if not instances:
        raise ValueError("no training instances inside the training window")
    existing = [u for u, kind in dataset.kinds.items() if kind is D.UserKind.EXISTING]
    model = CrossNetModel(config, existing, dataset.catalog)
    state = adam_init(model.params(), lr=float(options.get("lr", 0.001)))
    losses = []
    for epoch in range(1, int(options.get("epochs", 60)) + 1):
        losses.append(train_epoch(model, instances, dataset.records, state,
                                  epoch, seed=seed))
    return model, losses


@dataclass
class CrossEvalResult:
    report: M.EvalReport
    per_kind_hr: dict[str, float] = field(default_factory=dict)


def evaluate_crossnet_model(model: CrossNetModel, dataset: CrossData,
                            options: Mapping,
                            metric_names: Iterable[str] = ("hr", "auc", "novelty",
                                                           "diversity"),
                            ) -> CrossEvalResult:
    """Rolling evaluation over the test window.

    Each test interval t+1 is scored with preferences computed at the end of
    t; after scoring, its ground truth joins the training stream and the
    model takes `incremental_epochs` additional passes before the next
    interval.
    """
    metric_names = list(metric_names)
    train_n = int(options["train_intervals"])
    test_m = int(options.get("test_intervals", 1))
    _, test_intervals = D.temporal_split(dataset.grid, train_n, test_m)
    seed = int(options.get("seed", 0))
    top_k = int(options.get("top_k", 10))
    incremental = int(options.get("incremental_epochs", 5))
    policy = D.SampledNegatives(ratio=float(options.get("neg_ratio", 4)), seed=seed)
    buckets = D.slice_intervals(dataset.interactions, dataset.grid)

    hr_values: dict = {}
    auc_values: dict = {}
    auc_excluded = 0
    rec_lists: dict = {}
    kind_hr: dict[str, list[float]] = {"new": [], "existing": []}
    state = adam_init(model.params(), lr=float(options.get("lr", 0.001)))

    target_by_interval: dict[int, dict] = {}
    for interval, bucket in buckets.items():
        per_user: dict = {}
        for r in bucket:
            if r.network is D.Network.TARGET:
                per_user.setdefault(r.user_id, set()).add(r.item_id)
        target_by_interval[interval] = per_user

    def seen_upto(user, upto: int) -> set:
        out: set = set()
        for interval in range(1, upto + 1):
            out |= target_by_interval.get(interval, {}).get(user, set())
        return out

    for round_idx, target in enumerate(test_intervals):
        upto = target - 1
        positives = D.positives_at(buckets, target, D.Network.TARGET)
        for user in sorted(positives, key=str):
            if user not in dataset.records or not positives[user]:
                continue
            record = dataset.records[user]
            seen: set = set()
            if record.kind is D.UserKind.EXISTING:
                seen = seen_upto(user, upto)
            scores = model.score_items(record, upto)
            ranked = M.top_n(scores, top_k, exclude=seen)
            rec_lists[user] = ranked
            hr = M.hit_ratio(ranked, positives[user], top_k)
            hr_values.setdefault(user, []).append(hr)
            kind_hr[record.kind.value].append(hr)
            if "auc" in metric_names:
                neg_ids = [it for it in dataset.catalog
                           if it not in positives[user] and it not in seen]
                if not neg_ids:
                    auc_excluded += 1
                else:
                    pos_scores = [scores[it] for it in sorted(positives[user], key=str)]
                    neg_scores = [scores[it] for it in neg_ids]
                    auc_values.setdefault(user, []).append(
                        M.auc_user(pos_scores, neg_scores))
        # ground truth for this interval now joins the training stream
        if round_idx + 1 < len(test_intervals) and incremental > 0:
            fresh = build_instances_for(dataset, range(2, target + 1), policy)
            for extra in range(1, incremental + 1):
                train_epoch(model, fresh, dataset.records, state,
                            epoch=10_000 + 100 * round_idx + extra, seed=seed)

    report = M.EvalReport()
    if "hr" in metric_names:
        report.add_metric(f"hr@{top_k}", {u: float(np.mean(v)) for u, v in hr_values.items()}, 0)
    if "auc" in metric_names:
        report.add_metric("auc", {u: float(np.mean(v)) for u, v in auc_values.items()},
                          auc_excluded)
    if "novelty" in metric_names and rec_lists:
        counts = mf.pop_scores([r for r in dataset.interactions
                                if r.network is D.Network.TARGET
                                and D.interval_of(dataset.grid, r.timestamp) <= train_n])
        report.add_scalar("novelty", M.novelty(rec_lists, counts))
    if "diversity" in metric_names and rec_lists:
        report.add_scalar("diversity", M.diversity(rec_lists, dataset.item_topics))
    unknown = set(metric_names) - {"auc", "hr", "novelty", "diversity"}
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")

    result = CrossEvalResult(report=report)
    for kind, values in kind_hr.items():
        if values:
            result.per_kind_hr[kind] = float(np.mean(values))
    return result


def attention_self_scores(model: CrossNetModel, dataset: CrossData,
                          intervals: Iterable[int]) -> np.ndarray:
    """phi(s, s) over every active short-term vector in `intervals`.

    Active means the underlying snapshot has non-zero activity; these are the
    held-out vectors the self-match contract is checked on.
    """
    values = []
    wanted = set(intervals)
    for user in sorted(dataset.records, key=str):
        record = dataset.records[user]
        streams = {D.Network.SOURCE: record.source_stream}
        if record.target_stream is not None:
            streams[D.Network.TARGET] = record.target_stream
        for network, stream in streams.items():
            table = model.table.for_network(network)
            head = model.att_src if network is D.Network.SOURCE else model.att_tgt
            for interval in sorted(wanted):
                if interval > stream.shape[0]:
                    continue
                x = stream[interval - 1]
                if not np.any(x):
                    continue
                s = x @ table
                out, _ = forward(head, np.concatenate([s, s]))
                values.append(float(out[0]))
    return np.array(values)


def run_ablation(dataset: CrossData, options: Mapping, seeds: Iterable[int]
                 ) -> dict[str, dict[str, float]]:
    """Train + evaluate every variant per seed; mean HR per variant and kind."""
    table: dict[str, dict[str, list[float]]] = {
        v: {"overall": [], "new": [], "existing": []} for v in ABLATION_VARIANTS}
    for seed in seeds:
        for variant in ABLATION_VARIANTS:
            opts = dict(options)
            opts["variant"] = variant
            opts["seed"] = int(seed)
            model, _ = train_crossnet_model(dataset, opts)
            result = evaluate_crossnet_model(model, dataset, opts,
                                             metric_names=("hr",))
            top_k = int(opts.get("top_k", 10))
            table[variant]["overall"].append(result.report.summary[f"hr@{top_k}"])
            for kind in ("new", "existing"):
                if kind in result.per_kind_hr:
                    table[variant][kind].append(result.per_kind_hr[kind])
    return {variant: {kind: float(np.mean(vals)) for kind, vals in row.items() if vals}
            for variant, row in table.items()}
