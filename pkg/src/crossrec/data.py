"""Dataset ingestion, interval slicing, splits, and listwise instance building.

All randomized operations take explicit seeds and iterate entities in sorted
order, so every split and sample is bitwise reproducible.

File formats (all delimiter-separated text with a header):
  interactions  user,item,timestamp,network
  snapshots     user,network,interval,f1..fK   (K fixed per file)
  user kinds    user,kind
MovieLens input is the classic ``UserID::MovieID::Rating::Timestamp`` line
format.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

DAY = 86400


class Network(enum.Enum):
    SOURCE = "source"
    TARGET = "target"


class Granularity(enum.Enum):
    BIWEEKLY = "biweekly"  # fixed 14-day windows from the grid origin
    MONTHLY = "monthly"    # calendar months


class UserKind(enum.Enum):
    NEW = "new"
    EXISTING = "existing"


@dataclass(frozen=True)
class Interaction:
    user_id: int | str
    item_id: int | str
    timestamp: int
    network: Network = Network.TARGET

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")


@dataclass(frozen=True)
class IntervalGrid:
    origin: int
    granularity: Granularity
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("grid needs at least one interval")


@dataclass
class TopicalSnapshot:
    user_id: int | str
    interval: int
    network: Network
    frequencies: np.ndarray

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        if self.frequencies.ndim != 1:
            raise ValueError("frequencies must be a vector")
        if np.any(self.frequencies < 0):
            raise ValueError("frequencies must be non-negative")
        if self.interval < 1:
            raise ValueError("interval indices start at 1")


@dataclass
class UserRecord:
    user_id: int | str
    kind: UserKind
    source_stream: np.ndarray            # (n_intervals, n_topics)
    target_stream: np.ndarray | None     # None for new users

    def __post_init__(self):
        if self.kind is UserKind.NEW and self.target_stream is not None:
            raise ValueError("new users carry no target-network stream")
        if self.kind is UserKind.EXISTING and self.target_stream is None:
            raise ValueError("existing users need a target-network stream")


@dataclass(frozen=True)
class ListwiseInstance:
    user_id: int | str
    target_interval: int
    positives: tuple
    negatives: tuple

    def __post_init__(self):
        if len(self.positives) < 1:
            raise ValueError("instance needs at least one positive")
        if set(self.positives) & set(self.negatives):
            raise ValueError("positives and negatives overlap")


# ---------------------------------------------------------------------------
# negative-list policies


@dataclass(frozen=True)
class FullNegatives:
    """All catalog items the user did not interact with."""


@dataclass(frozen=True)
class SampledNegatives:
    """min(ratio * |positives|, available) sampled negatives per user."""
    ratio: float = 4.0
    seed: int = 0


# ---------------------------------------------------------------------------
# ingestion


def ingest_movielens(path) -> list[Interaction]:
    """Parse a MovieLens ratings file into target-network interactions.

    The explicit rating is validated but dropped; `binarize` is what turns
    repeated events into at-most-one implicit signal per pair.
    """
    path = Path(path)
    interactions = []
    with path.open("r", encoding="latin-1") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 '::' fields, got {len(parts)}")
            try:
                user = int(parts[0])
                item = int(parts[1])
                float(parts[2])  # rating, discarded
                ts = int(parts[3])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            interactions.append(Interaction(user, item, ts, Network.TARGET))
    if not interactions:
        raise ValueError(f"{path}: no records")
    return interactions


def binarize(interactions: Iterable[Interaction]) -> list[Interaction]:
    """Collapse repeated events to one implicit signal per (user, item, network).

    The earliest event of each pair is kept; output is ordered by timestamp.
    """
    ordered = sorted(interactions, key=lambda r: (r.timestamp, str(r.user_id), str(r.item_id)))
    seen = set()
    out = []
    for record in ordered:
        key = (record.user_id, record.item_id, record.network)
        if key not in seen:
            seen.add(key)
            out.append(record)
    return out


# ---------------------------------------------------------------------------
# interval grids


def _month_index(ts: int) -> int:
    from datetime import datetime, timezone

    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    return dt.year * 12 + (dt.month - 1)


def interval_of(grid: IntervalGrid, timestamp: int) -> int:
    """1-based interval index of a timestamp; may fall outside [1, count]."""
    if grid.granularity is Granularity.BIWEEKLY:
        return 1 + (timestamp - grid.origin) // (14 * DAY)
    return 1 + _month_index(timestamp) - _month_index(grid.origin)


def grid_from_interactions(interactions: Iterable[Interaction],
                           granularity: Granularity) -> IntervalGrid:
    """Grid anchored at the earliest event and spanning through the latest."""
    timestamps = [r.timestamp for r in interactions]
    if not timestamps:
        raise ValueError("no interactions to build a grid from")
    origin = min(timestamps)
    probe = IntervalGrid(origin, granularity, count=1)
    return IntervalGrid(origin, granularity, count=interval_of(probe, max(timestamps)))


def slice_intervals(interactions: Iterable[Interaction],
                    grid: IntervalGrid) -> dict[int, list[Interaction]]:
    """Partition interactions by interval; every record lands in exactly one bucket."""
    buckets: dict[int, list[Interaction]] = {}
    offenders = []
    for record in interactions:
        idx = interval_of(grid, record.timestamp)
        if not 1 <= idx <= grid.count:
            offenders.append(record)
            continue
        buckets.setdefault(idx, []).append(record)
    if offenders:
        shown = ", ".join(f"({r.user_id},{r.item_id},ts={r.timestamp})" for r in offenders[:5])
        raise ValueError(f"{len(offenders)} interactions outside the grid span: {shown}")
    return buckets


def temporal_split(grid: IntervalGrid, train_intervals: int,
                   test_intervals: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """First n intervals train, the next m test; training always precedes testing."""
    if train_intervals < 1:
        raise ValueError("empty training window")
    if test_intervals < 1:
        raise ValueError("empty testing window")
    if train_intervals + test_intervals > grid.count:
        raise ValueError(f"train+test = {train_intervals + test_intervals} "
                         f"exceeds grid count {grid.count}")
    train = tuple(range(1, train_intervals + 1))
    test = tuple(range(train_intervals + 1, train_intervals + test_intervals + 1))
    return train, test


# ---------------------------------------------------------------------------
# random holdout (pair-level, for the loss-criterion experiments)


@dataclass
class HoldoutSplit:
    train: list[Interaction]
    test_positives: list[Interaction]
    test_negatives: list[tuple]  # (user_id, item_id) never-interacted pairs
    users: list = field(default_factory=list)
    items: list = field(default_factory=list)


def random_holdout(interactions: Iterable[Interaction], fraction: float,
                   seed: int) -> HoldoutSplit:
    """Hold out floor(fraction * |pairs|) positives and the same fraction of
    never-interacted (user, item) pairs, deterministically under `seed`."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    records = binarize(interactions)
    users = sorted({r.user_id for r in records})
    items = sorted({r.item_id for r in records})
    u_index = {u: i for i, u in enumerate(users)}
    i_index = {it: j for j, it in enumerate(items)}
    n_items = len(items)

    pair_codes = {u_index[r.user_id] * n_items + i_index[r.item_id] for r in records}
    ordered_pairs = sorted(pair_codes)

    rng = np.random.default_rng(seed)
    n_test = int(fraction * len(ordered_pairs))
    picked = rng.choice(len(ordered_pairs), size=n_test, replace=False)
    test_codes = {ordered_pairs[i] for i in picked}

    total_cells = len(users) * n_items
    n_neg = int(fraction * (total_cells - len(ordered_pairs)))
    negatives = set()
    while len(negatives) < n_neg:
        draw = int(rng.integers(0, total_cells))
        if draw not in pair_codes and draw not in negatives:
            negatives.add(draw)

    train, test_pos = [], []
    for record in records:
        code = u_index[record.user_id] * n_items + i_index[record.item_id]
        (test_pos if code in test_codes else train).append(record)
    neg_pairs = [(users[c // n_items], items[c % n_items]) for c in sorted(negatives)]
    return HoldoutSplit(train=train, test_positives=test_pos,
                        test_negatives=neg_pairs, users=users, items=items)


# ---------------------------------------------------------------------------
# listwise instances


def build_listwise_instances(positives_by_user: Mapping, target_interval: int,
                             catalog: Iterable, neg_policy) -> tuple[list[ListwiseInstance], int]:
    """One instance per user with >= 1 interaction at the target interval.

    Negatives come from the catalog minus that user's positives, either in
    full or sampled at `ratio` per positive. Returns (instances, number of
    users skipped for having no positives).
    """
    catalog = sorted(set(catalog))
    if not catalog:
        raise ValueError("empty catalog")
    instances = []
    skipped = 0
    seeds = None
    users = sorted(positives_by_user, key=str)
    if isinstance(neg_policy, SampledNegatives):
        seeds = np.random.SeedSequence(neg_policy.seed).spawn(len(users))
    for order, user in enumerate(users):
        pos_set = set(positives_by_user[user])
        positives = sorted(pos_set)
        if not positives:
            skipped += 1
            continue
        available = [it for it in catalog if it not in pos_set]
        if isinstance(neg_policy, FullNegatives):
            negatives = available
        elif isinstance(neg_policy, SampledNegatives):
            want = min(int(neg_policy.ratio * len(positives)), len(available))
            rng = np.random.default_rng(seeds[order])
            idx = rng.choice(len(available), size=want, replace=False)
            negatives = [available[i] for i in sorted(idx)]
        else:
            raise TypeError(f"unknown negative policy {neg_policy!r}")
        instances.append(ListwiseInstance(user_id=user, target_interval=target_interval,
                                          positives=tuple(positives),
                                          negatives=tuple(negatives)))
    return instances, skipped


def positives_at(buckets: Mapping[int, list[Interaction]], interval: int,
                 network: Network, users: Iterable | None = None) -> dict:
    """user -> set of items interacted at `interval` on `network`.

    With `users` given, every listed user appears (possibly with an empty
    set), which feeds the skip accounting in `build_listwise_instances`.
    """
    out = {u: set() for u in users} if users is not None else {}
    for record in buckets.get(interval, []):
        if record.network is network:
            out.setdefault(record.user_id, set()).add(record.item_id)
    return out


# ---------------------------------------------------------------------------
# new / existing assignment for cross-network runs


def assign_user_kinds(interactions: Iterable[Interaction],
                      new_fraction: float = 0.5) -> tuple[dict, list[Interaction]]:
    """Split users into new/existing by target-network activity.

    Users are sorted ascending by total target-network interaction count
    (ties by id); the first `new_fraction` become new users and their
    target-network history is erased from the returned interaction list.
    """
    if not 0.0 < new_fraction < 1.0:
        raise ValueError("new_fraction must be in (0, 1)")
    records = list(interactions)
    counts: dict = {}
    for record in records:
        counts.setdefault(record.user_id, 0)
        if record.network is Network.TARGET:
            counts[record.user_id] += 1
    ranked = sorted(counts, key=lambda u: (counts[u], str(u)))
    n_new = int(len(ranked) * new_fraction)
    kinds = {u: (UserKind.NEW if rank < n_new else UserKind.EXISTING)
             for rank, u in enumerate(ranked)}
    kept = [r for r in records
            if not (kinds[r.user_id] is UserKind.NEW and r.network is Network.TARGET)]
    return kinds, kept


def build_user_records(snapshots: Iterable[TopicalSnapshot], kinds: Mapping,
                       n_intervals: int, n_topics: int) -> dict:
    """Assemble per-user (n_intervals, n_topics) streams from snapshot rows.

    New users' target-network rows are dropped here, structurally: their
    records never hold a target stream no matter what the input contains.
    """
    source: dict = {}
    target: dict = {}
    for snap in snapshots:
        if snap.frequencies.shape[0] != n_topics:
            raise ValueError(f"snapshot for user {snap.user_id} has "
                             f"{snap.frequencies.shape[0]} topics, expected {n_topics}")
        if not 1 <= snap.interval <= n_intervals:
            raise ValueError(f"snapshot interval {snap.interval} outside [1, {n_intervals}]")
        store = source if snap.network is Network.SOURCE else target
        stream = store.setdefault(snap.user_id, np.zeros((n_intervals, n_topics)))
        stream[snap.interval - 1] += snap.frequencies

    records = {}
    for user in sorted(kinds, key=str):
        kind = kinds[user]
        src = source.get(user, np.zeros((n_intervals, n_topics)))
        if kind is UserKind.NEW:
            records[user] = UserRecord(user, kind, src, None)
        else:
            tgt = target.get(user, np.zeros((n_intervals, n_topics)))
            records[user] = UserRecord(user, kind, src, tgt)
    return records


# ---------------------------------------------------------------------------
# delimited text formats


def _parse_id(token: str):
    try:
        return int(token)
    except ValueError:
        return token


def save_interactions(path, interactions: Iterable[Interaction]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write("user,item,timestamp,network\n")
        for r in interactions:
            handle.write(f"{r.user_id},{r.item_id},{r.timestamp},{r.network.value}\n")


def load_interactions(path) -> list[Interaction]:
    path = Path(path)
    out = []
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline().strip()
        if header != "user,item,timestamp,network":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for lineno, raw in enumerate(handle, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields")
            out.append(Interaction(_parse_id(parts[0]), _parse_id(parts[1]),
                                   int(parts[2]), Network(parts[3])))
    if not out:
        raise ValueError(f"{path}: no records")
    return out


def save_snapshots(path, snapshots: Iterable[TopicalSnapshot]) -> None:
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("no snapshots to save")
    n_topics = snapshots[0].frequencies.shape[0]
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        cols = ",".join(f"f{i + 1}" for i in range(n_topics))
        handle.write(f"user,network,interval,{cols}\n")
        for snap in snapshots:
            if snap.frequencies.shape[0] != n_topics:
                raise ValueError("snapshot topic counts differ within one file")
            freqs = ",".join(repr(float(v)) for v in snap.frequencies)
            handle.write(f"{snap.user_id},{snap.network.value},{snap.interval},{freqs}\n")


def load_snapshots(path) -> tuple[list[TopicalSnapshot], int]:
    path = Path(path)
    out = []
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
        if header[:3] != ["user", "network", "interval"]:
            raise ValueError(f"{path}: unexpected header")
        n_topics = len(header) - 3
        if n_topics < 1:
            raise ValueError(f"{path}: header declares no topic columns")
        for lineno, raw in enumerate(handle, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3 + n_topics:
                raise ValueError(f"{path}:{lineno}: expected {3 + n_topics} fields")
            freqs = np.array([float(v) for v in parts[3:]])
            out.append(TopicalSnapshot(_parse_id(parts[0]), int(parts[2]),
                                       Network(parts[1]), freqs))
    return out, n_topics


def save_item_topics(path, item_topics: Mapping) -> None:
    """Write per-item topic vectors as `item,f1..fK` rows."""
    items = sorted(item_topics, key=str)
    if not items:
        raise ValueError("no item topic vectors to save")
    n_topics = len(np.asarray(item_topics[items[0]]))
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        cols = ",".join(f"f{i + 1}" for i in range(n_topics))
        handle.write(f"item,{cols}\n")
        for item in items:
            vec = np.asarray(item_topics[item], dtype=float)
            if vec.shape[0] != n_topics:
                raise ValueError("item topic lengths differ within one file")
            handle.write(f"{item}," + ",".join(repr(float(v)) for v in vec) + "\n")


def load_item_topics(path) -> dict:
    path = Path(path)
    out = {}
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
        if header[:1] != ["item"]:
            raise ValueError(f"{path}: unexpected header")
        n_topics = len(header) - 1
        for lineno, raw in enumerate(handle, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 1 + n_topics:
                raise ValueError(f"{path}:{lineno}: expected {1 + n_topics} fields")
            out[_parse_id(parts[0])] = np.array([float(v) for v in parts[1:]])
    return out


def save_user_kinds(path, kinds: Mapping) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write("user,kind\n")
        for user in sorted(kinds, key=str):
            handle.write(f"{user},{kinds[user].value}\n")


def load_user_kinds(path) -> dict:
    path = Path(path)
    out = {}
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline().strip()
        if header != "user,kind":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for lineno, raw in enumerate(handle, start=2):
            line = raw.strip()
            if not line:
                continue
            user, _, kind = line.partition(",")
            out[_parse_id(user)] = UserKind(kind)
    return out
