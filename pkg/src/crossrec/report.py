"""Report emission: delimited metric/trace tables plus rendered figures.

Every table written here is plain comma-separated text with a header and
repr-formatted floats, so reruns with the same seed produce byte-identical
files. Figures are rendered next to each table as PNG via the Agg backend.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .crossnet import EpochLosses  # noqa: E402
from .metrics import EvalReport  # noqa: E402
from .mf import EpochStats  # noqa: E402

_PNG_META = {"Software": "crossrec"}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(path, header: Sequence[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# evaluation reports


def write_per_user_metrics(path, report: EvalReport) -> None:
    rows = []
    for metric in sorted(report.per_user):
        for user, value in report.per_user[metric].items():
            rows.append((user, metric, float(value)))
    write_rows(path, ["user", "metric", "value"], rows)


def write_summary(path, report: EvalReport) -> None:
    rows = []
    for metric in sorted(report.summary):
        rows.append((metric, float(report.summary[metric]),
                     report.included.get(metric, 0), report.excluded.get(metric, 0)))
    write_rows(path, ["metric", "mean", "included_users", "excluded_users"], rows)


def plot_report(path, report: EvalReport, title: str = "evaluation") -> None:
    """Summary bars plus per-user distributions for every per-user metric."""
    per_user = {m: list(v.values()) for m, v in report.per_user.items() if v}
    n_hist = len(per_user)
    fig, axes = plt.subplots(1, 1 + n_hist, figsize=(4 * (1 + n_hist), 3.2))
    axes = [axes] if n_hist == 0 else list(axes.ravel())

    names = sorted(report.summary)
    axes[0].bar(range(len(names)), [report.summary[m] for m in names], color="#4878a8")
    axes[0].set_xticks(range(len(names)))
    axes[0].set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    axes[0].set_title(f"{title}: averages")
    for axis, metric in zip(axes[1:], sorted(per_user)):
        axis.hist(per_user[metric], bins=20, color="#6aa84f")
        axis.set_title(f"{metric} per user")
        axis.set_xlabel(metric)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


# ---------------------------------------------------------------------------
# training traces


def write_mf_trace(path, trace: Sequence[EpochStats]) -> None:
    rows = [(s.epoch, s.loss, s.mean_pos, s.mean_neg, s.var_pos, s.var_neg,
             s.auc if s.auc is not None else None) for s in trace]
    write_rows(path, ["epoch", "loss", "mean_pos", "mean_neg", "var_pos",
                      "var_neg", "auc"], rows)


def plot_mf_trace(path, trace: Sequence[EpochStats], title: str = "training") -> None:
    """Loss curve, class means, class variances, and AUC when recorded."""
    if not trace:
        return
    epochs = [s.epoch for s in trace]
    has_auc = any(s.auc is not None for s in trace)
    n_panels = 3 + int(has_auc)
    fig, axes = plt.subplots(1, n_panels, figsize=(3.6 * n_panels, 3.0))
    axes[0].plot(epochs, [s.loss for s in trace], color="#b45050")
    axes[0].set_title(f"{title}: loss")
    axes[0].set_xlabel("epoch")
    axes[1].plot(epochs, [s.mean_pos for s in trace], label="interacted")
    axes[1].plot(epochs, [s.mean_neg for s in trace], label="non-interacted")
    axes[1].set_title("class means")
    axes[1].set_xlabel("epoch")
    axes[1].legend(fontsize=8)
    axes[2].plot(epochs, [s.var_pos for s in trace], label="interacted")
    axes[2].plot(epochs, [s.var_neg for s in trace], label="non-interacted")
    axes[2].set_title("class variances")
    axes[2].set_xlabel("epoch")
    axes[2].legend(fontsize=8)
    if has_auc:
        axes[3].plot(epochs, [s.auc for s in trace], color="#4878a8")
        axes[3].set_title("AUC")
        axes[3].set_xlabel("epoch")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def write_crossnet_trace(path, rows: Sequence[EpochLosses], kind: str) -> None:
    """Per-epoch `epoch,listwise,attention,total` rows for one user kind."""
    if kind not in ("new", "existing"):
        raise ValueError("kind must be 'new' or 'existing'")
    table = []
    for epoch, losses in enumerate(rows, start=1):
        if kind == "new":
            lw, at = losses.listwise_new, losses.attention_new
        else:
            lw, at = losses.listwise_existing, losses.attention_existing
        table.append((epoch, lw, at, lw + at))
    write_rows(path, ["epoch", "listwise", "attention", "total"], table)


def plot_crossnet_trace(path, rows: Sequence[EpochLosses]) -> None:
    if not rows:
        return
    epochs = list(range(1, len(rows) + 1))
    fig, axes = plt.subplots(1, 2, figsize=(8.2, 3.0), sharex=True)
    for axis, kind in zip(axes, ("new", "existing")):
        if kind == "new":
            lw = [r.listwise_new for r in rows]
            at = [r.attention_new for r in rows]
        else:
            lw = [r.listwise_existing for r in rows]
            at = [r.attention_existing for r in rows]
        axis.plot(epochs, lw, label="listwise")
        axis.plot(epochs, at, label="attention")
        axis.plot(epochs, [a + b for a, b in zip(lw, at)], label="total",
                  color="#333333", linestyle="--")
        axis.set_title(f"{kind} users")
        axis.set_xlabel("epoch")
        axis.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


# ---------------------------------------------------------------------------
# ablation comparisons


def write_ablation_table(path, table: Mapping[str, Mapping[str, float]]) -> None:
    """One row per variant: overall plus per-kind hit ratios."""
    rows = []
    for variant in table:
        row = table[variant]
        rows.append((variant, float(row.get("overall", 0.0)),
                     float(row.get("new", 0.0)), float(row.get("existing", 0.0))))
    write_rows(path, ["variant", "hr_overall", "hr_new", "hr_existing"], rows)


def plot_ablation(path, table: Mapping[str, Mapping[str, float]]) -> None:
    variants = list(table)
    kinds = sorted({kind for row in table.values() for kind in row})
    width = 0.8 / max(len(kinds), 1)
    fig, axis = plt.subplots(figsize=(1.6 * len(variants) + 2, 3.2))
    for slot, kind in enumerate(kinds):
        xs = [i + slot * width for i in range(len(variants))]
        axis.bar(xs, [table[v].get(kind, 0.0) for v in variants], width=width,
                 label=kind)
    axis.set_xticks([i + width * (len(kinds) - 1) / 2 for i in range(len(variants))])
    axis.set_xticklabels(variants, rotation=20, ha="right")
    axis.set_ylabel("hit ratio")
    axis.set_title("temporal-component ablation")
    axis.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
