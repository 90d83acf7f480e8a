"""Report rendering: delimited/text outputs plus matplotlib figures saved
next to them. All figures use the Agg backend so the CLI works headless."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluate import EvalReport, compare_runs, write_reports_jsonl  # noqa: E402
from .hylstm import TrainReport  # noqa: E402


def save_loss_curves(report: TrainReport, path, title: str = "training loss") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = range(len(report.epoch_losses))
    ax.plot(epochs, report.epoch_losses, label="total", marker="o", ms=3)
    if any(report.epoch_step_losses):
        ax.plot(epochs, report.epoch_target_losses, label="target head",
                ls="--", lw=1)
        ax.plot(epochs, report.epoch_step_losses, label="step head",
                ls=":", lw=1)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_embedding_loss(epoch_losses: list[float], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(epoch_losses)), epoch_losses, marker="o", ms=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean negative-sampling loss")
    ax.set_title("skip-gram training")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_accuracy_bars(reports: list[EvalReport], path) -> None:
    metrics = [("Acc(A)", "in_set_all"), ("Acc(K)", "in_set_known"),
               ("Acc(U)", "in_set_unknown"), ("top-1", "top1")]
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(reports), 4))
    width = 0.8 / len(metrics)
    for mi, (label, attr) in enumerate(metrics):
        xs = [i + mi * width for i in range(len(reports))]
        ax.bar(xs, [getattr(r, attr) for r in reports], width, label=label)
    ax.set_xticks([i + 1.5 * width for i in range(len(reports))])
    ax.set_xticklabels([r.name or f"run{i}" for i, r in enumerate(reports)],
                       rotation=15, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.legend(ncol=2, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_eval_outputs(reports: list[EvalReport], out_prefix: str) -> list[str]:
    """Write the text table, the JSON-lines sidecar, and the accuracy figure
    for a set of named reports. Returns the written paths."""
    txt = out_prefix + ".txt"
    jsonl = out_prefix + ".jsonl"
    png = out_prefix + ".png"
    with open(txt, "w", encoding="utf-8") as f:
        f.write(compare_runs(reports))
    write_reports_jsonl(reports, jsonl)
    save_accuracy_bars(reports, png)
    return [txt, jsonl, png]
