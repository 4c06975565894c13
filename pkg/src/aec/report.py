"""Experiment report rendering: machine-readable AEC-REPORT document,
human-readable summary, delimited per-class metrics, and figures."""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import ExperimentReport

REPORT_MAGIC = "AEC-REPORT v1"


def report_document(report: ExperimentReport) -> dict:
    """The AEC-REPORT payload as plain JSON-serializable data."""
    folds = []
    for fold in report.folds:
        folds.append(
            {
                "name": fold.name,
                "n_train": fold.n_train,
                "n_test": fold.n_test,
                "weighted_accuracy": fold.report.weighted_accuracy,
                "per_class_recall": [
                    None if np.isnan(r) else float(r)
                    for r in fold.report.per_class_recall
                ],
                "confusion": fold.report.confusion.tolist(),
            }
        )
    return {
        "format": REPORT_MAGIC,
        "reproducibility": report.params,
        "class_names": report.class_names,
        "folds": folds,
        "mean_accuracy": report.mean_accuracy,
        "std_accuracy": report.std_accuracy,
        "pooled_confusion": report.pooled_confusion.tolist(),
    }


def report_text(report: ExperimentReport) -> str:
    lines = [REPORT_MAGIC, ""]
    lines.append("parameters:")
    for key in sorted(report.params):
        lines.append(f"  {key} = {report.params[key]}")
    lines.append("")
    for fold in report.folds:
        lines.append(
            f"{fold.name}: accuracy {fold.report.weighted_accuracy:.4f} "
            f"({fold.n_train} train / {fold.n_test} test)"
        )
    lines.append("")
    lines.append(
        f"mean weighted accuracy {report.mean_accuracy:.4f} "
        f"(std {report.std_accuracy:.4f} over {len(report.folds)} evaluation(s))"
    )
    pooled = report.pooled_confusion
    support = pooled.sum(axis=1)
    lines.append("")
    lines.append("per-class recall (pooled):")
    for i, name in enumerate(report.class_names):
        if support[i] == 0:
            lines.append(f"  {name}: no support")
        else:
            lines.append(f"  {name}: {pooled[i, i] / support[i]:.4f} ({support[i]} clips)")
    return "\n".join(lines) + "\n"


def write_per_class_csv(path, report: ExperimentReport) -> None:
    pooled = report.pooled_confusion
    support = pooled.sum(axis=1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("class,support,recall\n")
        for i, name in enumerate(report.class_names):
            recall = "" if support[i] == 0 else f"{pooled[i, i] / support[i]:.6f}"
            fh.write(f"{name},{support[i]},{recall}\n")


def write_confusion_csv(path, report: ExperimentReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("truth\\pred," + ",".join(report.class_names) + "\n")
        for name, row in zip(report.class_names, report.pooled_confusion):
            fh.write(name + "," + ",".join(str(int(v)) for v in row) + "\n")


def _save_fig(fig, path):
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_confusion(report: ExperimentReport, path) -> None:
    names = report.class_names
    matrix = report.pooled_confusion
    fig, ax = plt.subplots(figsize=(0.5 * len(names) + 3, 0.5 * len(names) + 2.5))
    im = ax.imshow(matrix, cmap="Blues")
    ax.set_xticks(range(len(names)), names, rotation=90, fontsize=8)
    ax.set_yticks(range(len(names)), names, fontsize=8)
    ax.set_xlabel("predicted")
    ax.set_ylabel("truth")
    threshold = matrix.max() / 2 if matrix.max() else 0.5
    for i in range(len(names)):
        for j in range(len(names)):
            if matrix[i, j]:
                ax.text(
                    j, i, str(int(matrix[i, j])), ha="center", va="center",
                    fontsize=7, color="white" if matrix[i, j] > threshold else "black",
                )
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    _save_fig(fig, path)


def plot_per_class_recall(report: ExperimentReport, path) -> None:
    pooled = report.pooled_confusion
    support = pooled.sum(axis=1)
    recall = np.where(support > 0, np.diag(pooled) / np.maximum(support, 1), 0.0)
    fig, ax = plt.subplots(figsize=(0.45 * len(report.class_names) + 3, 4))
    ax.bar(range(len(report.class_names)), recall, color="#4477aa")
    ax.set_xticks(range(len(report.class_names)), report.class_names, rotation=90, fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("recall")
    ax.axhline(report.mean_accuracy, color="#cc6677", linestyle="--", linewidth=1,
               label=f"mean accuracy {report.mean_accuracy:.3f}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save_fig(fig, path)


def plot_fold_accuracies(report: ExperimentReport, path) -> None:
    names = [f.name for f in report.folds]
    values = [f.report.weighted_accuracy for f in report.folds]
    fig, ax = plt.subplots(figsize=(max(4, 0.8 * len(names) + 2), 3.5))
    ax.bar(range(len(names)), values, color="#44aa77")
    ax.set_xticks(range(len(names)), names, rotation=30, fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("weighted accuracy")
    ax.axhline(report.mean_accuracy, color="#cc6677", linestyle="--", linewidth=1)
    fig.tight_layout()
    _save_fig(fig, path)


def render_report(report: ExperimentReport, out_dir) -> dict:
    """Write the full report bundle; returns {artifact name: path}."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    paths["report.json"] = os.path.join(out_dir, "report.json")
    with open(paths["report.json"], "w", encoding="utf-8") as fh:
        json.dump(report_document(report), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")

    paths["report.txt"] = os.path.join(out_dir, "report.txt")
    with open(paths["report.txt"], "w", encoding="utf-8") as fh:
        fh.write(report_text(report))

    paths["per_class.csv"] = os.path.join(out_dir, "per_class.csv")
    write_per_class_csv(paths["per_class.csv"], report)
    paths["confusion.csv"] = os.path.join(out_dir, "confusion.csv")
    write_confusion_csv(paths["confusion.csv"], report)

    paths["confusion.png"] = os.path.join(out_dir, "confusion.png")
    plot_confusion(report, paths["confusion.png"])
    paths["per_class_recall.png"] = os.path.join(out_dir, "per_class_recall.png")
    plot_per_class_recall(report, paths["per_class_recall.png"])
    if len(report.folds) > 1:
        paths["fold_accuracy.png"] = os.path.join(out_dir, "fold_accuracy.png")
        plot_fold_accuracies(report, paths["fold_accuracy.png"])
    return paths
