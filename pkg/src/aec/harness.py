"""Benchmark harness: dataset manifests, split protocols, metrics,
judge-agreement accuracy, and the end-to-end experiment runner."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import elm as elm_mod
from . import ladder as ladder_mod
from . import svm as svm_mod
from .audio import load_wav, preprocess
from .errors import DecodeError
from .features import (
    MelParams,
    log_mel_segments,
    mfcc_zcr,
    pool_utterance,
    read_embeddings,
)
from .normalize import apply_normalization, fit_norm_stats

MANIFEST_HEADER = ["clip_id", "path", "label", "split"]

FEATURE_MODES = ("logmel-pooled", "mfcc-zcr", "embeddings")
MODEL_KINDS = ("ladder", "elm", "svm")
NO_CONSENSUS = "no-consensus"


@dataclass
class ManifestEntry:
    clip_id: str
    path: str
    label: str
    split: str | None = None


@dataclass
class DatasetManifest:
    """Clip inventory: id, file path, class label, optional split tag."""

    entries: list[ManifestEntry]
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.clip_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("clip ids must be unique")
        if not self.class_names:
            self.class_names = sorted({e.label for e in self.entries})
        unknown = {e.label for e in self.entries} - set(self.class_names)
        if unknown:
            raise ValueError(f"labels not in class_names: {sorted(unknown)}")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def labels_as_indices(self) -> np.ndarray:
        index = {name: i for i, name in enumerate(self.class_names)}
        return np.array([index[e.label] for e in self.entries], dtype=np.int64)


def write_manifest(path, manifest: DatasetManifest) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for e in manifest.entries:
            writer.writerow([e.clip_id, e.path, e.label, e.split or ""])


def read_manifest(path) -> DatasetManifest:
    """Read a manifest CSV; relative clip paths resolve against its folder."""
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_HEADER:
            raise DecodeError(
                f"{path}: manifest must start with header {','.join(MANIFEST_HEADER)}"
            )
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise DecodeError(f"{path}: expected 4 columns, got {len(row)}: {row}")
            clip_path = row[1]
            if clip_path and not os.path.isabs(clip_path):
                clip_path = os.path.join(base, clip_path)
            entries.append(
                ManifestEntry(
                    clip_id=row[0], path=clip_path, label=row[2], split=row[3] or None
                )
            )
    if not entries:
        raise DecodeError(f"{path}: manifest holds no entries")
    return DatasetManifest(entries=entries)


# ---------------------------------------------------------------------------
# Split protocols
# ---------------------------------------------------------------------------


def parse_split_mode(text: str) -> tuple[str, float | int]:
    """Parse "holdout", "holdout:0.7", "kfold:5" into (mode, parameter)."""
    name, _, arg = text.partition(":")
    if name == "holdout":
        return "holdout", float(arg) if arg else 0.7
    if name == "kfold":
        return "kfold", int(arg) if arg else 5
    raise ValueError(f"unknown split mode {text!r} (use holdout[:frac] or kfold[:k])")


def make_splits(
    manifest: DatasetManifest,
    mode: str = "holdout",
    train_fraction: float = 0.7,
    k: int = 5,
    seed: int = 0,
) -> DatasetManifest:
    """Assign stratified splits: per-class proportions within one example.

    holdout tags entries train/test; kfold tags them fold-0..fold-(k-1)
    with per-class fold counts differing by at most one.
    """
    rng = np.random.default_rng(seed)
    by_class: dict[str, list[int]] = {name: [] for name in manifest.class_names}
    for i, e in enumerate(manifest.entries):
        by_class[e.label].append(i)

    splits: list[str | None] = [None] * len(manifest.entries)
    if mode == "holdout":
        if not 0.0 < train_fraction < 1.0:
            raise ValueError("train fraction must lie in (0, 1)")
        for name in manifest.class_names:
            idx = np.array(by_class[name])
            if idx.size < 2:
                raise ValueError(f"class {name!r} needs >= 2 examples for a holdout split")
            idx = idx[rng.permutation(idx.size)]
            n_train = int(round(train_fraction * idx.size))
            n_train = min(max(n_train, 1), idx.size - 1)
            for i in idx[:n_train]:
                splits[i] = "train"
            for i in idx[n_train:]:
                splits[i] = "test"
    elif mode == "kfold":
        if k < 2:
            raise ValueError("k-fold needs k >= 2")
        for name in manifest.class_names:
            idx = np.array(by_class[name])
            if idx.size < k:
                raise ValueError(f"class {name!r} has {idx.size} examples, fewer than k={k}")
            idx = idx[rng.permutation(idx.size)]
            for pos, i in enumerate(idx):
                splits[i] = f"fold-{pos % k}"
    else:
        raise ValueError(f"unknown split mode {mode!r}")

    entries = [
        ManifestEntry(e.clip_id, e.path, e.label, split)
        for e, split in zip(manifest.entries, splits)
    ]
    return DatasetManifest(entries=entries, class_names=list(manifest.class_names))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    """Weighted accuracy, per-class recall, and the confusion matrix."""

    weighted_accuracy: float
    per_class_recall: np.ndarray  # nan where a class has no support
    confusion: np.ndarray  # confusion[i, j] = count(truth i, predicted j)

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)


def evaluate(predictions, truth, n_classes: int) -> EvalReport:
    """Support-weighted per-class recall (equals overall fraction correct)."""
    predictions = np.asarray(predictions, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if predictions.size != truth.size:
        raise ValueError("predictions and truth must have equal length")
    if predictions.size == 0:
        raise ValueError("cannot evaluate an empty prediction set")
    for name, arr in (("prediction", predictions), ("truth", truth)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise ValueError(f"{name} label out of range [0, {n_classes})")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (truth, predictions), 1)
    support = confusion.sum(axis=1)
    with np.errstate(invalid="ignore"):
        recall = np.where(support > 0, np.diag(confusion) / np.maximum(support, 1), np.nan)
    weighted = float(np.diag(confusion).sum() / truth.size)
    return EvalReport(weighted_accuracy=weighted, per_class_recall=recall, confusion=confusion)


# ---------------------------------------------------------------------------
# Judge agreement
# ---------------------------------------------------------------------------


@dataclass
class AnnotationRecord:
    """One clip with the labels assigned by exactly three judges."""

    clip_id: str
    judge_labels: tuple[str, str, str]

    def __post_init__(self):
        self.judge_labels = tuple(self.judge_labels)
        if len(self.judge_labels) != 3:
            raise ValueError(f"clip {self.clip_id!r}: exactly 3 judge labels required")


def consensus_label(record: AnnotationRecord) -> str:
    """Majority label when at least two judges agree, else a marker."""
    a, b, c = record.judge_labels
    if a == b or a == c:
        return a
    if b == c:
        return b
    return NO_CONSENSUS


def human_accuracy(records) -> float:
    """Judge accuracy under the counting rule: a two-vs-one clip costs one
    error, full disagreement costs three, out of three judgments per clip."""
    records = list(records)
    if not records:
        raise ValueError("need at least one annotation record")
    errors = 0
    for record in records:
        distinct = len(set(record.judge_labels))
        if distinct == 2:
            errors += 1
        elif distinct == 3:
            errors += 3
    return 1.0 - errors / (3 * len(records))


def read_annotations(path) -> list[AnnotationRecord]:
    """CSV with header clip_id,judge1,judge2,judge3."""
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != [
            "clip_id", "judge1", "judge2", "judge3",
        ]:
            raise DecodeError(f"{path}: expected header clip_id,judge1,judge2,judge3")
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise DecodeError(f"{path}: expected 4 columns, got {row}")
            records.append(AnnotationRecord(row[0], tuple(row[1:])))
    if not records:
        raise DecodeError(f"{path}: no annotation records")
    return records


# ---------------------------------------------------------------------------
# Feature computation over a manifest
# ---------------------------------------------------------------------------


def compute_features(
    manifest: DatasetManifest,
    feature_mode: str,
    embeddings_path=None,
    mel: MelParams | None = None,
) -> np.ndarray:
    """One utterance row per manifest entry, aligned with entry order."""
    if feature_mode not in FEATURE_MODES:
        raise ValueError(f"feature mode must be one of {FEATURE_MODES}")
    if feature_mode == "embeddings":
        if embeddings_path is None:
            raise ValueError("embeddings feature mode needs an embeddings file")
        ids, matrix = read_embeddings(embeddings_path)
        lookup = {clip_id: i for i, clip_id in enumerate(ids)}
        missing = [e.clip_id for e in manifest.entries if e.clip_id not in lookup]
        if missing:
            raise ValueError(
                f"embeddings file lacks {len(missing)} manifest clips "
                f"(first: {missing[0]!r})"
            )
        rows = np.array([lookup[e.clip_id] for e in manifest.entries])
        return matrix.values[rows]

    mel = mel or MelParams()
    rows = []
    for e in manifest.entries:
        clip, _ = preprocess(load_wav(e.path))
        if feature_mode == "logmel-pooled":
            rows.append(pool_utterance(log_mel_segments(clip, mel)))
        else:
            rows.append(mfcc_zcr(clip, mel))
    return np.vstack(rows)


# ---------------------------------------------------------------------------
# Experiment runner
# ---------------------------------------------------------------------------


@dataclass
class FoldResult:
    name: str
    report: EvalReport
    n_train: int
    n_test: int


@dataclass
class ExperimentReport:
    """Per-fold evaluations plus their aggregate and the reproducibility
    record (every parameter and the seed)."""

    params: dict
    class_names: list[str]
    folds: list[FoldResult]
    mean_accuracy: float
    std_accuracy: float
    pooled_confusion: np.ndarray


def _train_and_eval(
    X_train, y_train, X_test, y_test, model_kind, model_params, normalization,
    n_classes, seed,
) -> EvalReport:
    if normalization == "normalized":
        stats = fit_norm_stats(X_train)
        X_train = apply_normalization(X_train, stats)
        X_test = apply_normalization(X_test, stats)
    elif normalization != "raw":
        raise ValueError("normalization must be 'raw' or 'normalized'")
    params = dict(model_params or {})
    if model_kind == "ladder":
        dims = params.pop("layer_dims", None)
        if dims is None:
            hidden = params.pop("hidden_dims", ladder_mod.DEFAULT_HIDDEN_DIMS)
            dims = (X_train.shape[1], *hidden, n_classes)
        else:
            params.pop("hidden_dims", None)
        config = ladder_mod.LadderConfig(layer_dims=tuple(dims), seed=seed, **params)
        model, _ = ladder_mod.train_ladder(
            config, ladder_mod.LadderBatch(labeled_x=X_train, labels=y_train)
        )
        pred, _ = ladder_mod.predict_ladder(model, X_test)
    elif model_kind == "elm":
        variant = params.pop("variant", "kernel")
        C = params.pop("C", 100.0)
        if variant == "kernel":
            spec = params.pop("kernel", None) or elm_mod.KernelSpec(
                kind=params.pop("kernel_kind", "polynomial"),
                gamma=params.pop("gamma", None),
                degree=params.pop("degree", 2),
                coef0=params.pop("coef0", 1.0),
            )
            model = elm_mod.train_kernel_elm(X_train, y_train, spec, C, n_classes=n_classes)
        else:
            model = elm_mod.train_random_elm(
                X_train, y_train,
                hidden_multiplier=params.pop("hidden_multiplier", 10),
                C=C, seed=seed, n_classes=n_classes,
            )
        pred, _ = elm_mod.predict_elm(model, X_test)
    elif model_kind == "svm":
        spec = params.pop("kernel", None) or elm_mod.KernelSpec(
            kind=params.pop("kernel_kind", "linear"),
            gamma=params.pop("gamma", None),
            degree=params.pop("degree", 2),
            coef0=params.pop("coef0", 1.0),
        )
        model = svm_mod.train_ova_svm(
            X_train, y_train, spec,
            C=params.pop("C", 10.0), tol=params.pop("tol", 1e-3),
            n_classes=n_classes,
        )
        pred, _ = svm_mod.predict_svm(model, X_test)
    else:
        raise ValueError(f"model must be one of {MODEL_KINDS}")
    return evaluate(pred, y_test, n_classes)


def _run_fold(args):
    name, train_idx, test_idx, X, y, model_kind, model_params, normalization, n_classes, seed = args
    report = _train_and_eval(
        X[train_idx], y[train_idx], X[test_idx], y[test_idx],
        model_kind, model_params, normalization, n_classes, seed,
    )
    return FoldResult(
        name=name, report=report, n_train=len(train_idx), n_test=len(test_idx)
    )


def _fold_plan(manifest: DatasetManifest, mode: str, param) -> list[tuple[str, np.ndarray, np.ndarray]]:
    splits = [e.split for e in manifest.entries]
    if mode == "holdout":
        train_idx = np.flatnonzero([s == "train" for s in splits])
        test_idx = np.flatnonzero([s == "test" for s in splits])
        if train_idx.size == 0 or test_idx.size == 0:
            raise ValueError("holdout split assigned no train or no test entries")
        return [("holdout", train_idx, test_idx)]
    k = int(param)
    plan = []
    for fold in range(k):
        tag = f"fold-{fold}"
        test_idx = np.flatnonzero([s == tag for s in splits])
        train_idx = np.flatnonzero([s is not None and s != tag for s in splits])
        if test_idx.size == 0:
            raise ValueError(f"no entries assigned to {tag}")
        plan.append((tag, train_idx, test_idx))
    return plan


def _has_splits_for(manifest: DatasetManifest, mode: str, param) -> bool:
    splits = {e.split for e in manifest.entries}
    if None in splits:
        return False
    if mode == "holdout":
        return splits == {"train", "test"}
    return splits == {f"fold-{i}" for i in range(int(param))}


def run_experiment(
    manifest: DatasetManifest,
    feature_mode: str = "logmel-pooled",
    embeddings_path=None,
    normalization: str = "normalized",
    model: str = "ladder",
    model_params: dict | None = None,
    split_mode: str = "holdout",
    seed: int = 0,
    jobs: int = 1,
    mel: MelParams | None = None,
) -> ExperimentReport:
    """Full protocol: features, stratified splits, per-fold training and
    evaluation, aggregate accuracy.

    Normalization statistics are fitted on each fold's training portion
    only. Existing split tags in the manifest are honored when they match
    split_mode; otherwise fresh stratified splits are drawn from the seed.
    """
    mode, param = parse_split_mode(split_mode)
    if not _has_splits_for(manifest, mode, param):
        if mode == "holdout":
            manifest = make_splits(manifest, "holdout", train_fraction=param, seed=seed)
        else:
            manifest = make_splits(manifest, "kfold", k=param, seed=seed)
    X = compute_features(manifest, feature_mode, embeddings_path, mel)
    y = manifest.labels_as_indices()
    n_classes = manifest.n_classes

    plan = _fold_plan(manifest, mode, param)
    job_args = [
        (name, train_idx, test_idx, X, y, model, model_params, normalization, n_classes, seed)
        for name, train_idx, test_idx in plan
    ]
    if jobs > 1 and len(job_args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            folds = list(pool.map(_run_fold, job_args))
    else:
        folds = [_run_fold(args) for args in job_args]

    accuracies = np.array([f.report.weighted_accuracy for f in folds])
    pooled = np.sum([f.report.confusion for f in folds], axis=0)
    return ExperimentReport(
        params={
            "feature_mode": feature_mode,
            "embeddings_path": str(embeddings_path) if embeddings_path else None,
            "normalization": normalization,
            "model": model,
            "model_params": _jsonable(model_params or {}),
            "split_mode": split_mode,
            "seed": seed,
            "n_classes": n_classes,
            "n_entries": len(manifest.entries),
        },
        class_names=list(manifest.class_names),
        folds=folds,
        mean_accuracy=float(accuracies.mean()),
        std_accuracy=float(accuracies.std()),
        pooled_confusion=pooled,
    )


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, elm_mod.KernelSpec):
        return {
            "kind": value.kind, "gamma": value.gamma,
            "degree": value.degree, "coef0": value.coef0,
        }
    return value
