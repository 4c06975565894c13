"""Feature normalization: whitening with training statistics, then
length normalization onto the unit hypersphere.

Statistics are fitted once on training rows and applied unchanged to test
rows; the apply step never recomputes them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DecodeError

NORM_MAGIC = "AEC-NORM v1"


@dataclass
class NormStats:
    """Per-dimension training mean and population standard deviation."""

    mean: np.ndarray
    std: np.ndarray
    epsilon: float = 1e-8

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be 1-D vectors of equal length")
        if (self.std < 0).any():
            raise ValueError("standard deviations must be non-negative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @property
    def d(self) -> int:
        return self.mean.size


def fit_norm_stats(train: np.ndarray, epsilon: float = 1e-8) -> NormStats:
    """Per-dimension mean and population std of the training rows."""
    train = np.atleast_2d(np.asarray(train, dtype=np.float64))
    if train.shape[0] < 2:
        raise ValueError("need at least 2 training rows to fit statistics")
    if not np.isfinite(train).all():
        raise ValueError("training rows contain non-finite values")
    return NormStats(mean=train.mean(axis=0), std=train.std(axis=0), epsilon=epsilon)


def length_normalize(x: np.ndarray) -> np.ndarray:
    """Scale a vector (or each row of a matrix) to unit Euclidean norm."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if (norms == 0.0).any():
        raise ValueError("cannot length-normalize a zero vector")
    return x / norms


def apply_normalization(x: np.ndarray, stats: NormStats) -> np.ndarray:
    """Whiten with the fitted stats, then length-normalize each row."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != stats.d:
        raise ValueError(f"dimension mismatch: rows are {x.shape[-1]}-dim, stats {stats.d}-dim")
    whitened = (x - stats.mean) / (stats.std + stats.epsilon)
    return length_normalize(whitened)


def save_norm_stats(path, stats: NormStats) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{NORM_MAGIC} dim={stats.d}\n")
        fh.write("mean: " + " ".join(repr(v) for v in stats.mean.tolist()) + "\n")
        fh.write("std: " + " ".join(repr(v) for v in stats.std.tolist()) + "\n")


def load_norm_stats(path) -> NormStats:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith(NORM_MAGIC):
            raise DecodeError(f"{path} is not an {NORM_MAGIC} file")
        try:
            d = int(header.split("dim=", 1)[1])
        except (IndexError, ValueError) as exc:
            raise DecodeError(f"bad header in {path}: {header!r}") from exc
        vectors = {}
        for line in fh:
            if ":" not in line:
                continue
            name, _, payload = line.partition(":")
            vectors[name.strip()] = np.array([float(v) for v in payload.split()])
    if set(vectors) != {"mean", "std"} or any(v.size != d for v in vectors.values()):
        raise DecodeError(f"{path} does not hold {d}-dim mean and std lines")
    return NormStats(mean=vectors["mean"], std=vectors["std"])
