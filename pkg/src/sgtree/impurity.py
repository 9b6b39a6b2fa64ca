"""Impurity criteria and the weighted impurity of a partition.

Target statistics are kept as exact sufficient statistics (integer class
counts for classification; count/sum/sum-of-squares for regression) so that
merge followed by remove is an exact identity, which the coordinate-descent
assignment optimizer relies on for incremental updates.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# Impurity differences below this are treated as exact ties.
TIE_TOL = 1e-12


class Criterion(str, Enum):
    GINI = "gini"
    ENTROPY = "entropy"
    MSE = "mse"

    @property
    def for_classification(self) -> bool:
        return self is not Criterion.MSE


class EmptyStatsError(ValueError):
    """Impurity of a zero-weight statistic is undefined."""


class NegativeStatsError(ValueError):
    """Removal would drive a count below zero."""


@dataclass(frozen=True)
class ClassStats:
    """Class histogram of a sample set; the weight is the total count."""

    counts: np.ndarray  # (C,) int64

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1:
            raise ValueError("class counts must be a 1-D vector")
        if (counts < 0).any():
            raise NegativeStatsError("class counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def weight(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class RegStats:
    """Count, sum and sum-of-squares of real-valued targets."""

    count: int
    total: float
    sum_sq: float

    def __post_init__(self):
        if self.count < 0:
            raise NegativeStatsError("count must be nonnegative")

    @property
    def weight(self) -> int:
        return int(self.count)


TargetStats = ClassStats | RegStats


def stats_from_labels(y: np.ndarray, n_classes: int) -> ClassStats:
    return ClassStats(np.bincount(np.asarray(y, dtype=np.int64), minlength=n_classes))


def stats_from_targets(y: np.ndarray) -> RegStats:
    y = np.asarray(y, dtype=np.float64)
    return RegStats(len(y), float(y.sum()), float(np.square(y).sum()))


def stats_merge(a: TargetStats, b: TargetStats) -> TargetStats:
    if isinstance(a, ClassStats) and isinstance(b, ClassStats):
        return ClassStats(a.counts + b.counts)
    if isinstance(a, RegStats) and isinstance(b, RegStats):
        return RegStats(a.count + b.count, a.total + b.total, a.sum_sq + b.sum_sq)
    raise TypeError("cannot merge classification and regression statistics")


def stats_remove(a: TargetStats, delta: TargetStats) -> TargetStats:
    """Inverse of :func:`stats_merge`; only valid for a previously merged delta."""
    if isinstance(a, ClassStats) and isinstance(delta, ClassStats):
        out = a.counts - delta.counts
        if (out < 0).any():
            raise NegativeStatsError("removal exceeds stored class counts")
        return ClassStats(out)
    if isinstance(a, RegStats) and isinstance(delta, RegStats):
        if delta.count > a.count:
            raise NegativeStatsError("removal exceeds stored count")
        return RegStats(a.count - delta.count, a.total - delta.total, a.sum_sq - delta.sum_sq)
    raise TypeError("cannot remove classification from regression statistics or vice versa")


def _check_criterion(s: TargetStats, c: Criterion) -> None:
    if isinstance(s, ClassStats) and not c.for_classification:
        raise ValueError("mse criterion requires regression statistics")
    if isinstance(s, RegStats) and c.for_classification:
        raise ValueError(f"{c.value} criterion requires classification statistics")


def impurity(s: TargetStats, c: Criterion) -> float:
    """Per-sample impurity of one statistic.

    gini = 1 - sum p^2; entropy = -sum p log2 p (0 log 0 = 0);
    mse = population variance of the targets.
    """
    _check_criterion(s, c)
    w = s.weight
    if w <= 0:
        raise EmptyStatsError("impurity of empty statistics is undefined")
    return weighted_contribution(s, c) / w


def weighted_contribution(s: TargetStats, c: Criterion) -> float:
    """weight * impurity, the additive term a part contributes to Eq.-style totals.

    Computed directly from the sufficient statistics to avoid dividing by
    small weights: gini -> W - sum(c^2)/W, entropy -> W log2 W - sum(c log2 c),
    mse -> sum of squared deviations from the mean.
    """
    _check_criterion(s, c)
    w = s.weight
    if w == 0:
        return 0.0
    if isinstance(s, ClassStats):
        counts = s.counts.astype(np.float64)
        if c is Criterion.GINI:
            return float(w - np.square(counts).sum() / w)
        pos = counts[counts > 0]
        return float(w * np.log2(w) - (pos * np.log2(pos)).sum())
    return max(0.0, s.sum_sq - s.total * s.total / s.count)


def weighted_impurity(parts, c: Criterion) -> float:
    """Sum over parts of weight * impurity; zero-weight parts contribute 0.

    Deliberately not normalized by the total weight: the quantity is the
    additive objective the split search and assignment optimizer minimize.
    """
    parts = list(parts)
    if not any(p.weight > 0 for p in parts):
        raise EmptyStatsError("weighted impurity needs at least one nonempty part")
    return float(sum(weighted_contribution(p, c) for p in parts))


# ---------------------------------------------------------------------------
# Vectorized helpers over raw statistic arrays (hot paths avoid per-part
# objects; these mirror weighted_contribution exactly).


def class_weighted_vector(counts: np.ndarray, c: Criterion) -> np.ndarray:
    """Row-wise W*H for a (m, C) count matrix. Zero-weight rows give 0."""
    counts = np.asarray(counts, dtype=np.float64)
    w = counts.sum(axis=1)
    safe_w = np.where(w > 0, w, 1.0)
    if c is Criterion.GINI:
        out = w - np.square(counts).sum(axis=1) / safe_w
    elif c is Criterion.ENTROPY:
        logc = np.zeros_like(counts)
        np.log2(counts, out=logc, where=counts > 0)
        out = w * np.log2(safe_w) - (counts * logc).sum(axis=1)
    else:
        raise ValueError("class_weighted_vector requires a classification criterion")
    return np.where(w > 0, np.maximum(out, 0.0), 0.0)


def reg_weighted_vector(count: np.ndarray, total: np.ndarray, sum_sq: np.ndarray) -> np.ndarray:
    """Row-wise sum of squared deviations (W*mse). Zero-count rows give 0."""
    count = np.asarray(count, dtype=np.float64)
    safe = np.where(count > 0, count, 1.0)
    out = sum_sq - np.square(total) / safe
    return np.where(count > 0, np.maximum(out, 0.0), 0.0)
