"""Binning trees: small axis-aligned binary trees fit on one feature group
(or on a pair of numeric features augmented with rotated projections) whose
leaves define the bins a shape function maps to branches.

Growth is best-first under a leaf budget: at every step the frontier leaf
whose best threshold split yields the largest weighted-impurity decrease is
split, until the budget is reached or no admissible split remains.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .impurity import (
    TIE_TOL,
    ClassStats,
    Criterion,
    RegStats,
    TargetStats,
    class_weighted_vector,
    reg_weighted_vector,
)

LEAF = -1


@dataclass(frozen=True)
class InnerTreeParams:
    """Budget and admissibility knobs for one binning-tree fit.

    `min_samples_leaf` >= 1 is an absolute count; a value in (0,1) is a
    fraction of the sample set the tree is fit on.
    """

    max_leaf_nodes: int = 8
    min_samples_leaf: float = 1.0
    criterion: Criterion = Criterion.GINI

    def __post_init__(self):
        if self.max_leaf_nodes < 2:
            raise ValueError("max_leaf_nodes must be >= 2")
        if not (self.min_samples_leaf == 1.0 or 0.0 < self.min_samples_leaf <= 1.0):
            raise ValueError("min_samples_leaf must be 1 or a fraction in (0,1]")

    def resolve_min_leaf(self, n: int) -> int:
        if self.min_samples_leaf >= 1.0:
            return int(self.min_samples_leaf)
        return max(1, int(np.ceil(self.min_samples_leaf * n)))


@dataclass(frozen=True)
class InnerTree:
    """Array-encoded binary threshold tree over the columns it was fit on.

    `feature[i] == -1` marks node i as a leaf holding bin `bin_id[i]`; bins
    are numbered 0..L-1 in left-to-right (in-order) leaf order, so for a
    single numeric column they are sorted by interval lower edge.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    bin_id: np.ndarray
    n_columns: int
    directions: tuple[float, ...] | None = None  # rotation angles, bivariate only

    @property
    def n_leaves(self) -> int:
        return int((self.feature == LEAF).sum())

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, local: np.ndarray) -> np.ndarray:
        """Route every row of the local-column matrix to its bin id."""
        local = np.atleast_2d(local)
        out = np.empty(len(local), dtype=np.int64)
        stack = [(0, np.arange(len(local)))]
        while stack:
            node, idx = stack.pop()
            if self.feature[node] == LEAF:
                out[idx] = self.bin_id[node]
                continue
            mask = local[idx, self.feature[node]] <= self.threshold[node]
            stack.append((int(self.left[node]), idx[mask]))
            stack.append((int(self.right[node]), idx[~mask]))
        return out


class _Scan:
    __slots__ = ("gain", "col", "threshold")

    def __init__(self, gain, col, threshold):
        self.gain = gain
        self.col = col
        self.threshold = threshold


def _column_scan(values, y, n_classes, criterion, min_leaf, parent_contrib):
    """Best admissible threshold on one column; candidates are midpoints of
    consecutive distinct sorted values. Returns (gain, threshold) or None."""
    order = np.argsort(values, kind="stable")
    sv = values[order]
    pos = np.nonzero(sv[1:] > sv[:-1])[0]
    if len(pos) == 0:
        return None
    n = len(sv)
    left_n = pos + 1
    admissible = (left_n >= min_leaf) & ((n - left_n) >= min_leaf)
    if not admissible.any():
        return None
    pos = pos[admissible]
    left_n = left_n[admissible]
    sy = y[order]
    if n_classes is not None:
        onehot = np.zeros((n, n_classes), dtype=np.int64)
        onehot[np.arange(n), sy] = 1
        prefix = np.cumsum(onehot, axis=0)
        left_counts = prefix[pos]
        right_counts = prefix[-1] - left_counts
        wh = class_weighted_vector(left_counts, criterion) + class_weighted_vector(
            right_counts, criterion
        )
    else:
        csum = np.cumsum(sy)
        csq = np.cumsum(np.square(sy))
        lw = left_n.astype(np.float64)
        rw = float(n) - lw
        wh = reg_weighted_vector(lw, csum[pos], csq[pos]) + reg_weighted_vector(
            rw, csum[-1] - csum[pos], csq[-1] - csq[pos]
        )
    gains = parent_contrib - wh
    best = gains.max()
    if best <= TIE_TOL:
        return None
    i = int(np.nonzero(gains >= best - TIE_TOL)[0][0])  # lowest threshold among ties
    return best, float((sv[pos[i]] + sv[pos[i] + 1]) / 2.0)


def _contribution(y, n_classes, criterion) -> float:
    if n_classes is not None:
        counts = np.bincount(y, minlength=n_classes)
        return float(class_weighted_vector(counts[None, :], criterion)[0])
    return float(reg_weighted_vector(np.array([len(y)]), np.array([y.sum()]),
                                     np.array([np.square(y).sum()]))[0])


def _best_split(M, idx, y, n_classes, criterion, min_leaf):
    sub_y = y[idx]
    parent = _contribution(sub_y, n_classes, criterion)
    if parent <= TIE_TOL or len(idx) < 2 * min_leaf:
        return None
    best = None
    for col in range(M.shape[1]):
        res = _column_scan(M[idx, col], sub_y, n_classes, criterion, min_leaf, parent)
        if res is None:
            continue
        gain, thr = res
        if best is None or gain > best.gain + TIE_TOL:
            best = _Scan(gain, col, thr)
    return best


def _fit(M: np.ndarray, y: np.ndarray, params: InnerTreeParams, n_classes,
         directions=None) -> InnerTree:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    n = M.shape[0]
    if n < 1:
        raise ValueError("need at least one sample")
    criterion = params.criterion
    if n_classes is not None:
        y = np.asarray(y, dtype=np.int64)
    else:
        y = np.asarray(y, dtype=np.float64)
    min_leaf = params.resolve_min_leaf(n)

    feature = [LEAF]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    pending = {}  # node id -> (scan, idx)

    root_scan = _best_split(M, np.arange(n), y, n_classes, criterion, min_leaf)
    heap = []
    seq = 0
    if root_scan is not None:
        pending[0] = (root_scan, np.arange(n))
        heapq.heappush(heap, (-root_scan.gain, seq, 0))
        seq += 1
    n_leaves = 1

    while heap and n_leaves < params.max_leaf_nodes:
        _, _, node = heapq.heappop(heap)
        scan, idx = pending.pop(node)
        mask = M[idx, scan.col] <= scan.threshold
        children = []
        for child_idx in (idx[mask], idx[~mask]):
            child = len(feature)
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            child_scan = _best_split(M, child_idx, y, n_classes, criterion, min_leaf)
            if child_scan is not None:
                pending[child] = (child_scan, child_idx)
                heapq.heappush(heap, (-child_scan.gain, seq, child))
                seq += 1
            children.append(child)
        feature[node] = scan.col
        threshold[node] = scan.threshold
        left[node], right[node] = children
        n_leaves += 1

    # number bins left-to-right
    bin_id = np.full(len(feature), -1, dtype=np.int64)
    counter = 0
    stack = [0]
    while stack:
        node = stack.pop()
        if feature[node] == LEAF:
            bin_id[node] = counter
            counter += 1
        else:
            stack.append(right[node])
            stack.append(left[node])
    return InnerTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        bin_id=bin_id,
        n_columns=M.shape[1],
        directions=directions,
    )


def fit_univariate(xcols: np.ndarray, y: np.ndarray, params: InnerTreeParams,
                   n_classes: int | None = None) -> InnerTree:
    """Fit a binning tree on the encoded columns of one feature group.

    A single numeric feature gives interval bins; a categorical group's
    indicator block lets any split isolate a level subset, so the resulting
    bins partition the level set.
    """
    return _fit(xcols, y, params, n_classes)


def rotation_angles(h_directions: int) -> tuple[float, ...]:
    if h_directions < 2:
        raise ValueError("need at least two projection directions")
    return tuple(h * np.pi / h_directions for h in range(h_directions))


def bivariate_matrix(x1: np.ndarray, x2: np.ndarray, angles) -> np.ndarray:
    """Local columns for a bivariate fit: the two originals plus one rotated
    projection cos(phi)*x1 + sin(phi)*x2 per angle."""
    cols = [np.asarray(x1, dtype=np.float64), np.asarray(x2, dtype=np.float64)]
    for phi in angles:
        cols.append(np.cos(phi) * cols[0] + np.sin(phi) * cols[1])
    return np.column_stack(cols)


def fit_bivariate(x1: np.ndarray, x2: np.ndarray, y: np.ndarray, h_directions: int,
                  params: InnerTreeParams, n_classes: int | None = None) -> InnerTree:
    """Fit a binning tree over two numeric columns plus H rotated projections
    with angles h*pi/H, h = 0..H-1; leaves are convex polygonal bins."""
    angles = rotation_angles(h_directions)
    local = bivariate_matrix(x1, x2, angles)
    return _fit(local, y, params, n_classes, directions=angles)


@dataclass
class BinTable:
    """Per-bin target statistics extracted on one node's training samples."""

    class_counts: np.ndarray | None = None  # (L, C) int64
    reg_count: np.ndarray | None = None  # (L,)
    reg_total: np.ndarray | None = None
    reg_sum_sq: np.ndarray | None = None

    @property
    def is_classification(self) -> bool:
        return self.class_counts is not None

    @property
    def n_bins(self) -> int:
        return len(self.class_counts) if self.is_classification else len(self.reg_count)

    @property
    def weights(self) -> np.ndarray:
        if self.is_classification:
            return self.class_counts.sum(axis=1)
        return self.reg_count

    def stats(self, b: int) -> TargetStats:
        if self.is_classification:
            return ClassStats(self.class_counts[b].copy())
        return RegStats(int(self.reg_count[b]), float(self.reg_total[b]),
                        float(self.reg_sum_sq[b]))

    def points(self) -> np.ndarray:
        """Cluster coordinates per bin: the class distribution for
        classification, the bin mean for regression. Zero-weight bins give 0."""
        w = self.weights.astype(np.float64)
        safe = np.where(w > 0, w, 1.0)
        if self.is_classification:
            return self.class_counts / safe[:, None]
        return (self.reg_total / safe)[:, None]


def extract_bin_stats(tree: InnerTree, local: np.ndarray, y: np.ndarray,
                      n_classes: int | None = None) -> BinTable:
    """Route samples through the tree and tabulate per-bin target statistics."""
    bins = tree.apply(local)
    length = tree.n_leaves
    if n_classes is not None:
        counts = np.zeros((length, n_classes), dtype=np.int64)
        np.add.at(counts, (bins, np.asarray(y, dtype=np.int64)), 1)
        return BinTable(class_counts=counts)
    y = np.asarray(y, dtype=np.float64)
    count = np.bincount(bins, minlength=length).astype(np.float64)
    total = np.bincount(bins, weights=y, minlength=length)
    sum_sq = np.bincount(bins, weights=np.square(y), minlength=length)
    return BinTable(reg_count=count, reg_total=total, reg_sum_sq=sum_sq)


def root_assignment(tree: InnerTree) -> np.ndarray:
    """Bin -> {0,1} by side of the tree's root split (left subtree is 0)."""
    if tree.feature[0] == LEAF:
        raise ValueError("a single-leaf tree has no root split")
    side = np.zeros(tree.n_leaves, dtype=np.int64)
    stack = [(int(tree.left[0]), 0), (int(tree.right[0]), 1)]
    while stack:
        node, branch = stack.pop()
        if tree.feature[node] == LEAF:
            side[tree.bin_id[node]] = branch
        else:
            stack.append((int(tree.left[node]), branch))
            stack.append((int(tree.right[node]), branch))
    return side


def leaf_intervals(tree: InnerTree) -> list[tuple[float, float]]:
    """For a single-column tree: the (lo, hi] interval of each bin, in bin
    order. The first interval opens at -inf and the last closes at +inf."""
    if tree.n_columns != 1:
        raise ValueError("intervals are defined only for single-column trees")
    out = [None] * tree.n_leaves
    stack = [(0, -np.inf, np.inf)]
    while stack:
        node, lo, hi = stack.pop()
        if tree.feature[node] == LEAF:
            out[tree.bin_id[node]] = (lo, hi)
        else:
            thr = float(tree.threshold[node])
            stack.append((int(tree.left[node]), lo, min(hi, thr)))
            stack.append((int(tree.right[node]), max(lo, thr), hi))
    return out


def leaf_rules(tree: InnerTree, col_names: list[str]) -> list[str]:
    """Human-readable path constraints per bin, for visualization labels."""
    out = [""] * tree.n_leaves
    stack = [(0, [])]
    while stack:
        node, constraints = stack.pop()
        if tree.feature[node] == LEAF:
            out[tree.bin_id[node]] = " & ".join(constraints) if constraints else "always"
        else:
            name = col_names[int(tree.feature[node])]
            thr = float(tree.threshold[node])
            stack.append((int(tree.left[node]), constraints + [f"{name} <= {thr:.4g}"]))
            stack.append((int(tree.right[node]), constraints + [f"{name} > {thr:.4g}"]))
    return out
