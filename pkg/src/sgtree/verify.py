"""Executable encodings of the theory the engine rests on: the
expressiveness gap on alternating-bars data, the per-node gain dominance
over the best threshold split, a brute-force check of the assignment
optimizer, and a wall-clock scaling smoke test for the root split."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .assign import Assignment, coord_descent, weighted_kmeans
from .data import ColumnSpec, Dataset, FeatureSchema, NUMERIC, Task, gen_bars, one_hot_view
from .impurity import Criterion
from .induce import Hyperparams, SgtModel, accuracy, fit, fit_cart
from .inner_tree import BinTable
from .model import stats
from .split import node_contribution, select_split


class VerificationError(RuntimeError):
    """A property the engine must satisfy failed to hold."""


# ---------------------------------------------------------------------------
# Expressiveness gap (alternating bars)


@dataclass(frozen=True)
class GapResult:
    omega: int
    sgt_nodes: int
    cart_nodes: int
    sgt_accuracy: float
    cart_accuracy: float


def theorem2_gap(omega: int, hp: Hyperparams | None = None, n: int | None = None,
                 seed: int = 0) -> GapResult:
    """Fit a depth-1 shape-function tree and an unbounded-depth threshold
    tree on bars data; both must reach 100% training accuracy, with the
    former using a single internal node and the latter at least omega+1."""
    if n is None:
        n = max(400, 20 * (omega + 2))
    ds = gen_bars(omega, n, seed=seed)
    if hp is None:
        hp = Hyperparams(seed=seed)
    sgt_hp = replace(hp, max_depth=1,
                     inner_max_leaf_nodes=max(hp.inner_max_leaf_nodes, 2 * (omega + 2)))
    cart_hp = replace(hp, max_depth=max(hp.max_depth, 4 * (omega + 2)))
    sgt = fit(ds, sgt_hp)
    cart = fit_cart(ds, cart_hp)
    result = GapResult(
        omega=omega,
        sgt_nodes=stats(sgt).internal_nodes,
        cart_nodes=stats(cart).internal_nodes,
        sgt_accuracy=accuracy(sgt, ds),
        cart_accuracy=accuracy(cart, ds),
    )
    if result.sgt_accuracy < 1.0:
        raise VerificationError(
            f"single shape-function node failed to separate bars(omega={omega}): "
            f"accuracy {result.sgt_accuracy:.4f}"
        )
    return result


# ---------------------------------------------------------------------------
# Root-gain dominance over the best threshold split


def best_threshold_objective(enc: np.ndarray, y: np.ndarray, criterion: Criterion,
                             n_classes: int | None) -> float:
    """Independent oracle: exhaustively scan every midpoint threshold on
    every encoded column with running tallies and return the lowest
    two-branch weighted impurity (the unsplit impurity if nothing helps)."""
    n = len(y)
    best = node_contribution(y, n_classes, criterion)
    for col in range(enc.shape[1]):
        order = np.argsort(enc[:, col], kind="stable")
        v = enc[order, col]
        ys = y[order]
        if n_classes is not None:
            left = np.zeros(n_classes)
            right = np.bincount(ys.astype(np.int64), minlength=n_classes).astype(float)
            for i in range(n - 1):
                c = int(ys[i])
                left[c] += 1
                right[c] -= 1
                if v[i + 1] <= v[i]:
                    continue
                obj = 0.0
                for counts, w in ((left, i + 1.0), (right, n - i - 1.0)):
                    nz = counts[counts > 0]
                    if criterion is Criterion.GINI:
                        obj += w - float(np.square(nz).sum()) / w
                    else:
                        obj += w * np.log2(w) - float((nz * np.log2(nz)).sum())
                best = min(best, obj)
        else:
            s = sq = 0.0
            tot = float(ys.sum())
            tot_sq = float(np.square(ys).sum())
            for i in range(n - 1):
                s += float(ys[i])
                sq += float(ys[i]) ** 2
                if v[i + 1] <= v[i]:
                    continue
                wl, wr = i + 1.0, n - i - 1.0
                obj = (sq - s * s / wl) + ((tot_sq - sq) - (tot - s) ** 2 / wr)
                best = min(best, obj)
    return best


def random_dataset(rng: np.random.Generator, n: int, d: int, n_classes: int) -> Dataset:
    """Numeric features with a noisy low-dimensional class structure so root
    splits have real signal."""
    x = rng.uniform(-1.0, 1.0, size=(n, d))
    w = rng.normal(size=(d,))
    score = x @ w + 0.3 * rng.normal(size=n)
    edges = np.quantile(score, np.linspace(0, 1, n_classes + 1)[1:-1])
    y = np.searchsorted(edges, score).astype(np.int64)
    schema = FeatureSchema(tuple(ColumnSpec(f"f{j}", NUMERIC) for j in range(d)))
    names = tuple(str(c) for c in range(n_classes))
    # guarantee every class appears
    for c in range(n_classes):
        if not (y == c).any():
            y[rng.integers(0, n)] = c
    return Dataset(schema, [x[:, j] for j in range(d)], y, Task.CLASSIFICATION, names)


@dataclass(frozen=True)
class Lemma1Result:
    trials: int
    max_violation: float


def lemma1_harness(trials: int, n: int = 200, d: int = 5, n_classes: int = 2,
                   criterion: Criterion = Criterion.GINI, seed: int = 0,
                   hp: Hyperparams | None = None) -> Lemma1Result:
    """Root split gain of the shape-function search must dominate the best
    single-threshold gain on every sampled dataset (violation <= ~1e-9)."""
    rng = np.random.default_rng(seed)
    if hp is None:
        hp = Hyperparams(criterion=criterion)
    sp = hp.split_params()
    worst = 0.0
    for t in range(trials):
        ds = random_dataset(rng, n, d, n_classes)
        enc = one_hot_view(ds)
        idx = np.arange(n)
        parent = node_contribution(ds.y, n_classes, criterion)
        oracle_obj = best_threshold_objective(enc.matrix, ds.y, criterion, n_classes)
        res = select_split(enc.matrix, enc.groups, idx, ds.y, sp, n_classes,
                           node_seed=int(rng.integers(0, 2**32)))
        cart_gain = parent - oracle_obj
        sgt_gain = parent - res.objective
        worst = max(worst, cart_gain - sgt_gain)
    return Lemma1Result(trials, worst)


# ---------------------------------------------------------------------------
# Assignment optimizer vs. brute force


def enumerate_assignments(n_bins: int, k: int) -> np.ndarray:
    """All k^n_bins bin->branch label vectors, one per row."""
    powers = k ** np.arange(n_bins - 1, -1, -1, dtype=np.int64)
    return (np.arange(k**n_bins, dtype=np.int64)[:, None] // powers) % k


def brute_force_assignment(bins: BinTable, k: int, criterion: Criterion) -> tuple[np.ndarray, float]:
    """Global optimum of the bin->branch problem by full enumeration,
    vectorized over every candidate label vector."""
    from .impurity import class_weighted_vector, reg_weighted_vector

    labels = enumerate_assignments(bins.n_bins, k)
    total = np.zeros(len(labels))
    for b in range(k):
        mask = (labels == b).astype(np.float64)
        if bins.is_classification:
            counts = mask @ bins.class_counts.astype(np.float64)
            total += class_weighted_vector(counts, criterion)
        else:
            total += reg_weighted_vector(
                mask @ bins.reg_count, mask @ bins.reg_total, mask @ bins.reg_sum_sq
            )
    best = int(np.argmin(total))
    return labels[best], float(total[best])


def is_local_optimum(bins: BinTable, assignment: Assignment, criterion: Criterion,
                     tol: float = 1e-12) -> bool:
    """No single-bin move of a nonempty bin improves the objective by > tol."""
    from .assign import assignment_objective

    base = assignment_objective(bins, assignment.labels, assignment.arity, criterion)
    w = bins.weights
    for b in range(bins.n_bins):
        if w[b] <= 0:
            continue
        for to in range(assignment.arity):
            if to == assignment.labels[b]:
                continue
            trial = assignment.labels.copy()
            trial[b] = to
            if assignment_objective(bins, trial, assignment.arity, criterion) < base - tol:
                return False
    return True


@dataclass(frozen=True)
class OracleReport:
    trials: int
    local_optimum_ok: int
    init_bound_ok: int
    global_matches: int
    max_gap: float


def assignment_oracle(trials: int, seed: int = 0, max_bins: int = 10,
                      max_arity: int = 3, criterion: Criterion = Criterion.GINI) -> OracleReport:
    """Random bin tables: the optimizer must land on an exact coordinatewise
    local optimum without exceeding its initializations, and should usually
    match the brute-force global optimum."""
    from .assign import assignment_objective

    rng = np.random.default_rng(seed)
    local_ok = bound_ok = matches = 0
    max_gap = 0.0
    for _ in range(trials):
        length = int(rng.integers(2, max_bins + 1))
        k = int(rng.integers(2, max_arity + 1))
        n_classes = int(rng.integers(2, 4))
        counts = rng.integers(0, 20, size=(length, n_classes))
        if counts.sum() == 0:
            counts[0, 0] = 1
        bins = BinTable(class_counts=counts.astype(np.int64))
        km = weighted_kmeans(bins, k, criterion, seed=int(rng.integers(0, 2**32)))
        # a root-style contiguous initialization in leaf order
        contiguous = np.minimum(np.arange(length) * k // length, k - 1).astype(np.int64)
        root_like = Assignment(
            contiguous, k, assignment_objective(bins, contiguous, k, criterion)
        )
        init = km if km.objective <= root_like.objective else root_like
        final = coord_descent(init, bins, criterion, seed=int(rng.integers(0, 2**32)))
        if is_local_optimum(bins, final, criterion):
            local_ok += 1
        if final.objective <= km.objective + 1e-9 and final.objective <= root_like.objective + 1e-9:
            bound_ok += 1
        _, best_obj = brute_force_assignment(bins, k, criterion)
        gap = final.objective - best_obj
        max_gap = max(max_gap, gap)
        if gap <= 1e-9:
            matches += 1
    return OracleReport(trials, local_ok, bound_ok, matches, max_gap)


# ---------------------------------------------------------------------------
# Scaling smoke test


@dataclass(frozen=True)
class SmokeResult:
    base_seconds: float
    double_n_seconds: float
    double_d_seconds: float

    @property
    def n_ratio(self) -> float:
        return self.double_n_seconds / self.base_seconds

    @property
    def d_ratio(self) -> float:
        return self.double_d_seconds / self.base_seconds


def _time_root_split(ds: Dataset, hp: Hyperparams, reps: int) -> float:
    enc = one_hot_view(ds)
    sp = hp.split_params()
    n_classes = ds.n_classes
    idx = np.arange(ds.n_samples)
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        select_split(enc.matrix, enc.groups, idx, ds.y, sp, n_classes, node_seed=0)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def complexity_smoke(n: int = 10_000, d: int = 10, reps: int = 3, seed: int = 0,
                     hp: Hyperparams | None = None) -> SmokeResult:
    """Median wall time of one root split at (n,d), (2n,d) and (n,2d).

    The split search is linear in the feature count and n log n in the
    sample count, so both doubling ratios should stay near 2.
    """
    rng = np.random.default_rng(seed)
    if hp is None:
        hp = Hyperparams()
    base = _time_root_split(random_dataset(rng, n, d, 3), hp, reps)
    big_n = _time_root_split(random_dataset(rng, 2 * n, d, 3), hp, reps)
    big_d = _time_root_split(random_dataset(rng, n, 2 * d, 3), hp, reps)
    return SmokeResult(base, big_n, big_d)
