"""Bin-to-branch assignment: map the L bins of a binning tree onto k output
branches so the weighted impurity of the induced branch statistics is
minimized. Initialized from weighted k-means over the bin distributions (or
from the binning tree's own root split for k=2), then polished by coordinate
descent with incremental statistic updates."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .impurity import TIE_TOL, Criterion, class_weighted_vector, reg_weighted_vector
from .inner_tree import BinTable


@dataclass(frozen=True)
class Assignment:
    """A bin -> branch lookup plus the weighted impurity it induces."""

    labels: np.ndarray  # (L,) ints in {0..arity-1}
    arity: int
    objective: float

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if len(labels) and (labels.min() < 0 or labels.max() >= self.arity):
            raise ValueError("assignment labels must lie in [0, arity)")
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class AssignParams:
    sweeps: int = 10  # coordinate-descent passes over the bins
    kmeans_iters: int = 100
    branch_penalty: float = 0.0  # cost per branch beyond the second
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1 or self.kmeans_iters < 1:
            raise ValueError("sweeps and kmeans_iters must be >= 1")
        if self.branch_penalty < 0:
            raise ValueError("branch_penalty must be >= 0")


def _branch_class_counts(bins: BinTable, labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((k, bins.class_counts.shape[1]), dtype=np.int64)
    np.add.at(out, labels, bins.class_counts)
    return out


def _branch_reg(bins: BinTable, labels: np.ndarray, k: int):
    count = np.bincount(labels, weights=bins.reg_count, minlength=k)
    total = np.bincount(labels, weights=bins.reg_total, minlength=k)
    sum_sq = np.bincount(labels, weights=bins.reg_sum_sq, minlength=k)
    return count, total, sum_sq


def assignment_objective(bins: BinTable, labels: np.ndarray, k: int,
                         criterion: Criterion) -> float:
    """Weighted impurity of the branch partition induced by `labels`,
    recomputed from scratch."""
    labels = np.asarray(labels, dtype=np.int64)
    if bins.is_classification:
        return float(class_weighted_vector(_branch_class_counts(bins, labels, k),
                                           criterion).sum())
    return float(reg_weighted_vector(*_branch_reg(bins, labels, k)).sum())


def _nearest_nonzero_labels(labels: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Re-point zero-weight bins at the label of the nearest nonzero bin in
    leaf order (ties to the left); they carry no impurity but must still
    route unseen samples deterministically."""
    out = labels.copy()
    nz = np.nonzero(weights > 0)[0]
    for b in np.nonzero(weights <= 0)[0]:
        j = nz[np.argmin(np.abs(nz - b))]
        out[b] = labels[j]
    return out


def weighted_kmeans(bins: BinTable, k: int, criterion: Criterion,
                    iters: int = 100, seed: int = 0) -> Assignment:
    """Lloyd iterations on the bin distributions (bin means for regression),
    weighted by bin sample counts, seeded k-means++ style.

    The returned objective is the weighted impurity of the induced branches,
    not the k-means distortion. With fewer nonempty bins than k the result
    simply uses fewer effective branches.
    """
    if k < 2:
        raise ValueError("need at least two branches")
    rng = np.random.default_rng(seed)
    pts = bins.points()
    w = bins.weights.astype(np.float64)
    nz = np.nonzero(w > 0)[0]
    if len(nz) == 0:
        raise ValueError("all bins are empty")
    p = pts[nz]
    pw = w[nz]
    m = len(nz)
    k_eff = min(k, m)

    if k_eff == m:
        local = np.arange(m, dtype=np.int64)
    else:
        centers = np.empty((k_eff, p.shape[1]))
        first = rng.choice(m, p=pw / pw.sum())
        centers[0] = p[first]
        d2 = np.square(p - centers[0]).sum(axis=1)
        for j in range(1, k_eff):
            mass = pw * d2
            total = mass.sum()
            if total <= 0:
                # all remaining points coincide with a center: take the
                # lowest-index point not yet chosen as a center
                chosen = {int(np.argmin(np.square(p - centers[i]).sum(axis=1)))
                          for i in range(j)}
                pick = next(i for i in range(m) if i not in chosen)
            else:
                pick = rng.choice(m, p=mass / total)
            centers[j] = p[pick]
            d2 = np.minimum(d2, np.square(p - centers[j]).sum(axis=1))

        local = np.zeros(m, dtype=np.int64)
        for _ in range(iters):
            dist = np.square(p[:, None, :] - centers[None, :, :]).sum(axis=2)
            new = np.argmin(dist, axis=1)
            for j in range(k_eff):  # repair empty clusters
                if not (new == j).any():
                    own = dist[np.arange(m), new]
                    new[int(np.argmax(own))] = j
            if (new == local).all():
                break
            local = new
            for j in range(k_eff):
                mask = local == j
                centers[j] = (pw[mask, None] * p[mask]).sum(axis=0) / pw[mask].sum()

    labels = np.zeros(bins.n_bins, dtype=np.int64)
    labels[nz] = local
    labels = _nearest_nonzero_labels(labels, w)
    return Assignment(labels, k, assignment_objective(bins, labels, k, criterion))


def coord_descent(init: Assignment, bins: BinTable, criterion: Criterion,
                  sweeps: int = 10, seed: int = 0) -> Assignment:
    """Greedy single-bin reassignment sweeps in seed-shuffled order.

    Each visit tries every branch for the bin using incremental add/remove
    of its statistics and commits only strictly improving moves, so the
    objective is non-increasing and ties keep the incumbent branch. Sweeps
    stop early once a full pass commits nothing.
    """
    k = init.arity
    labels = init.labels.copy()
    w = bins.weights
    rng = np.random.default_rng(seed)

    if bins.is_classification:
        branch = _branch_class_counts(bins, labels, k).astype(np.float64)
        rows = bins.class_counts.astype(np.float64)

        def row_wh(row):
            return float(class_weighted_vector(row[None, :], criterion)[0])

    else:
        counts, totals, sums = _branch_reg(bins, labels, k)
        branch = np.column_stack([counts, totals, sums])
        rows = np.column_stack([bins.reg_count, bins.reg_total, bins.reg_sum_sq])

        def row_wh(row):
            return float(reg_weighted_vector(row[:1], row[1:2], row[2:3])[0])

    contrib = np.array([row_wh(branch[b]) for b in range(k)])
    objective = float(contrib.sum())

    for _ in range(sweeps):
        changed = False
        for b_idx in rng.permutation(bins.n_bins):
            if w[b_idx] <= 0:
                continue
            cur = int(labels[b_idx])
            removed = branch[cur] - rows[b_idx]
            removed_wh = row_wh(removed)
            without = objective - contrib[cur] + removed_wh
            best_b, best_obj = cur, objective
            for b in range(k):
                if b == cur:
                    continue
                cand = without - contrib[b] + row_wh(branch[b] + rows[b_idx])
                if cand < best_obj - TIE_TOL:
                    best_b, best_obj = b, cand
            if best_b != cur:
                branch[cur] = removed
                contrib[cur] = removed_wh
                branch[best_b] += rows[b_idx]
                contrib[best_b] = row_wh(branch[best_b])
                labels[b_idx] = best_b
                objective = float(contrib.sum())
                changed = True
        if not changed:
            break

    return Assignment(labels, k, assignment_objective(bins, labels, k, criterion))


def select_arity(bins: BinTable, root_init: Assignment | None, max_branches: int,
                 criterion: Criterion, params: AssignParams) -> Assignment:
    """Optimize an assignment for each arity k = 2..K and keep the one with
    the lowest penalized objective (impurity + penalty*(k-2), ties to the
    smaller k). The binning tree's root split competes with k-means as the
    k=2 initialization."""
    if max_branches < 2:
        raise ValueError("branching factor must be >= 2")
    seeds = np.random.SeedSequence(params.seed).generate_state(2 * (max_branches - 1))
    best = None
    best_pen = np.inf
    for i, k in enumerate(range(2, max_branches + 1)):
        km = weighted_kmeans(bins, k, criterion, params.kmeans_iters, int(seeds[2 * i]))
        init = km
        if k == 2 and root_init is not None and root_init.objective < km.objective:
            init = root_init
        cand = coord_descent(init, bins, criterion, params.sweeps, int(seeds[2 * i + 1]))
        penalized = cand.objective + params.branch_penalty * (k - 2)
        if penalized < best_pen - TIE_TOL:
            best, best_pen = cand, penalized
    return best


def with_seed(params: AssignParams, seed: int) -> AssignParams:
    return replace(params, seed=seed)
