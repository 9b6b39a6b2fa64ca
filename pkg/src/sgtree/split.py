"""Node-level split selection: fit a shape function per candidate feature,
keep the best, and optionally promote bivariate candidates chosen by the
pairwise refinement score."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .assign import Assignment, AssignParams, assignment_objective, select_arity, with_seed
from .data import NUMERIC, EncodedView, FeatureGroup
from .impurity import TIE_TOL, Criterion, class_weighted_vector, reg_weighted_vector
from .inner_tree import (
    InnerTree,
    InnerTreeParams,
    _column_scan,
    bivariate_matrix,
    extract_bin_stats,
    fit_bivariate,
    fit_univariate,
    root_assignment,
)


@dataclass(frozen=True)
class ShapeFunction:
    """A fitted branch decision: binning tree composed with a bin->branch
    lookup, over one feature group or a pair of numeric groups."""

    group: int | tuple[int, int]
    tree: InnerTree
    assignment: np.ndarray
    arity: int

    @property
    def is_bivariate(self) -> bool:
        return isinstance(self.group, tuple)


@dataclass(frozen=True)
class SplitParams:
    branching_factor: int = 2
    pair_limit: int = 0  # 0 disables bivariate candidates
    pair_penalty: float = 0.0  # additive cost of choosing a bivariate split
    h_directions: int = 8
    criterion: Criterion = Criterion.GINI
    inner: InnerTreeParams = field(default_factory=InnerTreeParams)
    assign_params: AssignParams = field(default_factory=AssignParams)

    def __post_init__(self):
        if self.branching_factor < 2:
            raise ValueError("branching factor must be >= 2")
        if self.pair_limit < 0 or self.pair_penalty < 0:
            raise ValueError("pair_limit and pair_penalty must be >= 0")


@dataclass
class SplitResult:
    """Outcome of the node-level search. `shape` is None when no admissible
    split exists; then both objectives equal the node's unsplit impurity."""

    shape: ShapeFunction | None
    branches: np.ndarray | None  # branch id per node sample
    objective: float  # weighted impurity of the induced partition
    penalized: float  # objective + pair penalty if a bivariate split won
    pairs_considered: tuple[tuple[int, int], ...] = ()

    @property
    def is_split(self) -> bool:
        return self.shape is not None


def local_matrix(group, tree: InnerTree, enc: np.ndarray, groups: list[FeatureGroup]) -> np.ndarray:
    """Columns the shape function's binning tree routes on, built from the
    encoded matrix."""
    if isinstance(group, tuple):
        g1, g2 = groups[group[0]], groups[group[1]]
        return bivariate_matrix(enc[:, g1.start], enc[:, g2.start], tree.directions)
    g = groups[group]
    return enc[:, g.start : g.stop]


def shape_eval(sf: ShapeFunction, enc: np.ndarray, groups: list[FeatureGroup]) -> np.ndarray:
    """Branch index in {0..arity-1} for every encoded row."""
    return sf.assignment[sf.tree.apply(local_matrix(sf.group, sf.tree, enc, groups))]


def node_contribution(y: np.ndarray, n_classes: int | None, criterion: Criterion) -> float:
    """Unsplit weighted impurity of a sample set."""
    if n_classes is not None:
        counts = np.bincount(np.asarray(y, dtype=np.int64), minlength=n_classes)
        return float(class_weighted_vector(counts[None, :], criterion)[0])
    y = np.asarray(y, dtype=np.float64)
    return float(reg_weighted_vector(np.array([len(y)]), np.array([y.sum()]),
                                     np.array([np.square(y).sum()]))[0])


def _compact_assignment(labels: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, int]:
    """Renumber branches to 0..k'-1 keeping only branches some nonempty bin
    maps to; zero-weight bins inherit the nearest nonzero bin's branch."""
    nz = np.nonzero(weights > 0)[0]
    used = np.unique(labels[nz])
    remap = {int(b): i for i, b in enumerate(used)}
    out = np.empty_like(labels)
    for b in range(len(labels)):
        if weights[b] > 0:
            out[b] = remap[int(labels[b])]
        else:
            j = nz[np.argmin(np.abs(nz - b))]
            out[b] = remap[int(labels[j])]
    return out, len(used)


def fit_shape_function(
    enc: np.ndarray,
    groups: list[FeatureGroup],
    idx: np.ndarray,
    y: np.ndarray,
    target,
    params: SplitParams,
    n_classes: int | None,
    seed: int,
) -> SplitResult:
    """Two-stage fit for one feature (or pair): bin with an inner tree, then
    optimize the bin->branch assignment and pick the arity."""
    sub_y = y[idx]
    unsplit = node_contribution(sub_y, n_classes, params.criterion)
    inner = replace(params.inner, criterion=params.criterion)

    if isinstance(target, tuple):
        g1, g2 = groups[target[0]], groups[target[1]]
        if g1.kind != NUMERIC or g2.kind != NUMERIC:
            raise ValueError("bivariate shape functions need numeric features")
        tree = fit_bivariate(enc[idx, g1.start], enc[idx, g2.start], sub_y,
                             params.h_directions, inner, n_classes)
    else:
        g = groups[target]
        tree = fit_univariate(enc[idx][:, g.start : g.stop], sub_y, inner, n_classes)

    if tree.n_leaves < 2:
        return SplitResult(None, None, unsplit, unsplit)

    local = local_matrix(target, tree, enc[idx], groups)
    bins = extract_bin_stats(tree, local, sub_y, n_classes)
    root_labels = root_assignment(tree)
    root_init = Assignment(
        root_labels, 2, assignment_objective(bins, root_labels, 2, params.criterion)
    )
    chosen = select_arity(bins, root_init, params.branching_factor, params.criterion,
                          with_seed(params.assign_params, seed))
    labels, arity = _compact_assignment(chosen.labels, bins.weights)
    if arity < 2:
        return SplitResult(None, None, unsplit, unsplit)
    objective = assignment_objective(bins, labels, arity, params.criterion)
    sf = ShapeFunction(target, tree, labels, arity)
    branches = labels[tree.apply(local)]
    return SplitResult(sf, branches, objective, objective)


def score_pair(branches_1: np.ndarray, branches_2: np.ndarray, y: np.ndarray,
               criterion: Criterion, n_classes: int | None) -> float:
    """Refinement gain of intersecting two branch partitions of the same
    samples: min of their weighted impurities minus the weighted impurity of
    all pairwise intersections, computed in one scan."""
    k1 = int(branches_1.max()) + 1
    k2 = int(branches_2.max()) + 1
    joint = branches_1 * k2 + branches_2
    if n_classes is not None:
        y = np.asarray(y, dtype=np.int64)
        c1 = np.zeros((k1, n_classes), dtype=np.int64)
        c2 = np.zeros((k2, n_classes), dtype=np.int64)
        cx = np.zeros((k1 * k2, n_classes), dtype=np.int64)
        np.add.at(c1, (branches_1, y), 1)
        np.add.at(c2, (branches_2, y), 1)
        np.add.at(cx, (joint, y), 1)
        l1 = float(class_weighted_vector(c1, criterion).sum())
        l2 = float(class_weighted_vector(c2, criterion).sum())
        lx = float(class_weighted_vector(cx, criterion).sum())
    else:
        y = np.asarray(y, dtype=np.float64)

        def part_obj(b, k):
            count = np.bincount(b, minlength=k).astype(np.float64)
            total = np.bincount(b, weights=y, minlength=k)
            sq = np.bincount(b, weights=np.square(y), minlength=k)
            return float(reg_weighted_vector(count, total, sq).sum())

        l1 = part_obj(branches_1, k1)
        l2 = part_obj(branches_2, k2)
        lx = part_obj(joint, k1 * k2)
    return min(l1, l2) - lx


def _target_seed(node_seed: int, code) -> int:
    return int(np.random.SeedSequence([node_seed, *code]).generate_state(1)[0])


def select_split(
    enc: np.ndarray,
    groups: list[FeatureGroup],
    idx: np.ndarray,
    y: np.ndarray,
    params: SplitParams,
    n_classes: int | None,
    node_seed: int = 0,
    threads: int = 1,
) -> SplitResult:
    """Line search over univariate shape functions, then over the top-scoring
    feature pairs when bivariate candidates are enabled. Ties prefer the
    univariate candidate, then the lower feature index."""
    sub_y = y[idx]
    unsplit = node_contribution(sub_y, n_classes, params.criterion)

    def fit_one(d):
        return fit_shape_function(enc, groups, idx, y, d, params, n_classes,
                                  _target_seed(node_seed, (1, d)))

    order = range(len(groups))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            uni = list(pool.map(fit_one, order))
    else:
        uni = [fit_one(d) for d in order]

    best = None
    best_d = -1
    for d, res in enumerate(uni):
        if not res.is_split:
            continue
        if best is None or res.objective < best.objective - TIE_TOL:
            best, best_d = res, d

    pairs_considered: tuple[tuple[int, int], ...] = ()
    if params.pair_limit > 0:
        numeric = [g.index for g in groups if g.kind == NUMERIC]
        scored = []
        for d1, d2 in combinations(numeric, 2):
            r1, r2 = uni[d1], uni[d2]
            if not (r1.is_split and r2.is_split):
                continue
            delta = score_pair(r1.branches, r2.branches, sub_y, params.criterion, n_classes)
            scored.append((delta, d1, d2))
        scored.sort(key=lambda t: (-t[0], t[1], t[2]))
        top = [(d1, d2) for delta, d1, d2 in scored[: params.pair_limit] if delta > TIE_TOL]
        pairs_considered = tuple(top)

        def fit_pair(pair):
            return fit_shape_function(enc, groups, idx, y, pair, params, n_classes,
                                      _target_seed(node_seed, (2, *pair)))

        if threads > 1 and top:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                bi_results = list(pool.map(fit_pair, top))
        else:
            bi_results = [fit_pair(pair) for pair in top]

        for res in bi_results:
            if not res.is_split:
                continue
            penalized = res.objective + params.pair_penalty
            if best is None or penalized < best.penalized - TIE_TOL:
                best = SplitResult(res.shape, res.branches, res.objective, penalized,
                                   pairs_considered)

    if best is None:
        return SplitResult(None, None, unsplit, unsplit, pairs_considered)
    if not best.shape.is_bivariate:
        best = SplitResult(best.shape, best.branches, best.objective, best.objective,
                           pairs_considered)
    return best


def select_axis_split(enc: np.ndarray, idx: np.ndarray, y: np.ndarray,
                      criterion: Criterion, n_classes: int | None):
    """Best single-threshold binary cut over all encoded columns: the
    classic axis-aligned baseline split. Returns (column, threshold,
    objective) or None when no column admits an impurity-reducing cut."""
    sub_y = y[idx]
    if n_classes is not None:
        sub_y = np.asarray(sub_y, dtype=np.int64)
    parent = node_contribution(sub_y, n_classes, criterion)
    if parent <= TIE_TOL:
        return None
    best = None
    for col in range(enc.shape[1]):
        res = _column_scan(enc[idx, col], sub_y, n_classes, criterion, 1, parent)
        if res is None:
            continue
        gain, thr = res
        if best is None or gain > best[0] + TIE_TOL:
            best = (gain, col, thr)
    if best is None:
        return None
    gain, col, thr = best
    return col, thr, parent - gain
