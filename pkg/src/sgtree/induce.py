"""Top-down tree induction: best-first growth over a priority queue keyed by
impurity improvement, with the usual stopping rules, plus the axis-aligned
baseline learner and the threshold-to-shape-function conversion."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .assign import AssignParams
from .data import Dataset, FeatureGroup, FeatureSchema, Task, encode_like, one_hot_view, schema_groups
from .impurity import TIE_TOL, Criterion
from .inner_tree import LEAF, InnerTree, InnerTreeParams
from .split import (
    ShapeFunction,
    SplitParams,
    SplitResult,
    node_contribution,
    select_axis_split,
    select_split,
    shape_eval,
)


@dataclass(frozen=True)
class Hyperparams:
    branching_factor: int = 2
    max_depth: int = 5
    min_impurity_improvement: float = 0.0  # on the weighted-impurity / N scale
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    criterion: Criterion = Criterion.GINI
    inner_max_leaf_nodes: int = 8
    inner_min_samples_leaf: float = 1.0
    branching_penalty: float = 0.0
    pair_limit: int = 0
    pair_penalty: float = 0.0
    h_directions: int = 8
    cd_sweeps: int = 10
    kmeans_iters: int = 100
    seed: int = 0
    max_internal_nodes: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.branching_factor < 2:
            raise ValueError("branching factor must be >= 2")

    def split_params(self) -> SplitParams:
        return SplitParams(
            branching_factor=self.branching_factor,
            pair_limit=self.pair_limit,
            pair_penalty=self.pair_penalty,
            h_directions=self.h_directions,
            criterion=self.criterion,
            inner=InnerTreeParams(
                max_leaf_nodes=self.inner_max_leaf_nodes,
                min_samples_leaf=self.inner_min_samples_leaf,
                criterion=self.criterion,
            ),
            assign_params=AssignParams(
                sweeps=self.cd_sweeps,
                kmeans_iters=self.kmeans_iters,
                branch_penalty=self.branching_penalty,
                seed=self.seed,
            ),
        )


@dataclass
class LeafNode:
    prediction: float  # class id for classification, mean for regression
    n_samples: int
    class_counts: np.ndarray | None = None


@dataclass
class ShapeNode:
    shape: ShapeFunction
    children: tuple[int, ...]
    pairs_considered: tuple[tuple[int, int], ...] = ()

    @property
    def arity(self) -> int:
        return self.shape.arity


@dataclass
class ThresholdNode:
    column: int  # encoded-column index
    threshold: float
    children: tuple[int, int]

    @property
    def arity(self) -> int:
        return 2


@dataclass
class SgtModel:
    """Arena-encoded tree. Internal nodes hold either a shape function or a
    plain threshold cut; leaves hold predictions with training support."""

    nodes: list
    schema: FeatureSchema
    task: Task
    class_names: tuple[str, ...] = ()
    branching_factor: int = 2
    root: int = 0
    target_mean: float = 0.0
    target_scale: float = 1.0
    groups: list[FeatureGroup] = field(default_factory=list)

    def __post_init__(self):
        if not self.groups:
            self.groups = schema_groups(self.schema)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def internal_ids(self) -> list[int]:
        return [i for i in self._reachable() if not isinstance(self.nodes[i], LeafNode)]

    def leaf_ids(self) -> list[int]:
        return [i for i in self._reachable() if isinstance(self.nodes[i], LeafNode)]

    def _reachable(self) -> list[int]:
        out = []
        stack = [self.root]
        while stack:
            i = stack.pop()
            out.append(i)
            node = self.nodes[i]
            if not isinstance(node, LeafNode):
                stack.extend(reversed(node.children))
        return out

    def depths(self) -> dict[int, int]:
        out = {self.root: 0}
        stack = [self.root]
        while stack:
            i = stack.pop()
            node = self.nodes[i]
            if not isinstance(node, LeafNode):
                for c in node.children:
                    out[c] = out[i] + 1
                    stack.append(c)
        return out


def _check_task(ds: Dataset, hp: Hyperparams) -> None:
    if ds.task is Task.CLASSIFICATION and not hp.criterion.for_classification:
        raise ValueError("mse criterion requires a regression dataset")
    if ds.task is Task.REGRESSION and hp.criterion.for_classification:
        raise ValueError(f"{hp.criterion.value} criterion requires a classification dataset")


def _leaf_from(idx: np.ndarray, y: np.ndarray, n_classes: int | None) -> LeafNode:
    if n_classes is not None:
        counts = np.bincount(y[idx].astype(np.int64), minlength=n_classes)
        return LeafNode(float(np.argmax(counts)), len(idx), counts)
    return LeafNode(float(np.mean(y[idx])), len(idx))


def _node_seed(seed: int, path: tuple[int, ...]) -> int:
    return int(np.random.SeedSequence([seed, 7, *path]).generate_state(1)[0])


@dataclass
class _Pending:
    node_id: int
    idx: np.ndarray
    depth: int
    path: tuple[int, ...]
    split: SplitResult | None
    improvement: float


def _grow(train: Dataset, hp: Hyperparams, mode: str) -> SgtModel:
    _check_task(train, hp)
    enc_view = one_hot_view(train)
    enc = enc_view.matrix
    groups = enc_view.groups
    y = train.y
    n_classes = train.n_classes if train.task is Task.CLASSIFICATION else None
    n_total = train.n_samples
    sp = hp.split_params()

    def search(idx, path) -> tuple[SplitResult | None, float]:
        unsplit = node_contribution(y[idx], n_classes, hp.criterion)
        if mode == "cart":
            axis = select_axis_split(enc, idx, y, hp.criterion, n_classes)
            if axis is None:
                return None, 0.0
            col, thr, objective = axis
            branches = (enc[idx, col] > thr).astype(np.int64)
            res = SplitResult(None, branches, objective, objective)
            res.axis = (col, thr)  # type: ignore[attr-defined]
            return res, (unsplit - objective) / n_total
        res = select_split(enc, groups, idx, y, sp, n_classes,
                           _node_seed(hp.seed, path), hp.threads)
        if not res.is_split:
            return None, 0.0
        return res, (unsplit - res.objective) / n_total

    nodes: list = [None]
    heap: list = []
    counter = 0
    root_split, root_imp = search(np.arange(n_total), ())
    heapq.heappush(
        heap, (-root_imp, counter, _Pending(0, np.arange(n_total), 0, (), root_split, root_imp))
    )
    counter += 1
    internal = 0

    while heap:
        _, _, rec = heapq.heappop(heap)
        idx = rec.idx
        make_leaf = (
            rec.split is None
            or rec.improvement < hp.min_impurity_improvement
            or rec.depth >= hp.max_depth
            or len(idx) < hp.min_samples_split
            or (hp.max_internal_nodes is not None and internal >= hp.max_internal_nodes)
        )
        if not make_leaf:
            parts = [idx[rec.split.branches == b] for b in range(_result_arity(rec.split))]
            if min(len(p) for p in parts) < hp.min_samples_leaf:
                make_leaf = True
        if make_leaf:
            nodes[rec.node_id] = _leaf_from(idx, y, n_classes)
            continue

        child_ids = []
        for b, part in enumerate(parts):
            child_ids.append(len(nodes))
            nodes.append(None)
            child_split, child_imp = search(part, rec.path + (b,))
            heapq.heappush(
                heap,
                (-child_imp, counter,
                 _Pending(child_ids[-1], part, rec.depth + 1, rec.path + (b,),
                          child_split, child_imp)),
            )
            counter += 1
        if mode == "cart":
            col, thr = rec.split.axis  # type: ignore[attr-defined]
            nodes[rec.node_id] = ThresholdNode(col, thr, tuple(child_ids))
        else:
            nodes[rec.node_id] = ShapeNode(rec.split.shape, tuple(child_ids),
                                           rec.split.pairs_considered)
        internal += 1

    return SgtModel(
        nodes=nodes,
        schema=train.schema,
        task=train.task,
        class_names=train.class_names,
        branching_factor=hp.branching_factor if mode == "shape" else 2,
        groups=groups,
    )


def _result_arity(res: SplitResult) -> int:
    return res.shape.arity if res.shape is not None else int(res.branches.max()) + 1


def fit(train: Dataset, hp: Hyperparams) -> SgtModel:
    """Grow a shape-function tree on the training data."""
    return _grow(train, hp, "shape")


def fit_cart(train: Dataset, hp: Hyperparams) -> SgtModel:
    """Grow the axis-aligned baseline: identical driver, but every split is a
    single-threshold binary cut on one encoded column."""
    return _grow(train, hp, "cart")


def route(model: SgtModel, enc: np.ndarray, start: int | None = None) -> np.ndarray:
    """Leaf node id reached by every encoded row, starting at `start`."""
    if start is None:
        start = model.root
    out = np.empty(len(enc), dtype=np.int64)
    stack = [(start, np.arange(len(enc)))]
    while stack:
        node_id, idx = stack.pop()
        if len(idx) == 0:
            continue
        node = model.nodes[node_id]
        if isinstance(node, LeafNode):
            out[idx] = node_id
            continue
        branches = node_branches(model, node, enc[idx])
        for b, child in enumerate(node.children):
            stack.append((child, idx[branches == b]))
    return out


def node_branches(model: SgtModel, node, enc_rows: np.ndarray) -> np.ndarray:
    """Branch decision of one internal node on encoded rows."""
    if isinstance(node, ThresholdNode):
        return (enc_rows[:, node.column] > node.threshold).astype(np.int64)
    return shape_eval(node.shape, enc_rows, model.groups)


def predict_encoded(model: SgtModel, enc: np.ndarray, start: int | None = None) -> np.ndarray:
    leaf_ids = route(model, enc, start)
    preds = np.array([model.nodes[i].prediction for i in leaf_ids])
    if model.task is Task.REGRESSION:
        return preds * model.target_scale + model.target_mean
    return preds.astype(np.int64)


def predict(model: SgtModel, ds: Dataset) -> np.ndarray:
    """Predictions for every sample; class ids for classification (indices
    into `model.class_names`), real values for regression."""
    if ds.schema != model.schema:
        raise ValueError("dataset schema does not match the model's schema")
    return predict_encoded(model, encode_like(ds, model.groups))


def predict_one(model: SgtModel, values) -> float:
    """Prediction for a single raw sample given as one value per feature
    (numeric value or categorical level name)."""
    if len(values) != len(model.schema):
        raise ValueError("sample length does not match schema")
    width = model.groups[-1].stop
    row = np.zeros((1, width))
    for g, v in zip(model.groups, values):
        if g.kind == "numeric":
            row[0, g.start] = float(v)
        else:
            if v not in g.levels:
                raise ValueError(f"unknown level {v!r} for feature {g.name!r}")
            row[0, g.start + g.levels.index(v)] = 1.0
    return predict_encoded(model, row)[0]


def from_cart(model: SgtModel) -> SgtModel:
    """Rewrite every threshold node as a two-bin shape function with the
    identity assignment; structure and predictions are preserved exactly."""
    nodes = []
    for node in model.nodes:
        if isinstance(node, LeafNode):
            nodes.append(LeafNode(node.prediction, node.n_samples,
                                  None if node.class_counts is None
                                  else node.class_counts.copy()))
        elif isinstance(node, ThresholdNode):
            group = _group_of_column(model.groups, node.column)
            stump = InnerTree(
                feature=np.array([node.column - group.start, LEAF, LEAF]),
                threshold=np.array([node.threshold, 0.0, 0.0]),
                left=np.array([1, -1, -1]),
                right=np.array([2, -1, -1]),
                bin_id=np.array([-1, 0, 1]),
                n_columns=group.width,
            )
            sf = ShapeFunction(group.index, stump, np.array([0, 1]), 2)
            nodes.append(ShapeNode(sf, node.children))
        elif isinstance(node, ShapeNode):
            raise ValueError("model already uses shape functions")
        else:
            nodes.append(node)
    return SgtModel(
        nodes=nodes,
        schema=model.schema,
        task=model.task,
        class_names=model.class_names,
        branching_factor=model.branching_factor,
        root=model.root,
        target_mean=model.target_mean,
        target_scale=model.target_scale,
        groups=model.groups,
    )


def _group_of_column(groups: list[FeatureGroup], column: int) -> FeatureGroup:
    for g in groups:
        if g.start <= column < g.stop:
            return g
    raise ValueError(f"encoded column {column} outside every group")


def accuracy(model: SgtModel, ds: Dataset) -> float:
    return float(np.mean(predict(model, ds) == ds.y))


def mse(model: SgtModel, ds: Dataset) -> float:
    return float(np.mean(np.square(predict(model, ds) - ds.y)))
