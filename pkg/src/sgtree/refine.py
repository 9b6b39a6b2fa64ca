"""Alternating post-refinement: revisit internal nodes deepest-first, refit
each node's branch decision against the predictions of the subtrees below
it, prune nodes whose removal does not hurt the size-penalized training
objective, and refresh leaf predictions from the routed data."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .data import Dataset, NUMERIC, Task, encode_like
from .impurity import Criterion
from .inner_tree import InnerTreeParams, extract_bin_stats, fit_bivariate, fit_univariate
from .induce import (
    Hyperparams,
    LeafNode,
    SgtModel,
    ShapeNode,
    ThresholdNode,
    node_branches,
    predict_encoded,
    route,
)
from .split import ShapeFunction, local_matrix, shape_eval

_SE_TOL = 1e-9


@dataclass(frozen=True)
class TaoParams:
    passes: int = 5
    leaf_penalty: float = 0.0  # objective weight per leaf when pruning
    seed: int = 0

    def __post_init__(self):
        if self.passes < 1:
            raise ValueError("passes must be >= 1")
        if self.leaf_penalty < 0:
            raise ValueError("leaf_penalty must be >= 0")


@dataclass
class CareSet:
    """Samples that can still influence a node's refit: those for which some
    but not all branches lead to a correct (or squared-error-minimal)
    subtree prediction."""

    indices: np.ndarray  # training rows reaching the node, filtered
    valid: np.ndarray  # (m, arity) bool, valid branches per sample
    sq_err: np.ndarray | None = None  # (m, arity), regression only

    def __len__(self) -> int:
        return len(self.indices)


def pseudolabel_accuracy(sf: ShapeFunction, care: CareSet, enc: np.ndarray, groups) -> float:
    """Fraction of distinct care samples the decision routes to one of their
    valid branches. An empty care set counts as 1.0 (nothing to fix)."""
    if len(care) == 0:
        return 1.0
    branches = shape_eval(sf, enc[care.indices], groups)
    return float(np.mean(care.valid[np.arange(len(care)), branches]))


def _care_set(model: SgtModel, node_id: int, enc: np.ndarray, y: np.ndarray,
              reach: np.ndarray) -> CareSet:
    node = model.nodes[node_id]
    k = node.arity
    rows = enc[reach]
    preds = np.column_stack(
        [predict_encoded(model, rows, start=child) for child in node.children]
    )
    if model.task is Task.CLASSIFICATION:
        valid = preds == y[reach][:, None]
        se = None
    else:
        se = np.square(preds - y[reach][:, None])
        valid = se <= se.min(axis=1, keepdims=True) + _SE_TOL
    n_valid = valid.sum(axis=1)
    keep = (n_valid > 0) & (n_valid < k)
    return CareSet(reach[keep], valid[keep], None if se is None else se[keep])


def _majority_assignment(bins, k: int) -> np.ndarray:
    """Bin -> most frequent pseudolabel; empty bins copy the nearest nonzero
    bin in leaf order."""
    counts = bins.class_counts
    labels = np.argmax(counts, axis=1).astype(np.int64)
    weights = counts.sum(axis=1)
    nz = np.nonzero(weights > 0)[0]
    for b in np.nonzero(weights == 0)[0]:
        labels[b] = labels[nz[np.argmin(np.abs(nz - b))]]
    return labels


def _fit_decision(enc_dup: np.ndarray, pl: np.ndarray, target, k: int,
                  inner: InnerTreeParams, groups, h_directions: int) -> ShapeFunction | None:
    """Fit one candidate decision function on the duplicated pseudolabeled
    rows: an inner tree predicting the branch, realized as bins plus a
    majority-label assignment."""
    if isinstance(target, tuple):
        g1, g2 = groups[target[0]], groups[target[1]]
        if g1.kind != NUMERIC or g2.kind != NUMERIC:
            return None
        tree = fit_bivariate(enc_dup[:, g1.start], enc_dup[:, g2.start], pl,
                             h_directions, inner, k)
    else:
        g = groups[target]
        tree = fit_univariate(enc_dup[:, g.start : g.stop], pl, inner, k)
    local = local_matrix(target, tree, enc_dup, groups)
    bins = extract_bin_stats(tree, local, pl, k)
    return ShapeFunction(target, tree, _majority_assignment(bins, k), k)


def _routing_score(branches: np.ndarray, care: CareSet) -> float:
    """Higher is better: care-set validity fraction for classification,
    negated routed squared error for regression."""
    if care.sq_err is None:
        return float(np.mean(care.valid[np.arange(len(care)), branches]))
    return -float(care.sq_err[np.arange(len(care)), branches].sum())


def _leaf_from_targets(model: SgtModel, y_rows: np.ndarray) -> LeafNode:
    """Leaf payload from original-unit targets; regression predictions are
    stored in the model's (possibly standardized) internal scale."""
    if model.task is Task.CLASSIFICATION:
        counts = np.bincount(y_rows.astype(np.int64), minlength=model.n_classes)
        return LeafNode(float(np.argmax(counts)), len(y_rows), counts)
    scaled = (float(np.mean(y_rows)) - model.target_mean) / model.target_scale
    return LeafNode(scaled, len(y_rows))


def _objective(model: SgtModel, enc: np.ndarray, y: np.ndarray, leaf_penalty: float) -> float:
    """Training error (misclassification count, or sum of squared errors)
    plus leaf_penalty per leaf."""
    preds = predict_encoded(model, enc)
    if model.task is Task.CLASSIFICATION:
        err = float(np.sum(preds != y))
    else:
        err = float(np.sum(np.square(preds - y)))
    return err + leaf_penalty * len(model.leaf_ids())


def _refresh_leaves(model: SgtModel, enc: np.ndarray, y: np.ndarray) -> None:
    leaf_of = route(model, enc)
    for leaf_id in model.leaf_ids():
        idx = np.nonzero(leaf_of == leaf_id)[0]
        if len(idx) == 0:
            continue  # unreached leaves keep their previous prediction
        model.nodes[leaf_id] = _leaf_from_targets(model, y[idx])


def _parent_map(model: SgtModel) -> dict[int, tuple[int, int]]:
    out = {}
    for i in model.internal_ids():
        for slot, child in enumerate(model.nodes[i].children):
            out[child] = (i, slot)
    return out


def _rewire(model: SgtModel, node_id: int, replacement: int) -> None:
    if node_id == model.root:
        model.root = replacement
        return
    parent, slot = _parent_map(model)[node_id]
    node = model.nodes[parent]
    children = list(node.children)
    children[slot] = replacement
    node.children = tuple(children)


def _reach_map(model: SgtModel, enc: np.ndarray) -> dict[int, np.ndarray]:
    out = {}
    stack = [(model.root, np.arange(len(enc)))]
    while stack:
        node_id, idx = stack.pop()
        out[node_id] = idx
        node = model.nodes[node_id]
        if isinstance(node, LeafNode):
            continue
        branches = node_branches(model, node, enc[idx])
        for b, child in enumerate(node.children):
            stack.append((child, idx[branches == b]))
    return out


def _first_leaf_below(model: SgtModel, node_id: int) -> int:
    node = model.nodes[node_id]
    while not isinstance(node, LeafNode):
        node_id = node.children[0]
        node = model.nodes[node_id]
    return node_id


def _prune_pass(model: SgtModel, enc: np.ndarray, y: np.ndarray, leaf_penalty: float) -> bool:
    """Replace internal nodes by their majority child or by a leaf whenever
    that does not worsen error + leaf_penalty * leaves. Deepest first."""
    changed = False
    initial_depths = model.depths()
    order = sorted(model.internal_ids(), key=lambda i: (-initial_depths[i], i))
    for node_id in order:
        if node_id not in model.depths():  # detached by an earlier prune
            continue
        node = model.nodes[node_id]
        if isinstance(node, LeafNode):
            continue
        base = _objective(model, enc, y, leaf_penalty)
        reach = _reach_map(model, enc)[node_id]

        if len(reach) > 0:
            leaf = _leaf_from_targets(model, y[reach])
        else:
            proto = model.nodes[_first_leaf_below(model, node_id)]
            leaf = LeafNode(proto.prediction, 0,
                            None if proto.class_counts is None else proto.class_counts * 0)
        leaf_id = len(model.nodes)
        model.nodes.append(leaf)
        _rewire(model, node_id, leaf_id)
        leaf_obj = _objective(model, enc, y, leaf_penalty)
        _rewire(model, leaf_id, node_id)

        if len(reach) > 0:
            branches = node_branches(model, node, enc[reach])
            sizes = np.bincount(branches, minlength=node.arity)
        else:
            sizes = np.zeros(node.arity, dtype=np.int64)
        major = node.children[int(np.argmax(sizes))]
        _rewire(model, node_id, major)
        child_obj = _objective(model, enc, y, leaf_penalty)
        _rewire(model, major, node_id)

        if min(leaf_obj, child_obj) <= base:
            if leaf_obj <= child_obj:
                _rewire(model, node_id, leaf_id)
            else:
                _rewire(model, node_id, major)
            changed = True
    return changed


def tao_refine(model: SgtModel, train: Dataset, tp: TaoParams, hp: Hyperparams) -> SgtModel:
    """Alternate node refits (deepest first) with pruning until the pass
    budget is spent or a pass changes nothing. Returns a refined copy; depth
    never grows and the size-penalized training objective never worsens."""
    if train.schema != model.schema:
        raise ValueError("dataset schema does not match the model's schema")
    for node in model.nodes:
        if isinstance(node, ThresholdNode):
            raise ValueError("refinement expects shape-function nodes; convert the model first")
    work = copy.deepcopy(model)
    enc = encode_like(train, work.groups)
    y = train.y.astype(np.int64) if work.task is Task.CLASSIFICATION else train.y.astype(np.float64)
    inner = InnerTreeParams(
        max_leaf_nodes=hp.inner_max_leaf_nodes,
        min_samples_leaf=hp.inner_min_samples_leaf,
        criterion=hp.criterion if hp.criterion.for_classification else Criterion.GINI,
    )

    for _ in range(tp.passes):
        changed = False
        depths = work.depths()
        order = sorted(work.internal_ids(), key=lambda i: (-depths[i], i))
        for node_id in order:
            node = work.nodes[node_id]
            reach = _reach_map(work, enc)[node_id]
            if len(reach) == 0:
                continue
            care = _care_set(work, node_id, enc, y, reach)
            if len(care) == 0:
                continue
            k = node.arity
            dup_rows, dup_branch = np.nonzero(care.valid)
            enc_dup = enc[care.indices[dup_rows]]
            pl = dup_branch.astype(np.int64)

            targets: list = [g.index for g in work.groups]
            targets.extend(node.pairs_considered)
            if isinstance(node.shape.group, tuple) and node.shape.group not in node.pairs_considered:
                targets.append(node.shape.group)

            incumbent = _routing_score(node_branches(work, node, enc[care.indices]), care)
            best_sf = None
            best_score = incumbent
            for target in targets:
                sf = _fit_decision(enc_dup, pl, target, k, inner, work.groups,
                                   hp.h_directions)
                if sf is None:
                    continue
                score = _routing_score(shape_eval(sf, enc[care.indices], work.groups), care)
                if score > best_score + _SE_TOL:
                    best_sf, best_score = sf, score
            if best_sf is not None:
                work.nodes[node_id] = ShapeNode(best_sf, node.children, node.pairs_considered)
                changed = True

        _refresh_leaves(work, enc, y)
        if _prune_pass(work, enc, y, tp.leaf_penalty):
            changed = True
        _refresh_leaves(work, enc, y)
        if not changed:
            break
    return work
