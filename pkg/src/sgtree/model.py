"""Model persistence (versioned JSON text), model statistics, and DOT-format
export for visualization."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, ColumnSpec, FeatureSchema, NUMERIC, Task
from .induce import LeafNode, SgtModel, ShapeNode, ThresholdNode
from .inner_tree import InnerTree, leaf_intervals, leaf_rules
from .split import ShapeFunction

FORMAT_NAME = "sgt-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Document does not parse or validate as a model file."""


def _tree_doc(tree: InnerTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": [repr(float(t)) for t in tree.threshold],
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "bin_id": tree.bin_id.tolist(),
        "n_columns": tree.n_columns,
        "directions": None if tree.directions is None
        else [repr(float(a)) for a in tree.directions],
    }


def _tree_from_doc(doc: dict) -> InnerTree:
    return InnerTree(
        feature=np.asarray(doc["feature"], dtype=np.int64),
        threshold=np.asarray([float(t) for t in doc["threshold"]], dtype=np.float64),
        left=np.asarray(doc["left"], dtype=np.int64),
        right=np.asarray(doc["right"], dtype=np.int64),
        bin_id=np.asarray(doc["bin_id"], dtype=np.int64),
        n_columns=int(doc["n_columns"]),
        directions=None if doc["directions"] is None
        else tuple(float(a) for a in doc["directions"]),
    )


def _node_doc(node) -> dict:
    if isinstance(node, LeafNode):
        doc = {"kind": "leaf", "prediction": repr(float(node.prediction)),
               "n_samples": node.n_samples}
        if node.class_counts is not None:
            doc["class_counts"] = node.class_counts.tolist()
        return doc
    if isinstance(node, ThresholdNode):
        return {"kind": "threshold", "column": node.column,
                "threshold": repr(float(node.threshold)), "children": list(node.children)}
    if isinstance(node, ShapeNode):
        sf = node.shape
        return {
            "kind": "shape",
            "group": list(sf.group) if isinstance(sf.group, tuple) else sf.group,
            "arity": sf.arity,
            "assignment": sf.assignment.tolist(),
            "tree": _tree_doc(sf.tree),
            "children": list(node.children),
            "pairs_considered": [list(p) for p in node.pairs_considered],
        }
    raise ModelFormatError(f"unknown node type {type(node).__name__}")


def serialize(model: SgtModel) -> str:
    """Self-describing text document; thresholds and predictions are written
    as exact shortest round-trip decimals so routing is bit-identical after
    reload. Only reachable nodes are emitted, renumbered depth-first."""
    order = model._reachable()
    remap = {old: new for new, old in enumerate(order)}
    nodes = []
    for old in order:
        doc = _node_doc(model.nodes[old])
        if "children" in doc:
            doc["children"] = [remap[c] for c in doc["children"]]
        nodes.append(doc)
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "task": model.task.value,
        "branching_factor": model.branching_factor,
        "class_names": list(model.class_names),
        "target_mean": repr(float(model.target_mean)),
        "target_scale": repr(float(model.target_scale)),
        "schema": [
            {"name": c.name, "kind": c.kind, "levels": list(c.levels)}
            for c in model.schema.columns
        ],
        "root": 0,
        "nodes": nodes,
    }
    return json.dumps(doc, indent=1)


def deserialize(text: str) -> SgtModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a valid model document: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError("missing or wrong format marker")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format version {doc.get('version')!r}, want {FORMAT_VERSION}"
        )
    try:
        schema = FeatureSchema(tuple(
            ColumnSpec(c["name"], c["kind"], tuple(c["levels"])) for c in doc["schema"]
        ))
        task = Task(doc["task"])
        nodes = [_node_from_doc(d) for d in doc["nodes"]]
        model = SgtModel(
            nodes=nodes,
            schema=schema,
            task=task,
            class_names=tuple(doc["class_names"]),
            branching_factor=int(doc["branching_factor"]),
            root=int(doc["root"]),
            target_mean=float(doc["target_mean"]),
            target_scale=float(doc["target_scale"]),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from None
    _validate(model)
    return model


def _node_from_doc(doc: dict):
    kind = doc["kind"]
    if kind == "leaf":
        counts = doc.get("class_counts")
        return LeafNode(float(doc["prediction"]), int(doc["n_samples"]),
                        None if counts is None else np.asarray(counts, dtype=np.int64))
    if kind == "threshold":
        return ThresholdNode(int(doc["column"]), float(doc["threshold"]),
                             tuple(int(c) for c in doc["children"]))
    if kind == "shape":
        group = doc["group"]
        sf = ShapeFunction(
            group=tuple(group) if isinstance(group, list) else int(group),
            tree=_tree_from_doc(doc["tree"]),
            assignment=np.asarray(doc["assignment"], dtype=np.int64),
            arity=int(doc["arity"]),
        )
        return ShapeNode(sf, tuple(int(c) for c in doc["children"]),
                         tuple(tuple(p) for p in doc.get("pairs_considered", [])))
    raise ModelFormatError(f"unknown node kind {kind!r}")


def _validate(model: SgtModel) -> None:
    n = len(model.nodes)
    seen = set()
    stack = [model.root]
    while stack:
        i = stack.pop()
        if not (0 <= i < n):
            raise ModelFormatError(f"node id {i} out of range")
        if i in seen:
            raise ModelFormatError(f"node {i} reached twice; tree must be acyclic")
        seen.add(i)
        node = model.nodes[i]
        if isinstance(node, LeafNode):
            continue
        if isinstance(node, ShapeNode):
            sf = node.shape
            if len(node.children) != sf.arity:
                raise ModelFormatError(f"node {i}: child count != arity")
            if len(sf.assignment) != sf.tree.n_leaves:
                raise ModelFormatError(f"node {i}: assignment length != bin count")
            if len(sf.assignment) and (sf.assignment.min() < 0
                                       or sf.assignment.max() >= sf.arity):
                raise ModelFormatError(f"node {i}: assignment value out of range")
            if isinstance(sf.group, tuple):
                if any(not (0 <= g < len(model.groups)) for g in sf.group):
                    raise ModelFormatError(f"node {i}: feature group out of range")
            elif not (0 <= sf.group < len(model.groups)):
                raise ModelFormatError(f"node {i}: feature group out of range")
        elif isinstance(node, ThresholdNode):
            if len(node.children) != 2:
                raise ModelFormatError(f"node {i}: threshold nodes take two children")
            if not (0 <= node.column < model.groups[-1].stop):
                raise ModelFormatError(f"node {i}: encoded column out of range")
        stack.extend(node.children)


@dataclass(frozen=True)
class ModelStats:
    internal_nodes: int
    leaves: int
    max_depth: int
    arity_histogram: dict[int, int]
    features_used: tuple[str, ...]
    univariate_nodes: int
    bivariate_nodes: int


def stats(model: SgtModel) -> ModelStats:
    depths = model.depths()
    internal = model.internal_ids()
    leaves = model.leaf_ids()
    hist: dict[int, int] = {}
    features: set[str] = set()
    uni = bi = 0
    for i in internal:
        node = model.nodes[i]
        hist[node.arity] = hist.get(node.arity, 0) + 1
        if isinstance(node, ThresholdNode):
            uni += 1
            for g in model.groups:
                if g.start <= node.column < g.stop:
                    features.add(g.name)
        elif isinstance(node.shape.group, tuple):
            bi += 1
            features.update(model.groups[g].name for g in node.shape.group)
        else:
            uni += 1
            features.add(model.groups[node.shape.group].name)
    return ModelStats(
        internal_nodes=len(internal),
        leaves=len(leaves),
        max_depth=max(depths.values()) if depths else 0,
        arity_histogram=dict(sorted(hist.items())),
        features_used=tuple(sorted(features)),
        univariate_nodes=uni,
        bivariate_nodes=bi,
    )


def _fmt(x: float) -> str:
    if x == -np.inf:
        return "-inf"
    if x == np.inf:
        return "inf"
    return f"{x:.4g}"


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def _shape_label(model: SgtModel, sf: ShapeFunction) -> str:
    """Raw DOT label text; feature names and levels arrive escaped."""
    if not isinstance(sf.group, tuple):
        g = model.groups[sf.group]
        if g.kind == NUMERIC:
            segments = [
                f"({_fmt(lo)},{_fmt(hi)}]->{sf.assignment[b]}"
                for b, (lo, hi) in enumerate(leaf_intervals(sf.tree))
            ]
            return f"{_escape(g.name)}: " + " | ".join(segments)
        # categorical: show which level subset each bin holds
        eye = np.eye(g.width)
        bins = sf.tree.apply(eye)
        parts = []
        for b in range(sf.tree.n_leaves):
            levels = [_escape(g.levels[i]) for i in np.nonzero(bins == b)[0]]
            parts.append("{" + ",".join(levels) + "}" + f"->{sf.assignment[b]}")
        return f"{_escape(g.name)}: " + " | ".join(parts)
    g1, g2 = (model.groups[i] for i in sf.group)
    names = [_escape(g1.name), _escape(g2.name)] + [
        f"{np.degrees(a):.0f}deg" for a in (sf.tree.directions or ())
    ]
    rules = leaf_rules(sf.tree, names)
    body = "\\n".join(f"{rule} -> {sf.assignment[b]}" for b, rule in enumerate(rules))
    return f"{_escape(g1.name)} x {_escape(g2.name)}\\n{body}"


def to_dot(model: SgtModel, name: str = "sgt") -> str:
    """DOT digraph: internal nodes labeled with their decision rule (interval
    segments for univariate numeric features, level subsets for categoricals,
    rule lists for bivariate nodes), leaves with prediction and support."""
    lines = [f"digraph {name} {{", '  node [shape=box, fontname="monospace"];']
    order = model._reachable()
    for i in order:
        node = model.nodes[i]
        if isinstance(node, LeafNode):
            if model.task is Task.CLASSIFICATION:
                label = model.class_names[int(node.prediction)]
                lines.append(f'  n{i} [label="class {_escape(label)}\\n(n={node.n_samples})"];')
            else:
                value = node.prediction * model.target_scale + model.target_mean
                lines.append(f'  n{i} [label="mean {value:.4g}\\n(n={node.n_samples})"];')
        elif isinstance(node, ThresholdNode):
            colname = next(
                (f"{g.name}" if g.kind == NUMERIC else f"{g.name}={g.levels[node.column - g.start]}")
                for g in model.groups
                if g.start <= node.column < g.stop
            )
            lines.append(f'  n{i} [label="{_escape(colname)} <= {node.threshold:.4g}"];')
        else:
            lines.append(f'  n{i} [label="{_shape_label(model, node.shape)}"];')
        if not isinstance(node, LeafNode):
            for b, child in enumerate(node.children):
                lines.append(f'  n{i} -> n{child} [label="{b}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
