"""Tabular dataset handling: schema, CSV loading, one-hot views, splits,
and the synthetic plus-sign / alternating-bars generators used throughout the
verification suite."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"


class Task(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


class DataError(ValueError):
    """Malformed input data or schema."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.levels:
                raise DataError(f"column {self.name!r}: categorical needs at least one level")
            if len(set(self.levels)) != len(self.levels):
                raise DataError(f"column {self.name!r}: duplicate categorical levels")
        elif self.levels:
            raise DataError(f"column {self.name!r}: numeric columns take no level list")


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names in schema")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __len__(self) -> int:
        return len(self.columns)


@dataclass
class Dataset:
    """Column-typed samples plus targets.

    Numeric columns are float arrays; categorical columns hold integer level
    indices into the schema's level list. Classification targets are class
    ids ``0..C-1`` with the original labels kept in ``class_names``.
    """

    schema: FeatureSchema
    columns: list[np.ndarray]
    y: np.ndarray
    task: Task
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.columns) != len(self.schema):
            raise DataError("column count does not match schema")
        n = len(self.y)
        if n < 1:
            raise DataError("empty dataset")
        for spec, col in zip(self.schema.columns, self.columns):
            if len(col) != n:
                raise DataError(f"column {spec.name!r}: length mismatch")
            if spec.kind == CATEGORICAL and len(col) and col.max() >= len(spec.levels):
                raise DataError(f"column {spec.name!r}: level index out of range")
        if self.task is Task.CLASSIFICATION:
            if not self.class_names:
                raise DataError("classification dataset needs class names")
            if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.n_classes):
                raise DataError("class id out of range")

    @property
    def n_samples(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return len(self.schema)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def take(self, idx: np.ndarray) -> "Dataset":
        return Dataset(
            schema=self.schema,
            columns=[c[idx] for c in self.columns],
            y=self.y[idx],
            task=self.task,
            class_names=self.class_names,
        )


@dataclass(frozen=True)
class SplitSpec:
    train: float
    valid: float
    test: float
    seed: int = 0

    def __post_init__(self):
        fractions = (self.train, self.valid, self.test)
        if any(f <= 0 for f in fractions):
            raise DataError("split fractions must be positive")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise DataError("split fractions must sum to 1.0")


@dataclass(frozen=True)
class FeatureGroup:
    """Range of encoded columns belonging to one original feature."""

    index: int
    name: str
    kind: str
    start: int
    stop: int
    levels: tuple[str, ...] = ()

    @property
    def width(self) -> int:
        return self.stop - self.start


@dataclass
class EncodedView:
    """One-hot encoded matrix plus the group map back to original features."""

    matrix: np.ndarray  # (N, E) float64
    groups: list[FeatureGroup]

    def group_columns(self, index: int) -> np.ndarray:
        g = self.groups[index]
        return self.matrix[:, g.start : g.stop]

    def decode(self, row: int, index: int):
        """Recover the original cell value of sample `row` for feature `index`."""
        g = self.groups[index]
        block = self.matrix[row, g.start : g.stop]
        if g.kind == NUMERIC:
            return float(block[0])
        return g.levels[int(np.argmax(block))]


def load_schema(path) -> FeatureSchema:
    """Parse a schema file: one `name,kind[,level1|level2|...]` line per column."""
    cols = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) == 2:
                cols.append(ColumnSpec(parts[0].strip(), parts[1].strip()))
            elif len(parts) == 3:
                levels = tuple(p.strip() for p in parts[2].split("|"))
                cols.append(ColumnSpec(parts[0].strip(), parts[1].strip(), levels))
            else:
                raise DataError(f"{path}:{lineno}: expected `name,kind[,levels]`")
    if not cols:
        raise DataError(f"{path}: empty schema")
    return FeatureSchema(tuple(cols))


def save_schema(schema: FeatureSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in schema.columns:
            if c.kind == CATEGORICAL:
                fh.write(f"{c.name},{c.kind},{'|'.join(c.levels)}\n")
            else:
                fh.write(f"{c.name},{c.kind}\n")


def load_csv(path, schema: FeatureSchema, task: Task,
             class_names: tuple[str, ...] | None = None) -> Dataset:
    """Load a comma-separated file whose header is the schema columns followed
    by one target column. Missing values and unknown categorical levels are
    rejected with the offending row/column named. Classification class ids
    follow `class_names` when given (e.g. a trained model's label order),
    otherwise the sorted distinct target values."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        expected = schema.names
        if len(header) != len(expected) + 1:
            raise DataError(
                f"{path}: header has {len(header)} columns, want {len(expected)} features + 1 target"
            )
        if [h.strip() for h in header[:-1]] != expected:
            raise DataError(f"{path}: header does not match schema column names")

        level_maps = [
            {lv: i for i, lv in enumerate(c.levels)} if c.kind == CATEGORICAL else None
            for c in schema.columns
        ]
        cols: list[list] = [[] for _ in schema.columns]
        targets: list[str] = []
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {rowno}: expected {len(header)} cells")
            for j, (spec, cell) in enumerate(zip(schema.columns, row)):
                cell = cell.strip()
                if cell == "":
                    raise DataError(f"{path}: row {rowno}, column {spec.name!r}: missing value")
                if spec.kind == NUMERIC:
                    try:
                        cols[j].append(float(cell))
                    except ValueError:
                        raise DataError(
                            f"{path}: row {rowno}, column {spec.name!r}: "
                            f"non-numeric cell {cell!r}"
                        ) from None
                else:
                    idx = level_maps[j].get(cell)
                    if idx is None:
                        raise DataError(
                            f"{path}: row {rowno}, column {spec.name!r}: "
                            f"unknown categorical level {cell!r}"
                        )
                    cols[j].append(idx)
            targets.append(row[-1].strip())

    if not targets:
        raise DataError(f"{path}: empty dataset")

    arrays = [
        np.asarray(col, dtype=np.float64 if spec.kind == NUMERIC else np.int64)
        for spec, col in zip(schema.columns, cols)
    ]
    if task is Task.CLASSIFICATION:
        names = class_names if class_names is not None else tuple(sorted(set(targets)))
        lookup = {name: i for i, name in enumerate(names)}
        try:
            y = np.asarray([lookup[t] for t in targets], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"{path}: target label {exc.args[0]!r} not among {names}") from None
        return Dataset(schema, arrays, y, task, names)
    try:
        y = np.asarray([float(t) for t in targets], dtype=np.float64)
    except ValueError:
        raise DataError(f"{path}: non-numeric regression target") from None
    return Dataset(schema, arrays, y, task)


def save_csv(ds: Dataset, path, target_name: str = "target") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.schema.names + [target_name])
        for i in range(ds.n_samples):
            row = []
            for spec, col in zip(ds.schema.columns, ds.columns):
                row.append(repr(float(col[i])) if spec.kind == NUMERIC else spec.levels[int(col[i])])
            if ds.task is Task.CLASSIFICATION:
                row.append(ds.class_names[int(ds.y[i])])
            else:
                row.append(repr(float(ds.y[i])))
            writer.writerow(row)


def schema_groups(schema: FeatureSchema) -> list[FeatureGroup]:
    """Encoded-column layout implied by a schema: numerics occupy one column,
    categoricals one indicator column per level."""
    groups = []
    start = 0
    for j, spec in enumerate(schema.columns):
        width = 1 if spec.kind == NUMERIC else len(spec.levels)
        groups.append(FeatureGroup(j, spec.name, spec.kind, start, start + width, spec.levels))
        start += width
    return groups


def one_hot_view(ds: Dataset) -> EncodedView:
    """Encode categoricals as indicator blocks; numerics pass through.

    The group map keeps all indicator columns of one categorical together so
    a shape function over that feature sees every level at once and can route
    arbitrary level subsets to each branch.
    """
    groups = schema_groups(ds.schema)
    return EncodedView(encode_like(ds, groups), groups)


def encode_like(ds: Dataset, groups: list[FeatureGroup]) -> np.ndarray:
    """Encode `ds` into the column layout described by an existing group map."""
    width = groups[-1].stop
    out = np.zeros((ds.n_samples, width), dtype=np.float64)
    for g in groups:
        col = ds.columns[g.index]
        if g.kind == NUMERIC:
            out[:, g.start] = col
        else:
            out[np.arange(ds.n_samples), g.start + col.astype(np.int64)] = 1.0
    return out


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Deterministic, exhaustive, disjoint train/valid/test partition.

    Sizes follow the largest-remainder rounding of fractions * N, so each is
    within one sample of its exact share.
    """
    n = ds.n_samples
    if n < 3:
        raise DataError("need at least 3 samples to split three ways")
    fractions = np.asarray([spec.train, spec.valid, spec.test])
    sizes = np.floor(fractions * n).astype(int)
    remainders = fractions * n - sizes
    for _ in range(n - sizes.sum()):
        k = int(np.argmax(remainders))
        sizes[k] += 1
        remainders[k] = -1.0
    if (sizes == 0).any():
        raise DataError(f"split of {n} samples by {tuple(fractions)} leaves an empty partition")
    perm = np.random.default_rng(spec.seed).permutation(n)
    a, b = sizes[0], sizes[0] + sizes[1]
    return ds.take(np.sort(perm[:a])), ds.take(np.sort(perm[a:b])), ds.take(np.sort(perm[b:]))


_PLUS_BAND = 1.0 / 3.0  # half-width of the cross bands inside the [-1,1]^2 box


def gen_plus_sign(n_per_arm: int, seed: int = 0) -> Dataset:
    """Two-dimensional plus-sign classification data on the [-1,1]^2 box.

    The box decomposes into a 3x3 grid of cells with band half-width 1/3:
    the four corner cells carry class 0 and the five cross cells (four arms
    plus the center) carry class 1. `n_per_arm` points are drawn uniformly in
    each of the nine cells so every region is populated.
    """
    if n_per_arm < 1:
        raise DataError("n_per_arm must be >= 1")
    t = _PLUS_BAND
    rng = np.random.default_rng(seed)
    edges = [-1.0, -t, t, 1.0]
    xs, ys = [], []
    for i in range(3):
        for j in range(3):
            xs.append(rng.uniform(edges[i], edges[i + 1], n_per_arm))
            ys.append(rng.uniform(edges[j], edges[j + 1], n_per_arm))
    x1 = np.concatenate(xs)
    x2 = np.concatenate(ys)
    label = ((np.abs(x1) <= t) | (np.abs(x2) <= t)).astype(np.int64)
    perm = rng.permutation(len(label))
    schema = FeatureSchema((ColumnSpec("x1", NUMERIC), ColumnSpec("x2", NUMERIC)))
    return Dataset(
        schema, [x1[perm], x2[perm]], label[perm], Task.CLASSIFICATION, ("0", "1")
    )


def plus_sign_label(x1: float, x2: float) -> int:
    return int(abs(x1) <= _PLUS_BAND or abs(x2) <= _PLUS_BAND)


def bars_value(omega: int, x) -> np.ndarray:
    """The alternating-bars signal: a cosine with omega+1 sign changes on [0,1],
    cutting the unit interval into omega+2 constant-sign pieces."""
    return np.cos(np.pi * (omega + 1) * np.asarray(x, dtype=np.float64))


def bars_label(omega: int, x) -> np.ndarray:
    return (bars_value(omega, x) <= 0.0).astype(np.int64)


def bars_boundaries(omega: int) -> np.ndarray:
    """The omega+1 sign-change locations of the bars signal in (0,1)."""
    return (2 * np.arange(omega + 1) + 1) / (2.0 * (omega + 1))


def gen_bars(
    omega: int,
    n: int,
    seed: int = 0,
    task: Task = Task.CLASSIFICATION,
    noise: float = 0.1,
) -> Dataset:
    """One-dimensional alternating-bars data on [0,1].

    Classification labels are 1 where the bars signal is <= 0. Samples are
    drawn uniformly plus two forced points bracketing each sign change so
    every one of the omega+2 constant pieces is populated. In regression
    mode the target is the signal value plus Gaussian noise.
    """
    if omega < 1:
        raise DataError("omega must be >= 1")
    if n < 10 * (omega + 2):
        raise DataError(f"need at least {10 * (omega + 2)} samples for omega={omega}")
    rng = np.random.default_rng(seed)
    bounds = bars_boundaries(omega)
    eps = 1.0 / (16.0 * (omega + 1))
    forced = np.concatenate([bounds - eps, bounds + eps])
    x = np.concatenate([rng.uniform(0.0, 1.0, n - len(forced)), forced])
    x = x[rng.permutation(len(x))]
    schema = FeatureSchema((ColumnSpec("x", NUMERIC),))
    if task is Task.CLASSIFICATION:
        return Dataset(schema, [x], bars_label(omega, x), task, ("0", "1"))
    y = bars_value(omega, x) + noise * rng.standard_normal(len(x))
    return Dataset(schema, [x], y, task)
