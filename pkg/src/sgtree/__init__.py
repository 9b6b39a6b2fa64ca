"""Shape-generalized decision trees.

Internal nodes route samples through a learned piecewise-constant shape
function over one feature (or a pair of features) instead of a single
threshold, which lets one node express what an axis-aligned tree needs many
splits for. Includes the axis-aligned baseline, multi-way branching,
bivariate splits, alternating-optimization refinement, synthetic
verification datasets, and model serialization / DOT export.
"""

from .assign import Assignment, AssignParams, coord_descent, select_arity, weighted_kmeans
from .data import (
    ColumnSpec,
    DataError,
    Dataset,
    FeatureSchema,
    SplitSpec,
    Task,
    gen_bars,
    gen_plus_sign,
    load_csv,
    load_schema,
    one_hot_view,
    save_csv,
    save_schema,
    split,
)
from .impurity import (
    ClassStats,
    Criterion,
    RegStats,
    impurity,
    stats_from_labels,
    stats_from_targets,
    stats_merge,
    stats_remove,
    weighted_impurity,
)
from .induce import (
    Hyperparams,
    SgtModel,
    accuracy,
    fit,
    fit_cart,
    from_cart,
    mse,
    predict,
    predict_one,
)
from .inner_tree import (
    BinTable,
    InnerTree,
    InnerTreeParams,
    extract_bin_stats,
    fit_bivariate,
    fit_univariate,
    root_assignment,
)
from .model import ModelFormatError, ModelStats, deserialize, serialize, stats, to_dot
from .refine import CareSet, TaoParams, pseudolabel_accuracy, tao_refine
from .split import ShapeFunction, SplitParams, SplitResult, fit_shape_function, score_pair, select_split
from .verify import (
    VerificationError,
    assignment_oracle,
    complexity_smoke,
    lemma1_harness,
    theorem2_gap,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "AssignParams",
    "BinTable",
    "CareSet",
    "ClassStats",
    "ColumnSpec",
    "Criterion",
    "DataError",
    "Dataset",
    "FeatureSchema",
    "Hyperparams",
    "InnerTree",
    "InnerTreeParams",
    "ModelFormatError",
    "ModelStats",
    "RegStats",
    "SgtModel",
    "ShapeFunction",
    "SplitParams",
    "SplitResult",
    "SplitSpec",
    "TaoParams",
    "Task",
    "VerificationError",
    "accuracy",
    "assignment_oracle",
    "complexity_smoke",
    "coord_descent",
    "deserialize",
    "extract_bin_stats",
    "fit",
    "fit_bivariate",
    "fit_cart",
    "fit_shape_function",
    "fit_univariate",
    "from_cart",
    "gen_bars",
    "gen_plus_sign",
    "impurity",
    "lemma1_harness",
    "load_csv",
    "load_schema",
    "mse",
    "one_hot_view",
    "predict",
    "predict_one",
    "pseudolabel_accuracy",
    "root_assignment",
    "save_csv",
    "save_schema",
    "score_pair",
    "select_arity",
    "select_split",
    "serialize",
    "split",
    "stats",
    "stats_from_labels",
    "stats_from_targets",
    "stats_merge",
    "stats_remove",
    "tao_refine",
    "theorem2_gap",
    "to_dot",
    "weighted_impurity",
    "weighted_kmeans",
]
