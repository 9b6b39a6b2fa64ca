"""Command-line surface: train, evaluate, predict, visualize, convert,
generate synthetic data, run the verification harnesses, and benchmark
variants across depths.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import (
    DataError,
    Dataset,
    Task,
    gen_bars,
    gen_plus_sign,
    load_csv,
    load_schema,
    save_csv,
    save_schema,
)
from .impurity import Criterion
from .induce import Hyperparams, SgtModel, fit, fit_cart, from_cart, predict
from .model import ModelFormatError, deserialize, serialize, stats, to_dot
from .refine import TaoParams, tao_refine
from .verify import (
    VerificationError,
    assignment_oracle,
    complexity_smoke,
    lemma1_harness,
    theorem2_gap,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3

VARIANTS = {
    # variant -> (branching factor, pairwise candidate limit)
    "cart": (2, 0),
    "sgt": (2, 0),
    "sgt3": (3, 0),
    "s2gt": (2, 5),
    "s2gt3": (3, 5),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sgtree", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="fit a model and write it to disk")
    tr.add_argument("--data", required=True)
    tr.add_argument("--schema", required=True)
    tr.add_argument("--task", choices=[t.value for t in Task], default="classification")
    tr.add_argument("--variant", choices=sorted(VARIANTS), default="sgt")
    tr.add_argument("--max-depth", type=int, default=5)
    tr.add_argument("--criterion", choices=[c.value for c in Criterion])
    tr.add_argument("--min-samples-split", type=int, default=2)
    tr.add_argument("--min-samples-leaf", type=int, default=1)
    tr.add_argument("--min-impurity-decrease", type=float, default=0.0)
    tr.add_argument("--inner-max-leaf-nodes", type=int, default=8)
    tr.add_argument("--inner-min-samples-leaf", type=float, default=1.0)
    tr.add_argument("--branching-penalty", type=float, default=0.0)
    tr.add_argument("--pairwise-penalty", type=float, default=0.0)
    tr.add_argument("--pairwise-limit", type=int, default=None,
                    help="override the variant's pairwise candidate limit")
    tr.add_argument("--h-directions", type=int, default=8)
    tr.add_argument("--cd-sweeps", type=int, default=10)
    tr.add_argument("--kmeans-iters", type=int, default=100)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    tr.add_argument("--standardize-targets", action="store_true",
                    help="regression: train on zero-mean unit-variance targets")
    tr.add_argument("--tao-passes", type=int, default=0)
    tr.add_argument("--tao-reg", type=float, default=0.0)
    tr.add_argument("--out", required=True)

    ev = sub.add_parser("eval", help="accuracy or MSE plus model statistics")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)

    pr = sub.add_parser("predict", help="write per-sample predictions")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out", required=True)

    vz = sub.add_parser("viz", help="emit the model as a DOT graph")
    vz.add_argument("--model", required=True)
    vz.add_argument("--out", help="output path; standard output when omitted")

    cv = sub.add_parser("convert", help="rewrite threshold splits as shape functions")
    cv.add_argument("--cart-model", required=True)
    cv.add_argument("--out", required=True)

    sy = sub.add_parser("synth", help="generate a synthetic dataset as CSV + schema")
    sy.add_argument("--kind", choices=["plus", "bars"], required=True)
    sy.add_argument("--omega", type=int, default=3)
    sy.add_argument("--n", type=int, default=900)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--task", choices=[t.value for t in Task], default="classification")
    sy.add_argument("--noise", type=float, default=0.1)
    sy.add_argument("--out", required=True)
    sy.add_argument("--schema-out", help="defaults to the data path with .schema suffix")

    vf = sub.add_parser("verify", help="run a verification harness")
    vf.add_argument("--suite", choices=["lemma1", "theorem2", "oracle", "complexity"],
                    required=True)
    vf.add_argument("--trials", type=int, default=200)
    vf.add_argument("--seed", type=int, default=0)
    vf.add_argument("--assert-timing", action="store_true",
                    help="complexity suite: fail (exit 3) when ratios exceed 2.5")

    bn = sub.add_parser("bench", help="accuracy per depth for several variants")
    bn.add_argument("--data", required=True)
    bn.add_argument("--schema", required=True)
    bn.add_argument("--task", choices=[t.value for t in Task], default="classification")
    bn.add_argument("--depths", default="2..6", help="range like 2..6 or list like 2,4,6")
    bn.add_argument("--variants", default="cart,sgt")
    bn.add_argument("--seed", type=int, default=0)
    return parser


def _hyperparams(args, task: Task) -> Hyperparams:
    if args.criterion is None:
        criterion = Criterion.MSE if task is Task.REGRESSION else Criterion.GINI
    else:
        criterion = Criterion(args.criterion)
    k, pair_limit = VARIANTS[args.variant]
    if args.pairwise_limit is not None:
        pair_limit = args.pairwise_limit
    return Hyperparams(
        branching_factor=k,
        max_depth=args.max_depth,
        min_impurity_improvement=args.min_impurity_decrease,
        min_samples_split=args.min_samples_split,
        min_samples_leaf=args.min_samples_leaf,
        criterion=criterion,
        inner_max_leaf_nodes=args.inner_max_leaf_nodes,
        inner_min_samples_leaf=args.inner_min_samples_leaf,
        branching_penalty=args.branching_penalty,
        pair_limit=pair_limit,
        pair_penalty=args.pairwise_penalty,
        h_directions=args.h_directions,
        cd_sweeps=args.cd_sweeps,
        kmeans_iters=args.kmeans_iters,
        seed=args.seed,
        threads=args.threads,
    )


def _load_model(path) -> SgtModel:
    return deserialize(Path(path).read_text(encoding="utf-8"))


def _cmd_train(args) -> int:
    task = Task(args.task)
    schema = load_schema(args.schema)
    ds = load_csv(args.data, schema, task)
    hp = _hyperparams(args, task)

    mean, scale = 0.0, 1.0
    train_ds = ds
    if args.standardize_targets:
        if task is not Task.REGRESSION:
            raise UsageError("--standardize-targets applies to regression only")
        mean = float(np.mean(ds.y))
        scale = float(np.std(ds.y)) or 1.0
        train_ds = Dataset(ds.schema, ds.columns, (ds.y - mean) / scale, task)

    if args.variant == "cart":
        if args.tao_passes > 0:
            raise UsageError("refinement applies to shape-function variants; "
                             "train a shape variant or convert the model first")
        model = fit_cart(train_ds, hp)
    else:
        model = fit(train_ds, hp)
    model.target_mean, model.target_scale = mean, scale
    if args.tao_passes > 0:
        model = tao_refine(model, ds, TaoParams(args.tao_passes, args.tao_reg, args.seed), hp)
    Path(args.out).write_text(serialize(model), encoding="utf-8")
    st = stats(model)
    print(f"trained {args.variant}: internal {st.internal_nodes} | leaves {st.leaves} "
          f"| depth {st.max_depth} -> {args.out}")
    return EXIT_OK


def _eval_lines(model: SgtModel, ds: Dataset) -> tuple[str, list[str]]:
    preds = predict(model, ds)
    st = stats(model)
    lines = []
    if model.task is Task.CLASSIFICATION:
        metric = float(np.mean(preds == ds.y))
        summary = f"accuracy {metric:.4f}"
        lines.append(f"accuracy={metric!r}")
    else:
        metric = float(np.mean(np.square(preds - ds.y)))
        summary = f"mse {metric:.6g}"
        lines.append(f"mse={metric!r}")
    summary += (f" | internal {st.internal_nodes} | leaves {st.leaves}"
                f" | depth {st.max_depth}")
    lines += [
        f"n_samples={ds.n_samples}",
        f"internal_nodes={st.internal_nodes}",
        f"leaves={st.leaves}",
        f"max_depth={st.max_depth}",
        f"univariate_nodes={st.univariate_nodes}",
        f"bivariate_nodes={st.bivariate_nodes}",
        f"features_used={','.join(st.features_used)}",
    ]
    for arity, count in st.arity_histogram.items():
        lines.append(f"arity_{arity}={count}")
    return summary, lines


def _cmd_eval(args) -> int:
    model = _load_model(args.model)
    ds = load_csv(args.data, model.schema, model.task,
                  model.class_names if model.task is Task.CLASSIFICATION else None)
    summary, lines = _eval_lines(model, ds)
    print(summary)
    for line in lines:
        print(line)
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = _load_model(args.model)
    ds = load_csv(args.data, model.schema, model.task,
                  model.class_names if model.task is Task.CLASSIFICATION else None)
    preds = predict(model, ds)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("prediction\n")
        for p in preds:
            if model.task is Task.CLASSIFICATION:
                fh.write(model.class_names[int(p)] + "\n")
            else:
                fh.write(repr(float(p)) + "\n")
    print(f"wrote {len(preds)} predictions -> {args.out}")
    return EXIT_OK


def _cmd_viz(args) -> int:
    model = _load_model(args.model)
    text = to_dot(model)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote DOT graph -> {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_convert(args) -> int:
    model = _load_model(args.cart_model)
    converted = from_cart(model)
    Path(args.out).write_text(serialize(converted), encoding="utf-8")
    print(f"converted {args.cart_model} -> {args.out}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    task = Task(args.task)
    if args.kind == "plus":
        if task is not Task.CLASSIFICATION:
            raise UsageError("the plus-sign dataset is classification only")
        ds = gen_plus_sign(max(1, math.ceil(args.n / 9)), args.seed)
    else:
        ds = gen_bars(args.omega, args.n, args.seed, task, args.noise)
    out = Path(args.out)
    schema_out = Path(args.schema_out) if args.schema_out else out.with_suffix(".schema")
    save_csv(ds, out)
    save_schema(ds.schema, schema_out)
    print(f"wrote {ds.n_samples} samples -> {out} (schema: {schema_out})")
    return EXIT_OK


def _cmd_verify(args) -> int:
    if args.suite == "lemma1":
        worst = 0.0
        for n_classes in (2, 3):
            for criterion in (Criterion.GINI, Criterion.ENTROPY):
                res = lemma1_harness(args.trials, n=200, d=5, n_classes=n_classes,
                                     criterion=criterion, seed=args.seed)
                print(f"lemma1 classes={n_classes} criterion={criterion.value} "
                      f"trials={res.trials} violation={res.max_violation:.1e}")
                worst = max(worst, res.max_violation)
        print(f"max violation {worst:.1e}")
        print(f"max_violation={worst!r}")
        return EXIT_OK if worst <= 1e-9 else EXIT_VERIFY

    if args.suite == "theorem2":
        status = EXIT_OK
        for omega in (1, 3, 5, 8):
            try:
                res = theorem2_gap(omega, seed=args.seed)
            except VerificationError as exc:
                print(f"theorem2 omega={omega} FAILED: {exc}")
                status = EXIT_VERIFY
                continue
            ok = (res.sgt_nodes == 1 and res.cart_nodes >= omega + 1
                  and res.sgt_accuracy == 1.0 and res.cart_accuracy == 1.0)
            print(f"theorem2 omega={omega} sgt_nodes={res.sgt_nodes} "
                  f"cart_nodes={res.cart_nodes} sgt_acc={res.sgt_accuracy:.3f} "
                  f"cart_acc={res.cart_accuracy:.3f} {'ok' if ok else 'FAILED'}")
            if not ok:
                status = EXIT_VERIFY
        return status

    if args.suite == "oracle":
        rep = assignment_oracle(args.trials, seed=args.seed)
        print(f"oracle trials={rep.trials} local_optimum_ok={rep.local_optimum_ok} "
              f"init_bound_ok={rep.init_bound_ok} global_matches={rep.global_matches} "
              f"max_gap={rep.max_gap:.2e}")
        print(f"global_match_rate={rep.global_matches / rep.trials!r}")
        ok = (rep.local_optimum_ok == rep.trials and rep.init_bound_ok == rep.trials
              and rep.global_matches >= 0.9 * rep.trials)
        return EXIT_OK if ok else EXIT_VERIFY

    res = complexity_smoke(seed=args.seed)
    print(f"complexity base={res.base_seconds:.4f}s double_n={res.double_n_seconds:.4f}s "
          f"double_d={res.double_d_seconds:.4f}s")
    print(f"n_ratio={res.n_ratio!r}")
    print(f"d_ratio={res.d_ratio!r}")
    if args.assert_timing and (res.n_ratio > 2.5 or res.d_ratio > 2.5):
        return EXIT_VERIFY
    return EXIT_OK


def _parse_depths(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(p) for p in text.split(",") if p]


def _cmd_bench(args) -> int:
    task = Task(args.task)
    schema = load_schema(args.schema)
    ds = load_csv(args.data, schema, task)
    depths = _parse_depths(args.depths)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in VARIANTS:
            raise UsageError(f"unknown variant {v!r}")

    header = "depth " + " ".join(f"{v:>8}" for v in variants)
    print(header)
    records = []
    for depth in depths:
        row = [f"{depth:<5}"]
        for v in variants:
            k, pair_limit = VARIANTS[v]
            criterion = Criterion.MSE if task is Task.REGRESSION else Criterion.GINI
            hp = Hyperparams(branching_factor=k, max_depth=depth, criterion=criterion,
                             pair_limit=pair_limit, seed=args.seed)
            model = fit_cart(ds, hp) if v == "cart" else fit(ds, hp)
            preds = predict(model, ds)
            if task is Task.CLASSIFICATION:
                metric = float(np.mean(preds == ds.y))
            else:
                metric = float(np.mean(np.square(preds - ds.y)))
            row.append(f"{metric:8.4f}")
            records.append(f"{v}.{depth}={metric!r}")
        print(" ".join(row))
    for rec in records:
        print(rec)
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "viz": _cmd_viz,
    "convert": _cmd_convert,
    "synth": _cmd_synth,
    "verify": _cmd_verify,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
