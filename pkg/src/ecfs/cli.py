"""Command-line front end: rank, evaluate, stability, synth.

Every command is a pure function of its input files, flags, and seed; output
files are byte-identical across runs. Exit codes: 0 success, 1 validation or
data errors, 2 eigensolver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .centrality import PowerIterationError, ecfs_run
from .data import Dataset, DatasetError, SyntheticSpec, generate_synthetic, load_dataset
from .evaluation import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_C_GRID,
    METHODS,
    SplitError,
    SplitPlan,
    cross_validate,
    run_evaluation,
    run_stability,
)

ENV_SEED = "ECFS_SEED"


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors, which is reserved here
    # for solver non-convergence; route usage problems to status 1 instead
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input data file")
    p.add_argument("--format", choices=("csv", "matrix"), default="csv",
                   help="csv with a header row, or whitespace matrix plus a labels file")
    p.add_argument("--label-col", default="label",
                   help="csv label column, by name or position (default: label)")
    p.add_argument("--labels", default=None, help="labels file for matrix format")


def _add_cv_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha-grid", default=None,
                   help="comma-separated alpha candidates for --alpha cv")
    p.add_argument("--c-grid", default=None,
                   help="comma-separated C candidates for --alpha cv")
    p.add_argument("--folds", type=int, default=5, help="cross-validation folds")
    p.add_argument("--cv-cardinality", type=int, default=100,
                   help="feature count used while scoring fold candidates")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", default="-", help="output path, or - for stdout")
    p.add_argument("--output-format", choices=("json", "csv"), default="json")


def _build_parser() -> _Parser:
    parser = _Parser(prog="ecfs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_rank = sub.add_parser("rank", help="rank all features on one dataset")
    _add_data_flags(p_rank)
    p_rank.add_argument("--alpha", default="0.5",
                        help="mixing weight in [0,1], or 'cv' to pick it by cross-validation")
    p_rank.add_argument("--bins", type=int, default=None,
                        help="histogram bins for the mutual information score")
    p_rank.add_argument("--tol", type=float, default=1e-10, help="eigensolver residual tolerance")
    p_rank.add_argument("--max-iter", type=int, default=10000, help="eigensolver sweep budget")
    _add_cv_flags(p_rank)
    p_rank.add_argument("--epochs", type=int, default=50,
                        help="classifier epochs used inside cross-validation")
    p_rank.add_argument("--seed", type=int, default=None,
                        help=f"master seed (default: ${ENV_SEED} or 0)")
    p_rank.add_argument("--dump-scores", default=None,
                        help="also write the per-feature score vectors as JSON")
    p_rank.add_argument("--dump-adjacency", default=None,
                        help="also write the dense adjacency as row-major text")
    _add_output_flags(p_rank)

    p_eval = sub.add_parser("evaluate", help="repeated-split AUC / stability / significance")
    _add_data_flags(p_eval)
    p_eval.add_argument("--alpha", default="0.5")
    p_eval.add_argument("--bins", type=int, default=None)
    p_eval.add_argument("--cardinalities", default="50,100,150,200",
                        help="comma-separated top-k sizes to score")
    p_eval.add_argument("--train-fraction", type=float, default=2.0 / 3.0)
    p_eval.add_argument("--repeats", type=int, default=100)
    p_eval.add_argument("--methods", default="ec_fs,fisher,mi")
    p_eval.add_argument("--fixed-c", type=float, default=1.0,
                        help="classifier C when alpha is fixed, and for baselines")
    p_eval.add_argument("--epochs", type=int, default=50)
    p_eval.add_argument("--workers", type=int, default=1,
                        help="thread count over repeats; output does not depend on it")
    p_eval.add_argument("--positive-class", default=None,
                        help="for multiclass data: evaluate this class against the rest")
    _add_cv_flags(p_eval)
    p_eval.add_argument("--seed", type=int, default=None)
    _add_output_flags(p_eval)

    p_stab = sub.add_parser("stability", help="selection stability across training splits")
    _add_data_flags(p_stab)
    p_stab.add_argument("--alpha", default="0.5")
    p_stab.add_argument("--bins", type=int, default=None)
    p_stab.add_argument("--cardinalities", default="50,100,150,200")
    p_stab.add_argument("--train-fraction", type=float, default=2.0 / 3.0)
    p_stab.add_argument("--repeats", type=int, default=100)
    p_stab.add_argument("--methods", default="ec_fs,fisher,mi")
    p_stab.add_argument("--epochs", type=int, default=50)
    p_stab.add_argument("--workers", type=int, default=1)
    _add_cv_flags(p_stab)
    p_stab.add_argument("--seed", type=int, default=None)
    _add_output_flags(p_stab)

    p_synth = sub.add_parser("synth", help="generate a labelled Gaussian benchmark")
    p_synth.add_argument("--samples", type=int, required=True)
    p_synth.add_argument("--features", type=int, required=True)
    p_synth.add_argument("--informative", type=int, required=True)
    p_synth.add_argument("--separation", type=float, default=2.0)
    p_synth.add_argument("--noise-sd", type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--output", required=True,
                         help="path prefix; writes <prefix>.csv and <prefix>.informative.json")
    return parser


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get(ENV_SEED, "0"))


def _parse_alpha(text: str):
    if text == "cv":
        return "cv"
    return float(text)


def _parse_number_list(text: str, cast) -> list:
    return [cast(tok) for tok in text.split(",") if tok.strip()]


def _validate_common(args, errors: list[str]) -> dict:
    """Resolve and range-check flags shared by rank/evaluate/stability."""
    resolved: dict = {}
    try:
        alpha = _parse_alpha(args.alpha)
        if alpha != "cv" and not 0.0 <= alpha <= 1.0:
            errors.append(f"--alpha must be in [0, 1] or 'cv', got {args.alpha}")
        resolved["alpha"] = alpha
    except ValueError:
        errors.append(f"--alpha must be a number or 'cv', got {args.alpha!r}")
    if args.bins is not None and args.bins < 2:
        errors.append(f"--bins must be at least 2, got {args.bins}")
    seed = _resolve_seed(args)
    if seed < 0:
        errors.append(f"seed must be non-negative, got {seed}")
    resolved["seed"] = seed
    resolved["alpha_grid"] = DEFAULT_ALPHA_GRID
    resolved["c_grid"] = DEFAULT_C_GRID
    if args.alpha_grid is not None:
        try:
            grid = _parse_number_list(args.alpha_grid, float)
            if not grid or any(not 0.0 <= a <= 1.0 for a in grid):
                errors.append("--alpha-grid values must lie in [0, 1]")
            resolved["alpha_grid"] = grid
        except ValueError:
            errors.append(f"--alpha-grid is not a comma-separated number list: {args.alpha_grid!r}")
    if args.c_grid is not None:
        try:
            grid = _parse_number_list(args.c_grid, float)
            if not grid or any(c <= 0 for c in grid):
                errors.append("--c-grid values must be positive")
            resolved["c_grid"] = grid
        except ValueError:
            errors.append(f"--c-grid is not a comma-separated number list: {args.c_grid!r}")
    if args.folds < 2:
        errors.append(f"--folds must be at least 2, got {args.folds}")
    if args.cv_cardinality < 1:
        errors.append(f"--cv-cardinality must be positive, got {args.cv_cardinality}")
    if getattr(args, "epochs", 1) < 1:
        errors.append(f"--epochs must be positive, got {args.epochs}")
    if args.format == "matrix" and args.labels is None:
        errors.append("--format matrix requires --labels")
    if args.format == "csv" and args.labels is not None:
        errors.append("--labels only applies to --format matrix")
    return resolved


def _validate_resample(args, errors: list[str]) -> dict:
    resolved: dict = {}
    if not 0.0 < args.train_fraction < 1.0:
        errors.append(f"--train-fraction must be in (0, 1), got {args.train_fraction}")
    if args.repeats < 1:
        errors.append(f"--repeats must be positive, got {args.repeats}")
    if getattr(args, "workers", 1) < 1:
        errors.append(f"--workers must be at least 1, got {args.workers}")
    try:
        ks = _parse_number_list(args.cardinalities, int)
        if not ks or any(k < 1 for k in ks):
            errors.append("--cardinalities must be positive integers")
        resolved["cardinalities"] = ks
    except ValueError:
        errors.append(f"--cardinalities is not a comma-separated integer list: {args.cardinalities!r}")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if not methods:
        errors.append("--methods must name at least one method")
    if bad:
        errors.append(f"unknown methods {bad}; choose from {list(METHODS)}")
    resolved["methods"] = methods
    return resolved


def _fail(errors: list[str]) -> int:
    print("error: " + "; ".join(errors), file=sys.stderr)
    return 1


def _load(args) -> Dataset:
    return load_dataset(args.data, format=args.format, label_col=args.label_col,
                        labels_path=args.labels)


def _binarize(d: Dataset, positive: str) -> Dataset:
    """One-vs-rest view: the chosen class becomes label 1, everything else 0."""
    idx = None
    if d.label_names is not None and positive in d.label_names:
        idx = d.label_names.index(positive)
    else:
        try:
            idx = int(positive)
        except ValueError:
            raise DatasetError(
                f"positive class {positive!r} not found; known labels: {list(d.label_names or [])}"
            ) from None
        if not 0 <= idx < d.n_classes:
            raise DatasetError(f"positive class index {idx} out of range 0..{d.n_classes - 1}")
    name = d.label_names[idx] if d.label_names else str(idx)
    y = (d.y == idx).astype(int)
    return Dataset(d.X, y, d.feature_names, ("rest", name))


def _dump_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _ranking_rows(d: Dataset, run) -> list[dict]:
    rows = []
    for pos, (j, s) in enumerate(zip(run.ranking.order, run.ranking.scores)):
        rows.append({"rank": pos, "index": int(j), "name": d.feature_name(int(j)),
                     "score": float(s)})
    return rows


def _cmd_rank(args) -> int:
    errors: list[str] = []
    common = _validate_common(args, errors)
    if args.tol <= 0:
        errors.append(f"--tol must be positive, got {args.tol}")
    if args.max_iter < 1:
        errors.append(f"--max-iter must be positive, got {args.max_iter}")
    if errors:
        return _fail(errors)
    d = _load(args)
    alpha = common["alpha"]
    chosen_c = None
    if alpha == "cv":
        alpha, chosen_c = cross_validate(
            d, common["alpha_grid"], common["c_grid"], folds=args.folds,
            cardinality=args.cv_cardinality, seed=common["seed"], bins=args.bins,
            epochs=args.epochs,
        )
    t0 = time.perf_counter()
    run = ecfs_run(d, alpha=alpha, bins=args.bins, tol=args.tol, max_iter=args.max_iter)
    print(f"ranking time: {time.perf_counter() - t0:.3f}s (ranking only)", file=sys.stderr)
    if args.dump_adjacency:
        run.adjacency.dump_text(args.dump_adjacency)
    if args.dump_scores:
        scores = {
            "schema_version": 1,
            "fisher": run.fisher.to_dict(),
            "mutual_information": run.mutual_information.to_dict(),
            "centrality": {"kind": "centrality", "values": [float(v) for v in run.eigen.v0]},
        }
        _write(_dump_json(scores), args.dump_scores)
    report = {
        "schema_version": 1,
        "command": "rank",
        "n_samples": d.n_samples,
        "n_features": d.n_features,
        "label_mapping": list(d.label_names) if d.label_names else None,
        "config": {
            "alpha": "cv" if chosen_c is not None else alpha,
            "bins": run.bins,
            "seed": common["seed"],
            "tol": args.tol,
            "max_iter": args.max_iter,
        },
        "metadata": {
            "alpha": alpha,
            "c": chosen_c,
            "lambda0": run.eigen.lambda0,
            "iterations": run.eigen.iterations,
            "residual": run.eigen.residual,
            "degenerate": run.eigen.degenerate,
            "degenerate_features": run.degenerate_features,
            "degenerate_fisher": run.adjacency.degenerate_fisher,
            "degenerate_mi": run.adjacency.degenerate_mi,
        },
        "ranking": _ranking_rows(d, run),
    }
    if args.output_format == "json":
        _write(_dump_json(report), args.output)
    else:
        lines = ["rank,index,name,score"]
        lines += [f"{r['rank']},{r['index']},{r['name']},{r['score']!r}" for r in report["ranking"]]
        _write("\n".join(lines) + "\n", args.output)
    return 0


def _auc_csv(report: dict) -> str:
    ks = report["config"]["cardinalities"]
    lines = ["method," + ",".join(str(k) for k in ks) + ",average"]
    for method in report["config"]["methods"]:
        block = report["auc"][method]
        cells = [f"{block['per_cardinality'][str(k)]['mean']:.6f}" for k in ks]
        lines.append(f"{method}," + ",".join(cells) + f",{block['average']:.6f}")
    return "\n".join(lines) + "\n"


def _stability_csv(report: dict) -> str:
    ks = report["config"]["cardinalities"]
    lines = ["method," + ",".join(str(k) for k in ks)]
    for method in report["config"]["methods"]:
        by_k = {row["cardinality"]: row["kuncheva"] for row in report["stability"][method]}
        lines.append(f"{method}," + ",".join(f"{by_k[k]:.6f}" for k in ks))
    return "\n".join(lines) + "\n"


def _cmd_evaluate(args) -> int:
    errors: list[str] = []
    common = _validate_common(args, errors)
    resample = _validate_resample(args, errors)
    if args.fixed_c <= 0:
        errors.append(f"--fixed-c must be positive, got {args.fixed_c}")
    if errors:
        return _fail(errors)
    d = _load(args)
    if d.n_classes > 2:
        if args.positive_class is None:
            return _fail([
                f"dataset has {d.n_classes} classes; pass --positive-class to evaluate one against the rest"
            ])
        d = _binarize(d, args.positive_class)
    elif args.positive_class is not None:
        d = _binarize(d, args.positive_class)
    plan = SplitPlan(train_fraction=args.train_fraction, n_repeats=args.repeats,
                     seed=common["seed"])
    t0 = time.perf_counter()
    report = run_evaluation(
        d, plan,
        methods=resample["methods"],
        cardinalities=resample["cardinalities"],
        alpha=common["alpha"],
        fixed_c=args.fixed_c,
        bins=args.bins,
        alpha_grid=common["alpha_grid"],
        c_grid=common["c_grid"],
        folds=args.folds,
        cv_cardinality=args.cv_cardinality,
        epochs=args.epochs,
        workers=args.workers,
    )
    print(f"wall time: {time.perf_counter() - t0:.3f}s (ranking + training + scoring)",
          file=sys.stderr)
    if args.positive_class is not None:
        report["config"]["positive_class"] = args.positive_class
    _write(_dump_json(report) if args.output_format == "json" else _auc_csv(report), args.output)
    return 0


def _cmd_stability(args) -> int:
    errors: list[str] = []
    common = _validate_common(args, errors)
    resample = _validate_resample(args, errors)
    if args.repeats < 2:
        errors.append("--repeats must be at least 2 for stability")
    if errors:
        return _fail(errors)
    d = _load(args)
    plan = SplitPlan(train_fraction=args.train_fraction, n_repeats=args.repeats,
                     seed=common["seed"])
    report = run_stability(
        d, plan,
        methods=resample["methods"],
        cardinalities=resample["cardinalities"],
        alpha=common["alpha"],
        bins=args.bins,
        alpha_grid=common["alpha_grid"],
        c_grid=common["c_grid"],
        folds=args.folds,
        cv_cardinality=args.cv_cardinality,
        epochs=args.epochs,
        workers=args.workers,
    )
    _write(_dump_json(report) if args.output_format == "json" else _stability_csv(report),
           args.output)
    return 0


def _cmd_synth(args) -> int:
    seed = _resolve_seed(args)
    spec = SyntheticSpec(
        n_samples=args.samples,
        n_features=args.features,
        n_informative=args.informative,
        class_separation=args.separation,
        noise_sd=args.noise_sd,
        seed=seed,
    )
    d, informative = generate_synthetic(spec)
    prefix = Path(args.output)
    data_path = prefix.with_suffix(".csv")
    truth_path = prefix.with_suffix(".informative.json")
    header = ",".join([d.feature_name(i) for i in range(d.n_features)] + ["label"])
    lines = [header]
    for i in range(d.n_samples):
        lines.append(",".join(repr(float(v)) for v in d.X[i]) + f",{int(d.y[i])}")
    data_path.parent.mkdir(parents=True, exist_ok=True)
    data_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    truth = {
        "schema_version": 1,
        "command": "synth",
        "informative_indices": sorted(int(i) for i in informative),
        "config": {
            "n_samples": spec.n_samples,
            "n_features": spec.n_features,
            "n_informative": spec.n_informative,
            "class_separation": spec.class_separation,
            "noise_sd": spec.noise_sd,
            "seed": spec.seed,
        },
    }
    truth_path.write_text(_dump_json(truth), encoding="utf-8")
    print(f"wrote {data_path} and {truth_path}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    dispatch = {
        "rank": _cmd_rank,
        "evaluate": _cmd_evaluate,
        "stability": _cmd_stability,
        "synth": _cmd_synth,
    }
    try:
        return dispatch[args.command](args)
    except PowerIterationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (DatasetError, SplitError, FileNotFoundError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
