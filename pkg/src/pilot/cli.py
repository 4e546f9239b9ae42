"""Command-line front door: train, predict, eval, importance, print."""

from __future__ import annotations

import argparse
import csv
import sys

from . import __version__
from .build import build_tree
from .data import Hyperparams, format_float, ingest_csv
from .errors import PilotError
from .evalharness import kfold_cv
from .interpret import (SCHEMA_VERSION, feature_importance, load_model,
                        render_text, save_model)
from .kinds import ModelKind
from .predict import predict_batch


def _positive_int(minimum: int, label: str):
    def parse(text: str) -> int:
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{label} must be an integer")
        if v < minimum:
            raise argparse.ArgumentTypeError(f"{label} must be >= {minimum}")
        return v
    return parse


def _nonneg_float(label: str):
    def parse(text: str) -> float:
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{label} must be a number")
        if v < 0:
            raise argparse.ArgumentTypeError(f"{label} must be >= 0")
        return v
    return parse


def _add_hyper_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--mode", choices=["full", "cart"], default="full",
                     help="cart restricts node models to constant fits")
    sub.add_argument("--max-depth", type=_positive_int(1, "--max-depth"),
                     default=12)
    sub.add_argument("--min-fit", type=_positive_int(1, "--min-fit"),
                     default=10)
    sub.add_argument("--min-leaf", type=_positive_int(1, "--min-leaf"),
                     default=5)
    sub.add_argument("--min-unique-for-lin-blin",
                     type=_positive_int(2, "--min-unique-for-lin-blin"),
                     default=5)
    sub.add_argument("--min-unique-per-child-for-plin",
                     type=_positive_int(2, "--min-unique-per-child-for-plin"),
                     default=5)
    sub.add_argument("--rss-floor-scale",
                     type=_nonneg_float("--rss-floor-scale"), default=1e-12)
    sub.add_argument("--max-lin-chain",
                     type=_positive_int(0, "--max-lin-chain"), default=100)
    sub.add_argument("--min-rel-gain-lin",
                     type=_nonneg_float("--min-rel-gain-lin"), default=1e-10)


def _add_data_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--data", required=True, help="CSV file with a header row")
    sub.add_argument("--target", required=True, help="response column name")
    sub.add_argument("--categorical", default="",
                     help="comma-separated column names forced to categorical")


def _hyperparams(args: argparse.Namespace) -> Hyperparams:
    kinds = (frozenset({ModelKind.CON, ModelKind.PCON})
             if args.mode == "cart" else frozenset(ModelKind))
    return Hyperparams(
        max_depth=args.max_depth,
        min_fit=args.min_fit,
        min_leaf=args.min_leaf,
        allowed_kinds=kinds,
        min_unique_for_lin_blin=args.min_unique_for_lin_blin,
        min_unique_per_child_for_plin=args.min_unique_per_child_for_plin,
        rss_floor_scale=args.rss_floor_scale,
        max_lin_chain=args.max_lin_chain,
        min_rel_gain_lin=args.min_rel_gain_lin,
    )


def _categorical_set(arg: str) -> set[str]:
    return {c.strip() for c in arg.split(",") if c.strip()}


def _read_feature_csv(path: str) -> dict[str, list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PilotError(f"{path}: empty file, expected a header row") from None
        rows = list(reader)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise PilotError(f"{path}: row {i + 1} has {len(row)} fields, "
                             f"expected {len(header)}")
    return {name: [row[j] for row in rows] for j, name in enumerate(header)}


def _cmd_train(args: argparse.Namespace) -> int:
    dataset = ingest_csv(args.data, args.target, _categorical_set(args.categorical))
    tree = build_tree(dataset, _hyperparams(args))
    save_model(tree, args.out)
    d = tree.diagnostics
    print(f"nodes={d.node_count} leaves={d.leaf_count} "
          f"depth={d.max_reported_depth} train_rss={format_float(d.train_rss)}")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    tree = load_model(args.model)
    table = _read_feature_csv(args.data)
    names = {m.name for m in tree.column_meta}
    # Tolerate stray columns (e.g. the response) when every model column is
    # present; otherwise let prediction report the exact mismatch.
    if all(n in table for n in names):
        table = {k: v for k, v in table.items() if k in names}
    preds = predict_batch(tree, table)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("prediction\n")
        for v in preds:
            fh.write(format_float(float(v)) + "\n")
    print(f"wrote {preds.size} predictions to {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    dataset = ingest_csv(args.data, args.target, _categorical_set(args.categorical))
    methods = {}
    for name in args.methods.split(","):
        name = name.strip()
        if name == "pilot":
            methods[name] = Hyperparams()
        elif name == "cart":
            methods[name] = Hyperparams.cart_mode()
        else:
            raise PilotError(f"unknown method {name!r}; choose from pilot,cart")
    report = kfold_cv(dataset, args.folds, methods, args.seed,
                      yeo_johnson=args.yeo_johnson, dataset_name=args.data)
    if args.out:
        report.to_csv(args.out)
    print(report.to_text())
    timing = " ".join(f"{e.method}={e.seconds:.3f}s" for e in report.entries)
    print(f"wall-clock: {timing}", file=sys.stderr)
    return 1 if report.any_failed else 0


def _cmd_importance(args: argparse.Namespace) -> int:
    tree = load_model(args.model)
    imp = feature_importance(tree)
    for name, w in zip(imp.names, imp.weights):
        print(f"{name},{format_float(float(w))}")
    return 0


def _cmd_print(args: argparse.Namespace) -> int:
    print(render_text(load_model(args.model)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pilot",
        description="Regularized linear model trees with truncated predictions.")
    parser.add_argument(
        "--version", action="version",
        version=f"pilot {__version__} (schema_version {SCHEMA_VERSION})")
    subs = parser.add_subparsers(dest="command", required=True)

    train = subs.add_parser("train", help="fit a tree and write a model file")
    _add_data_flags(train)
    _add_hyper_flags(train)
    train.add_argument("--out", required=True, help="model file to write")
    train.add_argument("--threads", type=_positive_int(1, "--threads"),
                       default=1, help="worker cap (execution is single-threaded)")
    train.set_defaults(func=_cmd_train)

    pred = subs.add_parser("predict", help="predict a CSV with a saved model")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--out", required=True, help="predictions CSV to write")
    pred.set_defaults(func=_cmd_predict)

    ev = subs.add_parser("eval", help="cross-validated comparison on a CSV")
    _add_data_flags(ev)
    _add_hyper_flags(ev)
    ev.add_argument("--folds", type=_positive_int(2, "--folds"), default=5)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--methods", default="pilot,cart")
    ev.add_argument("--yeo-johnson", action="store_true",
                    help="power-transform numeric predictors per fold")
    ev.add_argument("--out", default="", help="report CSV to write")
    ev.set_defaults(func=_cmd_eval)

    imp = subs.add_parser("importance", help="print normalized feature importance")
    imp.add_argument("--model", required=True)
    imp.set_defaults(func=_cmd_importance)

    pr = subs.add_parser("print", help="print the fitted tree as text")
    pr.add_argument("--model", required=True)
    pr.set_defaults(func=_cmd_print)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version and 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except PilotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
