"""Command-line surface: generate / train / bench / simulate.

Exit codes: 0 success, 2 usage or config error, 3 I/O error, 4 numerical
divergence, 5 dataset validation error.

Precedence for bench/simulate settings: defaults < command-line flags <
run-config file (the config file, when given, has the last word; every
flag below lists its default).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import figures
from .bench import (
    CORRUPTIONS,
    METHODS,
    ProtocolConfig,
    build_matrix,
    k_star_summary,
    run_protocol,
    simulate_sweep,
)
from .datasets import (
    FIGURE1_SCENARIOS,
    DatasetError,
    LabeledDataset,
    Standardizer,
    gen_example1,
    gen_example2,
    gen_figure1,
    load_table,
    sample_split,
    save_table,
)
from .losses import (
    LOSS_KINDS,
    average_spec,
    average_top_k_spec,
    close_k_spec,
    top_k_spec,
    zero_one_error_rate,
)
from .models import init_model, save_model
from .training import CloseDecay, DivergenceError, TrainConfig, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DIVERGENCE = 4
EXIT_DATASET = 5


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# run-config files: plain "key = value" lines, '#' comments

_CONFIG_KEYS = ("model_family", "loss_kind", "methods", "epochs",
                "learning_rate", "seed_base", "split_count", "lambdas", "ks")


def parse_run_config(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val
    return values


def _apply_run_config(cfg: ProtocolConfig, values: dict) -> ProtocolConfig:
    updates = {}
    if "model_family" in values:
        updates["model_family"] = values["model_family"]
    if "loss_kind" in values:
        updates["loss_kind"] = values["loss_kind"]
    if "methods" in values:
        updates["methods"] = tuple(
            m.strip() for m in values["methods"].split(",") if m.strip()
        )
    for key, cast in (("epochs", int), ("learning_rate", float),
                      ("seed_base", int), ("split_count", int)):
        if key in values:
            try:
                updates[key] = cast(values[key])
            except ValueError:
                raise ConfigError(f"config key {key}={values[key]!r} not a {cast.__name__}")
    if "lambdas" in values:
        try:
            updates["lambdas"] = tuple(
                float(v) for v in values["lambdas"].split(",") if v.strip()
            )
        except ValueError:
            raise ConfigError("config key lambdas must be comma-separated floats")
    if "ks" in values:
        try:
            updates["ks_override"] = tuple(
                int(v) for v in values["ks"].split(",") if v.strip()
            )
        except ValueError:
            raise ConfigError("config key ks must be comma-separated integers")
    try:
        return replace(cfg, **updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# generate


def _cmd_generate(args) -> int:
    if args.name == "example1":
        data = gen_example1(args.n, args.outlier_magnitude)
    elif args.name == "example2":
        data = gen_example2(args.n, args.seed)
    else:
        if args.scenario is None:
            raise ConfigError("figure1 requires --scenario")
        data = gen_figure1(args.scenario, args.n, args.seed)
    save_table(data, args.out)
    pos = int(np.sum(data.labels > 0))
    print(f"wrote {args.out}: n={data.n} d={data.dim} "
          f"positives={pos} negatives={data.n - pos} "
          f"majority_frac={max(pos, data.n - pos) / data.n:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


def _aggregate_from_args(args):
    if args.method == "average":
        return average_spec()
    if args.method == "close_decay":
        if args.k_star is None:
            raise ConfigError("--method close_decay requires --k-star")
        return CloseDecay(args.k_star)
    if args.k is None:
        raise ConfigError(f"--method {args.method} requires --k")
    return {"close": close_k_spec, "atk": average_top_k_spec,
            "top": top_k_spec}[args.method](args.k)


def _cmd_train(args) -> int:
    data = load_table(args.dataset, label_column=args.label_column)
    aggregate = _aggregate_from_args(args)
    loss = LOSS_KINDS[args.loss]

    if args.split_seed is not None:
        tr, va, te = sample_split(data.n, args.split_seed)
        train_raw = data.subset(tr)
        eval_sets = {"test": data.subset(np.concatenate([va, te]))}
    else:
        train_raw = data
        eval_sets = {}

    if args.standardize:
        std = Standardizer.fit(train_raw.features)
        train_ds = LabeledDataset(std.transform(train_raw.features),
                                  train_raw.labels, data.name)
        eval_sets = {
            name: LabeledDataset(std.transform(ds.features), ds.labels, ds.name)
            for name, ds in eval_sets.items()
        }
    else:
        train_ds = train_raw

    model = init_model(args.model, train_ds.dim, args.seed)
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, lam=args.lam)
    model, trace = train(model, train_ds, loss, aggregate, cfg)

    if args.out_model:
        save_model(model, args.out_model)
    if args.out_trace:
        from .training import write_trace_csv

        write_trace_csv(trace, args.out_trace)
    train_err = zero_one_error_rate(train_ds.labels,
                                    model.forward_batch(train_ds.features))
    train_01 = int(round(train_err * train_ds.n))
    print(f"train_01_error={train_err:.6f} train_01_count={train_01}")
    for name, ds in eval_sets.items():
        err = zero_one_error_rate(ds.labels, model.forward_batch(ds.features))
        print(f"{name}_01_error={err:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


LEDGER_HEADER = ["dataset", "split", "method", "lambda", "k",
                 "valid_accuracy", "test_accuracy"]


def _read_ledger(path):
    done = {}
    if not os.path.exists(path):
        return done
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["dataset"], int(row["split"]), row["method"])
            k = None if row["k"] in ("", "None") else int(row["k"])
            done[key] = (float(row["lambda"]), k,
                         float(row["valid_accuracy"]), float(row["test_accuracy"]))
    return done


def _protocol_for_dataset(path, config, done_rows):
    data = load_table(path)
    data = LabeledDataset(data.features, data.labels, os.path.basename(path))
    done = {
        (split, method): rest
        for (ds, split, method), rest in done_rows.items()
        if ds == data.name
    }
    fresh = []

    def on_result(name, split, method, lam, k, vacc, tacc):
        fresh.append([name, split, method, lam, k, vacc, tacc])

    results = run_protocol(data, config, on_result=on_result, done=done)
    return data.name, results, fresh


def _write_schema(out_dir) -> None:
    schema = """\
per_dataset.csv
  dataset: dataset file name
  split: split index (seeded as seed_base + index)
  method: one of close, close_decay, atk, average, top
  lambda: selected L2 penalty weight
  k: selected k (empty for average)
  valid_accuracy: validation accuracy of the selected model
  test_accuracy: test accuracy of the selected model
matrix.csv
  model_family, loss_kind: the protocol block
  matrix: significant (p <= 0.05 paired t-test win) or improve2 (>= 2 point win)
  row_method, col_method: entry = fraction of datasets where col beats row
  fraction: that fraction
  n_datasets: datasets contributing
kstar.csv
  dataset: dataset file name
  k_star_ratio: median selected k*/n_train for close_decay
  delta_accuracy: close_decay mean test accuracy minus average's
sweep_<corruption>.csv
  level: corruption level applied to the train portion
  method: trained method
  mean_test_accuracy: mean over splits
  majority_baseline: accuracy of always predicting the majority test label
figures: matrix_significant.png, matrix_improve2.png, kstar.png,
  sweep_<corruption>.png render the tables above.
"""
    with open(os.path.join(out_dir, "schema.txt"), "w", encoding="utf-8") as fh:
        fh.write(schema)


def _cmd_bench(args) -> int:
    config = ProtocolConfig(
        model_family=args.model, loss_kind=args.loss,
        methods=tuple(args.methods.split(",")), epochs=args.epochs,
        learning_rate=args.lr, split_count=args.splits,
        seed_base=args.seed_base,
    )
    if args.config:
        config = _apply_run_config(config, parse_run_config(args.config))

    paths = sorted(
        os.path.join(args.manifest, f)
        for f in os.listdir(args.manifest)
        if f.endswith((".csv", ".tsv"))
    )
    if not paths:
        raise DatasetError(f"no dataset files in manifest {args.manifest}")
    os.makedirs(args.out, exist_ok=True)
    ledger_path = os.path.join(args.out, "per_dataset.csv")
    done_rows = _read_ledger(ledger_path) if args.resume else {}
    mode = "a" if (args.resume and os.path.exists(ledger_path)) else "w"

    per_dataset = {}
    failures = []
    with open(ledger_path, mode, encoding="utf-8", newline="") as ledger:
        writer = csv.writer(ledger)
        if mode == "w":
            writer.writerow(LEDGER_HEADER)

        def record(rows):
            for row in rows:
                writer.writerow(row)
            ledger.flush()

        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                futures = [
                    pool.submit(_protocol_for_dataset, p, config, done_rows)
                    for p in paths
                ]
                for path, fut in zip(paths, futures):
                    try:
                        name, results, fresh = fut.result()
                    except (DatasetError, DivergenceError, ValueError) as exc:
                        failures.append((path, exc))
                        continue
                    record(fresh)
                    per_dataset[name] = results
        else:
            for path in paths:
                try:
                    name, results, fresh = _protocol_for_dataset(
                        path, config, done_rows)
                except (DatasetError, DivergenceError, ValueError) as exc:
                    failures.append((path, exc))
                    continue
                record(fresh)
                per_dataset[name] = results

    for path, exc in failures:
        print(f"warning: skipped {path}: {exc}", file=sys.stderr)

    if per_dataset:
        matrix = build_matrix(per_dataset, methods=config.methods)
        with open(os.path.join(args.out, "matrix.csv"), "w",
                  encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model_family", "loss_kind", "matrix",
                             "row_method", "col_method", "fraction",
                             "n_datasets"])
            for which, grid in (("significant", matrix.significant),
                                ("improve2", matrix.improve2)):
                for i, mi in enumerate(matrix.methods):
                    for j, mj in enumerate(matrix.methods):
                        if i == j:
                            continue
                        writer.writerow([config.model_family, config.loss_kind,
                                         which, mi, mj,
                                         repr(float(grid[i, j])),
                                         matrix.n_datasets])
        figures.save_matrix_heatmap(
            matrix, os.path.join(args.out, "matrix_significant.png"),
            "significant")
        figures.save_matrix_heatmap(
            matrix, os.path.join(args.out, "matrix_improve2.png"), "improve2")

        rows = k_star_summary(per_dataset)
        with open(os.path.join(args.out, "kstar.csv"), "w",
                  encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dataset", "k_star_ratio", "delta_accuracy"])
            for row in rows:
                writer.writerow([row["dataset"], repr(row["k_star_ratio"]),
                                 repr(row["delta_accuracy"])])
        figures.save_kstar_scatter(rows, os.path.join(args.out, "kstar.png"))

    _write_schema(args.out)
    print(f"bench complete: {len(per_dataset)} datasets, "
          f"{len(failures)} skipped, outputs in {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _cmd_simulate(args) -> int:
    config = ProtocolConfig(
        model_family=args.model, loss_kind=args.loss,
        methods=tuple(args.methods.split(",")), epochs=args.epochs,
        learning_rate=args.lr, split_count=args.splits,
        seed_base=args.seed_base,
    )
    if args.config:
        config = _apply_run_config(config, parse_run_config(args.config))
    try:
        levels = [float(v) for v in args.levels.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--levels must be comma-separated numbers, got {args.levels!r}")
    if not levels:
        raise ConfigError("--levels is empty")

    data = load_table(args.dataset)
    rows = simulate_sweep(data, args.corruption, levels, config,
                          jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, f"sweep_{args.corruption}.csv")
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "method", "mean_test_accuracy",
                         "majority_baseline"])
        for row in rows:
            writer.writerow([repr(row.level), row.method,
                             repr(row.mean_test_accuracy),
                             repr(row.majority_baseline)])
    figures.save_sweep_curves(
        rows, args.corruption,
        os.path.join(args.out, f"sweep_{args.corruption}.png"))
    print(f"wrote {out_csv} ({len(rows)} rows)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggloss",
        description=(
            "Aggregate-loss training and benchmarking. Settings precedence: "
            "defaults < flags < --config file."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset file")
    g.add_argument("name", choices=["example1", "example2", "figure1"])
    g.add_argument("--n", type=int, required=True,
                   help="generator size parameter")
    g.add_argument("--seed", type=int, default=0, help="rng seed (default 0)")
    g.add_argument("--scenario", choices=list(FIGURE1_SCENARIOS), default=None,
                   help="figure1 scenario")
    g.add_argument("--outlier-magnitude", type=float, default=1000.0,
                   help="example1 outlier magnitude (default 1000)")
    g.add_argument("--out", required=True, help="output CSV path")
    g.set_defaults(func=_cmd_generate)

    t = sub.add_parser("train", help="train one model on a dataset file")
    t.add_argument("dataset", help="delimited dataset file")
    t.add_argument("--method", choices=list(METHODS), required=True)
    t.add_argument("--loss", choices=sorted(LOSS_KINDS), default="logistic",
                   help="individual loss (default logistic)")
    t.add_argument("--model", choices=["linear", "mlp"], default="linear",
                   help="model family (default linear)")
    t.add_argument("--epochs", type=int, default=300,
                   help="training epochs (default 300)")
    t.add_argument("--lr", type=float, default=0.1,
                   help="learning rate (default 0.1)")
    t.add_argument("--lambda", dest="lam", type=float, default=0.0,
                   help="L2 penalty weight (default 0)")
    t.add_argument("--k", type=int, default=None,
                   help="k for close/atk/top")
    t.add_argument("--k-star", type=int, default=None,
                   help="terminal k for close_decay")
    t.add_argument("--seed", type=int, default=0,
                   help="model init seed (default 0)")
    t.add_argument("--split-seed", type=int, default=None,
                   help="when set, train on a 50%% split and report held-out error")
    t.add_argument("--label-column", default="target",
                   help="label column name (default target)")
    t.add_argument("--standardize", action=argparse.BooleanOptionalAction,
                   default=True, help="z-score features on the train portion")
    t.add_argument("--out-model", default=None, help="model JSON output path")
    t.add_argument("--out-trace", default=None, help="trace CSV output path")
    t.set_defaults(func=_cmd_train)

    def add_protocol_flags(p, default_splits):
        p.add_argument("--config", default=None,
                       help="run-config file (key = value lines; overrides flags)")
        p.add_argument("--model", default="linear", choices=["linear", "mlp"],
                       help="model family (default linear)")
        p.add_argument("--loss", default="logistic", choices=sorted(LOSS_KINDS),
                       help="individual loss (default logistic)")
        p.add_argument("--methods", default=",".join(METHODS),
                       help=f"comma list of methods (default all: {','.join(METHODS)})")
        p.add_argument("--epochs", type=int, default=300,
                       help="training epochs (default 300)")
        p.add_argument("--lr", type=float, default=0.1,
                       help="learning rate (default 0.1)")
        p.add_argument("--splits", type=int, default=default_splits,
                       help=f"number of splits (default {default_splits})")
        p.add_argument("--seed-base", type=int, default=0,
                       help="base seed; split i uses (seed_base, i) (default 0)")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes (default 1)")

    b = sub.add_parser("bench", help="run the split protocol over a manifest")
    b.add_argument("manifest", help="directory of .csv/.tsv dataset files")
    add_protocol_flags(b, default_splits=25)
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--resume", action="store_true",
                   help="skip (dataset, split, method) rows already in "
                        "per_dataset.csv")
    b.set_defaults(func=_cmd_bench)

    s = sub.add_parser("simulate", help="corruption sweep on one dataset")
    s.add_argument("dataset", help="delimited dataset file")
    add_protocol_flags(s, default_splits=5)
    s.add_argument("--corruption", choices=list(CORRUPTIONS), required=True)
    s.add_argument("--levels", required=True,
                   help="comma-separated corruption levels, e.g. 0,0.01,0.05")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
