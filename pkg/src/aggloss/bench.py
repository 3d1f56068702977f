"""Benchmark harness: hyperparameter grids, the repeated-split protocol,
pairwise significance and improvement matrices, k* summaries, and the
corruption simulation sweeps.

Protocol per split: standardize on the train portion, grid-search
(lambda) x (k where the method takes one) by validation accuracy, and
evaluate the selected trained model on the test portion (no retraining).
Determinism: every random draw is keyed off seed_base and the split index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .datasets import (
    LabeledDataset,
    Standardizer,
    add_ambiguous,
    amplify_imbalance,
    inject_outliers,
    sample_split,
)
from .losses import (
    LOSS_KINDS,
    average_spec,
    average_top_k_spec,
    close_k_spec,
    top_k_spec,
    zero_one_error_rate,
)
from .models import init_model
from .training import CloseDecay, DivergenceError, TrainConfig, train

METHODS = ("close", "close_decay", "atk", "average", "top")
CORRUPTIONS = ("outliers", "imbalance", "ambiguous")

DEFAULT_LAMBDAS = tuple(10.0 ** e for e in range(-5, 6))


def grid_ks(n: int) -> list[int]:
    """Powers of ten up to n, then n itself: {10, 100, ..., n}."""
    if n < 10:
        return [n]
    ks = []
    k = 10
    while k < n:
        ks.append(k)
        k *= 10
    ks.append(n)
    return ks


@dataclass(frozen=True)
class ProtocolConfig:
    model_family: str = "linear"
    loss_kind: str = "logistic"
    methods: tuple = ("close", "close_decay", "atk", "average", "top")
    epochs: int = 300
    learning_rate: float = 0.1
    split_count: int = 25
    seed_base: int = 0
    lambdas: tuple = DEFAULT_LAMBDAS
    ks_override: tuple | None = None  # fixed k grid instead of powers of ten

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        if self.model_family not in ("linear", "mlp"):
            raise ValueError(f"unknown model family {self.model_family!r}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}")

    def ks_for(self, n_train: int) -> list[int]:
        if self.ks_override is not None:
            ks = sorted({min(k, n_train) for k in self.ks_override if k >= 1})
            return ks or [n_train]
        return grid_ks(n_train)


@dataclass
class MethodResult:
    method: str
    per_split_test_accuracy: list[float] = field(default_factory=list)
    per_split_valid_accuracy: list[float] = field(default_factory=list)
    selected_lambda: list[float] = field(default_factory=list)
    selected_k: list[int | None] = field(default_factory=list)
    n_train: int | None = None

    def mean_test_accuracy(self) -> float:
        return float(np.mean(self.per_split_test_accuracy))


def _aggregate_for(method: str, k: int | None):
    if method == "average":
        return average_spec()
    if method == "close":
        return close_k_spec(k)
    if method == "close_decay":
        return CloseDecay(k)
    if method == "atk":
        return average_top_k_spec(k)
    return top_k_spec(k)


def _accuracy(model, X, y) -> float:
    return 1.0 - zero_one_error_rate(y, model.forward_batch(X))


def run_split(train_ds: LabeledDataset, valid_ds: LabeledDataset,
              test_ds: LabeledDataset, method: str, config: ProtocolConfig,
              init_seed) -> tuple[float, float, float, int | None]:
    """Grid-search one method on one standardized split.

    Returns (valid_accuracy, test_accuracy, lambda, k) of the candidate
    with the best validation accuracy (ties: smaller lambda, then smaller
    k).  Grid points whose training diverges are skipped; if every
    candidate diverges the last DivergenceError propagates.
    """
    loss = LOSS_KINDS[config.loss_kind]
    ks = [None] if method == "average" else config.ks_for(train_ds.n)
    candidates = []
    last_divergence = None
    for lam in config.lambdas:
        for k in ks:
            model = init_model(config.model_family, train_ds.dim, init_seed)
            cfg = TrainConfig(epochs=config.epochs,
                              learning_rate=config.learning_rate, lam=lam)
            try:
                model, _ = train(model, train_ds, loss,
                                 _aggregate_for(method, k), cfg)
            except DivergenceError as exc:
                last_divergence = exc
                continue
            vacc = _accuracy(model, valid_ds.features, valid_ds.labels)
            tacc = _accuracy(model, test_ds.features, test_ds.labels)
            candidates.append((-vacc, lam, k if k is not None else -1, tacc))
    if not candidates:
        raise last_divergence
    candidates.sort()
    neg_vacc, lam, k, tacc = candidates[0]
    return -neg_vacc, tacc, lam, (None if k == -1 else k)


def _standardized_split(data: LabeledDataset, seed):
    tr, va, te = sample_split(data.n, seed)
    std = Standardizer.fit(data.features[tr])
    parts = []
    for idx in (tr, va, te):
        parts.append(
            LabeledDataset(std.transform(data.features[idx]), data.labels[idx],
                           data.name)
        )
    return parts


def run_protocol(data: LabeledDataset, config: ProtocolConfig,
                 on_result=None, done=None) -> dict[str, MethodResult]:
    """The repeated-split protocol over all configured methods.

    `done` optionally maps (split_index, method) -> (lambda, k, valid_acc,
    test_acc) rows recorded by an earlier interrupted run; those work items
    are replayed from the record instead of retrained.  `on_result` is
    called after each freshly computed (split, method) with its row.
    """
    results = {m: MethodResult(m) for m in config.methods}
    for split_index in range(config.split_count):
        # split seeds are seed_base + index for auditability
        train_ds, valid_ds, test_ds = _standardized_split(
            data, config.seed_base + split_index)
        for method in config.methods:
            res = results[method]
            res.n_train = train_ds.n
            if done and (split_index, method) in done:
                lam, k, vacc, tacc = done[(split_index, method)]
            else:
                init_seed = (config.seed_base, split_index,
                             METHODS.index(method))
                vacc, tacc, lam, k = run_split(train_ds, valid_ds, test_ds,
                                               method, config, init_seed)
                if on_result is not None:
                    on_result(data.name, split_index, method, lam, k, vacc, tacc)
            res.per_split_valid_accuracy.append(vacc)
            res.per_split_test_accuracy.append(tacc)
            res.selected_lambda.append(lam)
            res.selected_k.append(k)
    return results


# ---------------------------------------------------------------------------
# significance


def compare(results_a: MethodResult, results_b: MethodResult):
    """Two-sided paired t-test over shared splits.

    Returns (p_value, mean_diff) with mean_diff = mean(b - a); "b
    significantly outperforms a" means p <= 0.05 and mean_diff > 0.
    Zero-variance differences use the convention p = 1 for all-zero
    diffs and p = 0 for a constant nonzero shift.
    """
    a = np.asarray(results_a.per_split_test_accuracy, dtype=float)
    b = np.asarray(results_b.per_split_test_accuracy, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need paired accuracy vectors of equal length >= 2")
    diffs = b - a
    mean_diff = float(diffs.mean())
    if np.allclose(diffs.std(), 0.0):
        return (1.0 if mean_diff == 0.0 else 0.0), mean_diff
    t_stat, p = stats.ttest_rel(b, a)
    return float(p), mean_diff


@dataclass
class ComparisonMatrix:
    methods: tuple
    significant: np.ndarray   # fraction of datasets where col beats row at p <= .05
    improve2: np.ndarray      # fraction where col beats row by >= 2 accuracy points
    n_datasets: int


def build_matrix(per_dataset: dict[str, dict[str, MethodResult]],
                 methods=None, alpha: float = 0.05,
                 margin: float = 0.02) -> ComparisonMatrix:
    """Pairwise fractions over datasets, Table-1 style: entry (i, j) is the
    fraction of datasets where method j beats method i."""
    datasets = list(per_dataset)
    if not datasets:
        raise ValueError("no datasets")
    if methods is None:
        methods = tuple(per_dataset[datasets[0]].keys())
    m = len(methods)
    sig = np.zeros((m, m))
    imp = np.zeros((m, m))
    for ds in datasets:
        res = per_dataset[ds]
        for i, mi in enumerate(methods):
            for j, mj in enumerate(methods):
                if i == j:
                    continue
                p, diff = compare(res[mi], res[mj])
                if p <= alpha and diff > 0:
                    sig[i, j] += 1
                if diff >= margin:
                    imp[i, j] += 1
    sig /= len(datasets)
    imp /= len(datasets)
    np.fill_diagonal(sig, np.nan)
    np.fill_diagonal(imp, np.nan)
    return ComparisonMatrix(tuple(methods), sig, imp, len(datasets))


def k_star_summary(per_dataset: dict[str, dict[str, MethodResult]]):
    """Per-dataset (median selected k*/n_train, close_decay minus average
    test accuracy) rows for the k*-vs-improvement plot."""
    rows = []
    for ds, res in per_dataset.items():
        if "close_decay" not in res or "average" not in res:
            continue
        cd, avg = res["close_decay"], res["average"]
        n_train = cd.n_train or max(k for k in cd.selected_k if k is not None)
        ratios = [k / n_train for k in cd.selected_k]
        rows.append(
            {
                "dataset": ds,
                "k_star_ratio": float(np.median(ratios)),
                "delta_accuracy": cd.mean_test_accuracy() - avg.mean_test_accuracy(),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# corruption sweeps


def _corrupt(train_ds: LabeledDataset, corruption: str, level: float, seed):
    if level == 0:
        return train_ds
    if corruption == "outliers":
        return inject_outliers(train_ds, level, seed)
    if corruption == "imbalance":
        return amplify_imbalance(train_ds, level, seed)
    if corruption == "ambiguous":
        return add_ambiguous(train_ds, level, seed)
    raise ValueError(f"unknown corruption {corruption!r}")


@dataclass
class SweepRow:
    level: float
    method: str
    mean_test_accuracy: float
    majority_baseline: float


def sweep_level(data: LabeledDataset, corruption: str, level: float,
                level_index: int, config: ProtocolConfig) -> list[SweepRow]:
    """One corruption level of a sweep; independent unit of parallel work."""
    accs = {m: [] for m in config.methods}
    baselines = []
    for split_index in range(config.split_count):
        tr, va, te = sample_split(data.n, config.seed_base + split_index)
        train_raw = data.subset(tr)
        corrupt_seed = (config.seed_base, level_index, split_index)
        train_raw = _corrupt(train_raw, corruption, level, corrupt_seed)
        std = Standardizer.fit(train_raw.features)
        train_ds = LabeledDataset(std.transform(train_raw.features),
                                  train_raw.labels, data.name)
        valid_ds = LabeledDataset(std.transform(data.features[va]),
                                  data.labels[va], data.name)
        test_ds = LabeledDataset(std.transform(data.features[te]),
                                 data.labels[te], data.name)
        y_test = test_ds.labels
        baselines.append(max(np.mean(y_test > 0), np.mean(y_test < 0)))
        for method in config.methods:
            init_seed = (config.seed_base, split_index, METHODS.index(method))
            _, tacc, _, _ = run_split(train_ds, valid_ds, test_ds, method,
                                      config, init_seed)
            accs[method].append(tacc)
    return [
        SweepRow(
            level=float(level),
            method=method,
            mean_test_accuracy=float(np.mean(accs[method])),
            majority_baseline=float(np.mean(baselines)),
        )
        for method in config.methods
    ]


def simulate_sweep(data: LabeledDataset, corruption: str, levels,
                   config: ProtocolConfig, jobs: int = 1) -> list[SweepRow]:
    """Accuracy-vs-corruption-level curves.

    Corruption applies to the train portion of each split only (after
    splitting, before standardization); hyperparameters are re-selected at
    every level.  The majority baseline is the best constant-prediction
    accuracy on the test labels, averaged over splits.  Levels are
    independent work items; jobs > 1 runs them in parallel processes with
    a deterministic by-level reduction.
    """
    if corruption not in CORRUPTIONS:
        raise ValueError(f"unknown corruption {corruption!r}")
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(sweep_level, data, corruption, level, i, config)
                for i, level in enumerate(levels)
            ]
            per_level = [f.result() for f in futures]
    else:
        per_level = [
            sweep_level(data, corruption, level, i, config)
            for i, level in enumerate(levels)
        ]
    return [row for rows in per_level for row in rows]
