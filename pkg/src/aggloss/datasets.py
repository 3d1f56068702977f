"""Dataset plumbing: synthetic generators, corruption transforms, delimited
file I/O, train-only standardization, and split sampling.

Every function returns a fresh LabeledDataset; inputs are never mutated.
Labels are always in {-1, +1}.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class DatasetError(ValueError):
    """Malformed dataset file or invalid generator/transform arguments."""


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray  # (n, d)
    labels: np.ndarray    # (n,) over {-1, +1}
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise DatasetError("features must be a non-empty (n, d) matrix")
        if y.shape != (X.shape[0],):
            raise DatasetError("labels length must match feature rows")
        if not np.all(np.isfinite(X)):
            raise DatasetError("non-finite feature value")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise DatasetError("labels must be -1 or +1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset(self.features[indices], self.labels[indices], self.name)


def _stack(parts, name: str) -> LabeledDataset:
    X = np.vstack([p[0] for p in parts])
    y = np.concatenate([p[1] for p in parts])
    return LabeledDataset(X, y, name)


# ---------------------------------------------------------------------------
# synthetic generators


def gen_example1(n: int, outlier_magnitude: float = 1000.0) -> LabeledDataset:
    """Separable 1-D data plus one mislabeled far outlier on each side.

    2n + 2 points: n at (-1, -1), n at (+1, +1), one at (+M, -1) and one at
    (-M, +1).  A boundary near 0 misclassifies only the two outliers, so the
    optimal linear 0-1 loss is exactly 2.  Deterministic (no seed).
    """
    if n < 1:
        raise DatasetError("n must be >= 1")
    if not outlier_magnitude > n:
        raise DatasetError("outlier magnitude must exceed n")
    M = float(outlier_magnitude)
    xs = np.concatenate([np.full(n, -1.0), np.full(n, 1.0), [M, -M]])
    ys = np.concatenate([np.full(n, -1.0), np.full(n, 1.0), [-1.0, 1.0]])
    return LabeledDataset(xs[:, None], ys, "example1")


def gen_example2(n: int, seed: int = 0) -> LabeledDataset:
    """n negatives uniform on (-1, 1) and n positives uniform on (0, 1), 1-D.

    The best linear threshold sits at 0 with accuracy -> 0.75 as n grows.
    """
    if n < 1:
        raise DatasetError("n must be >= 1")
    rng = np.random.default_rng(seed)
    neg = rng.uniform(-1.0, 1.0, n)
    pos = rng.uniform(0.0, 1.0, n)
    xs = np.concatenate([neg, pos])
    ys = np.concatenate([np.full(n, -1.0), np.full(n, 1.0)])
    return LabeledDataset(xs[:, None], ys, "example2")


FIGURE1_SCENARIOS = ("easy", "imbalance", "imbalance_outlier", "ambiguous")

# geometry for the 2-D scenario generators: the first feature carries the
# signal (a margin around x = 0 stays empty, so the vertical line x = 0
# attains the optimal linear error by construction); the second feature is
# N(0, 1) noise.  The easy mass reaches down toward the near clusters so
# that a boundary sacrificing the small cluster parks right next to it,
# which is the regime the boundary-focused losses can undo.
_EASY_GAP = 0.10      # empty margin half-width around x = 0
_IMB_GAP = 0.02
_NEAR_SPREAD = 0.04   # offset/spread of the near clusters beyond the margin
_NEAR_SIG = 0.03
_EASY_FAR_X = 3.0     # center/spread of the easy positive mass
_EASY_FAR_SIG = 1.2
_EASY_NEAR_FRAC = 0.10
_EASY_NEG2_X = -1.2
_EASY_NEG2_SIG = 0.4
_IMB_NEG_X = -0.35
_IMB_NEG_SIG = 0.25
_IMB_POS_SIG = 0.02
_OUTLIER_CLUSTER_X = -2.0
_OUTLIER_CLUSTER_FRAC = 0.005


def _near_cluster(rng, count, side, sigma, gap):
    """Tight cluster hugging its side of the empty margin around x = 0."""
    x = gap + np.abs(rng.normal(_NEAR_SPREAD, sigma, count))
    return side * x


def gen_figure1(scenario: str, n: int, seed: int = 0) -> LabeledDataset:
    """2-D scenario datasets: easy, imbalance, imbalance_outlier, ambiguous."""
    if scenario not in FIGURE1_SCENARIOS:
        raise DatasetError(f"unknown scenario {scenario!r}")
    if n < 4:
        raise DatasetError("n must be >= 4")
    rng = np.random.default_rng(seed)

    if scenario == "easy":
        # separable; the positive class carries a large easy mass and a
        # small near-boundary cluster, the negatives a near and a far blob
        n_neg = n // 2
        n_pos = n - n_neg
        n_near_pos = max(1, int(round(_EASY_NEAR_FRAC * n_pos)))
        n_far_pos = n_pos - n_near_pos
        n_near_neg = n_neg // 2
        n_neg2 = n_neg - n_near_neg
        xs = np.concatenate(
            [
                _near_cluster(rng, n_near_neg, -1, _NEAR_SIG, _EASY_GAP),
                np.minimum(rng.normal(_EASY_NEG2_X, _EASY_NEG2_SIG, n_neg2),
                           -_EASY_GAP),
                _near_cluster(rng, n_near_pos, +1, _NEAR_SIG, _EASY_GAP),
                np.maximum(rng.normal(_EASY_FAR_X, _EASY_FAR_SIG, n_far_pos),
                           _EASY_GAP),
            ]
        )
        labels = np.concatenate([np.full(n_neg, -1.0), np.full(n_pos, 1.0)])
        return LabeledDataset(
            np.column_stack([xs, rng.normal(0.0, 1.0, n)]), labels, "figure1_easy"
        )

    if scenario == "imbalance":
        # 9:1 majority:minority, separable at x = 0; the broad majority
        # presses against a tight minority cluster across the margin
        n_neg = (9 * n) // 10
        n_pos = n - n_neg
        xs = np.concatenate(
            [
                np.minimum(rng.normal(_IMB_NEG_X, _IMB_NEG_SIG, n_neg), -_IMB_GAP),
                _near_cluster(rng, n_pos, +1, _IMB_POS_SIG, _IMB_GAP),
            ]
        )
        labels = np.concatenate([np.full(n_neg, -1.0), np.full(n_pos, 1.0)])
        return LabeledDataset(
            np.column_stack([xs, rng.normal(0.0, 1.0, n)]), labels,
            "figure1_imbalance",
        )

    if scenario == "imbalance_outlier":
        n_out = max(2, int(round(_OUTLIER_CLUSTER_FRAC * n)))
        base = gen_figure1("imbalance", n - n_out, seed)
        out_x = rng.normal(_OUTLIER_CLUSTER_X, 0.2, n_out)
        outliers = np.column_stack([out_x, rng.normal(0.0, 1.0, n_out)])
        return _stack(
            [
                (base.features, base.labels),
                (outliers, np.full(n_out, 1.0)),
            ],
            "figure1_imbalance_outlier",
        )

    # ambiguous: 2-D analogue of example 2; y carries no signal
    n_neg = n // 2
    n_pos = n - n_neg
    neg = np.column_stack([rng.uniform(-1, 1, n_neg), rng.uniform(-1, 1, n_neg)])
    pos = np.column_stack([rng.uniform(0, 1, n_pos), rng.uniform(-1, 1, n_pos)])
    return _stack(
        [(neg, np.full(n_neg, -1.0)), (pos, np.full(n_pos, 1.0))],
        "figure1_ambiguous",
    )


# ---------------------------------------------------------------------------
# corruption transforms


def _class_rows(data: LabeledDataset, label: float) -> np.ndarray:
    return np.flatnonzero(data.labels == label)


def inject_outliers(data: LabeledDataset, fraction: float, seed: int = 0) -> LabeledDataset:
    """Append ceil(fraction * n) synthetic outliers.

    Each outlier samples a class c proportional to class frequency, one point
    x1 from class c and one point x2 from the opposite class, and gets
    features 10*x2 - 9*x1 with label c: far from the boundary, wrong side.
    """
    if not 0 < fraction < 1:
        raise DatasetError("fraction must be in (0, 1)")
    pos = _class_rows(data, 1.0)
    neg = _class_rows(data, -1.0)
    if pos.size == 0 or neg.size == 0:
        raise DatasetError("outlier injection needs both classes present")
    rng = np.random.default_rng(seed)
    m = math.ceil(fraction * data.n)
    p_pos = pos.size / data.n
    new_X = np.empty((m, data.dim))
    new_y = np.empty(m)
    for i in range(m):
        c = 1.0 if rng.random() < p_pos else -1.0
        same, other = (pos, neg) if c > 0 else (neg, pos)
        x1 = data.features[same[rng.integers(same.size)]]
        x2 = data.features[other[rng.integers(other.size)]]
        new_X[i] = 10.0 * x2 - 9.0 * x1
        new_y[i] = c
    return _stack(
        [(data.features, data.labels), (new_X, new_y)],
        data.name + "+outliers",
    )


def amplify_imbalance(data: LabeledDataset, target_majority_frac: float,
                      seed: int = 0) -> LabeledDataset:
    """Duplicate random negative rows until negatives/total >= target."""
    if not 0.5 < target_majority_frac < 1:
        raise DatasetError("target majority fraction must be in (0.5, 1)")
    neg = _class_rows(data, -1.0)
    if neg.size == 0:
        raise DatasetError("no negative examples to duplicate")
    N, P = neg.size, data.n - neg.size
    if N / data.n >= target_majority_frac:
        return LabeledDataset(data.features.copy(), data.labels.copy(), data.name)
    t = target_majority_frac
    # smallest duplicate count with (N + dup)/(n + dup) >= t; start just
    # below the closed-form value to dodge float round-up at exact targets
    dup = max(0, math.ceil((t * (N + P) - N) / (1.0 - t)) - 2)
    while (N + dup) / (N + P + dup) < t:
        dup += 1
    rng = np.random.default_rng(seed)
    picks = neg[rng.integers(neg.size, size=dup)]
    return _stack(
        [(data.features, data.labels), (data.features[picks], data.labels[picks])],
        data.name + "+imbalance",
    )


def add_ambiguous(data: LabeledDataset, fraction: float, seed: int = 0) -> LabeledDataset:
    """Append exact copies of random negative rows relabeled +1."""
    if not 0 < fraction < 1:
        raise DatasetError("fraction must be in (0, 1)")
    neg = _class_rows(data, -1.0)
    if neg.size == 0:
        raise DatasetError("no negative examples to copy")
    rng = np.random.default_rng(seed)
    m = math.ceil(fraction * data.n)
    picks = neg[rng.integers(neg.size, size=m)]
    return _stack(
        [(data.features, data.labels), (data.features[picks], np.full(m, 1.0))],
        data.name + "+ambiguous",
    )


# ---------------------------------------------------------------------------
# delimited file I/O


def load_table(path, label_column: str = "target") -> LabeledDataset:
    """Load a comma- or tab-delimited file with a header row.

    The label column must hold exactly two distinct raw values; the
    lexicographically larger one maps to +1.  All other columns must be
    numeric and become features in header order.
    """
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            raise DatasetError(f"{path}: empty file")
        delimiter = "\t" if "\t" in first else ","
        fh.seek(0)
        rows = list(csv.reader(fh, delimiter=delimiter))
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DatasetError(f"{path}: duplicate header names")
    if label_column not in header:
        raise DatasetError(f"{path}: missing label column {label_column!r}")
    label_idx = header.index(label_column)
    feature_names = [h for i, h in enumerate(header) if i != label_idx]
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    if not body:
        raise DatasetError(f"{path}: no data rows")

    raw_labels = []
    feats = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields")
        raw_labels.append(row[label_idx].strip())
        vals = []
        for i, cell in enumerate(row):
            if i == label_idx:
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise DatasetError(
                    f"{path}:{lineno}: non-numeric value {cell!r} in column "
                    f"{header[i]!r}"
                ) from None
        feats.append(vals)

    classes = sorted(set(raw_labels))
    if len(classes) != 2:
        raise DatasetError(
            f"{path}: label column must have exactly 2 distinct values, "
            f"found {len(classes)}"
        )
    positive = classes[1]  # lexicographically larger -> +1
    y = np.array([1.0 if v == positive else -1.0 for v in raw_labels])
    X = np.asarray(feats, dtype=float)
    if not np.all(np.isfinite(X)):
        raise DatasetError(f"{path}: non-finite feature value")
    ds = LabeledDataset(X, y, name=str(path))
    return ds


def save_table(data: LabeledDataset, path, delimiter: str = ",") -> None:
    """Write a dataset in the same delimited format load_table accepts."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow([f"f{i}" for i in range(data.dim)] + ["target"])
        for x, y in zip(data.features, data.labels):
            writer.writerow([repr(float(v)) for v in x] + [str(int(y))])


# ---------------------------------------------------------------------------
# standardization and splits


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, train_features) -> "Standardizer":
        X = np.asarray(train_features, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std == 0.0, 1.0, std)  # constant columns map to 0
        return cls(mean, std)

    def transform(self, features) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.mean) / self.std


def sample_split(n: int, seed: int, train_frac: float = 0.5,
                 valid_frac: float = 0.25):
    """Disjoint (train, valid, test) index arrays covering range(n)."""
    if n < 4:
        raise DatasetError("need at least 4 examples to split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(math.floor(train_frac * n))
    n_valid = int(math.floor(valid_frac * n))
    return (
        perm[:n_train],
        perm[n_train : n_train + n_valid],
        perm[n_train + n_valid :],
    )


# ---------------------------------------------------------------------------
# exhaustive 1-D threshold oracle


def threshold_scan(xs, labels):
    """Exact optimal 0-1 error over 1-D threshold classifiers.

    Scans all distinct split positions (n + 1 of them for distinct values)
    times both orientations of sign(x - t); returns
    (error_count, threshold, orientation).  Used as the ground-truth oracle
    for the scenario fixtures and small-instance suboptimality checks.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    n = xs.size
    if n == 0:
        raise DatasetError("empty input")
    order = np.argsort(xs, kind="stable")
    xs_sorted = xs[order]
    pos_below = np.concatenate([[0], np.cumsum(y[order] > 0)])
    neg_below = np.concatenate([[0], np.cumsum(y[order] < 0)])
    n_pos, n_neg = pos_below[-1], neg_below[-1]

    # position i means i points fall below the threshold
    valid = np.ones(n + 1, dtype=bool)
    valid[1:n] = xs_sorted[1:] > xs_sorted[:-1]

    # orientation +1: predict +1 for x > t
    err_up = pos_below + (n_neg - neg_below)
    # orientation -1: predict -1 for x > t
    err_dn = neg_below + (n_pos - pos_below)

    err_up = np.where(valid, err_up, n + 1)
    err_dn = np.where(valid, err_dn, n + 1)
    i_up, i_dn = int(np.argmin(err_up)), int(np.argmin(err_dn))
    if err_up[i_up] <= err_dn[i_dn]:
        best_i, orientation, best = i_up, 1, int(err_up[i_up])
    else:
        best_i, orientation, best = i_dn, -1, int(err_dn[i_dn])

    if best_i == 0:
        t = xs_sorted[0] - 1.0
    elif best_i == n:
        t = xs_sorted[-1] + 1.0
    else:
        t = 0.5 * (xs_sorted[best_i - 1] + xs_sorted[best_i])
    return best, float(t), orientation


def threshold_scan_error_rate(data: LabeledDataset, column: int = 0) -> float:
    count, _, _ = threshold_scan(data.features[:, column], data.labels)
    return count / data.n
