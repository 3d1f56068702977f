"""Full-batch gradient descent over (model, individual loss, aggregate) triples.

Supports every fixed aggregate plus the decaying-k schedule: the first third
of the epochs runs with k = n (the convex, average-like phase), the middle
third decays k linearly to k*, and the final third holds k*.

Per epoch the step direction is the mean of the per-example score gradients
over the aggregate's selected set (examples outside the gradient mask
contribute nothing).  For average / top / atk that mean IS the exact
aggregate gradient; for close-k the exact gradient is the plain sum over the
selected set, so the mean equals it up to the positive factor 1/k: same
direction, with a step size that stays stable across the k schedule.  The
exact gradients are available separately via `aggregate_parameter_gradient`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset
from .losses import (
    AggregateSpec,
    IndividualLoss,
    LossError,
    aggregate_value_and_mask,
    close_k_spec,
    zero_one_errors,
)
from .models import Model


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, message: str = "training diverged"):
        super().__init__(f"{message} at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    learning_rate: float = 0.1
    lam: float = 0.0
    seed: int = 0
    k_star: int | None = None  # close-decay only

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if not np.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ValueError("learning rate must be finite and >= 0")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")


def schedule_k(i: int, epochs: int, n: int, k_star: int) -> int:
    """Decaying-k schedule value for 1-based epoch i.

    k = n while i < epochs/3, then decays linearly via
    k* + round((n - k*)(2*epochs - 3i)/epochs), and holds k* from
    i >= 2*epochs/3 on.  Monotone non-increasing in i.
    """
    if not 1 <= i <= epochs:
        raise ValueError(f"epoch index {i} outside 1..{epochs}")
    if not 1 <= k_star <= n:
        raise ValueError(f"k_star={k_star} out of range for n={n}")
    if i < epochs / 3:
        return n
    if i < 2 * epochs / 3:
        k = k_star + round((n - k_star) * (2 * epochs - 3 * i) / epochs)
        return int(min(n, max(k_star, k)))
    return k_star


@dataclass(frozen=True)
class CloseDecay:
    """Aggregate schedule: close-k with k decaying from n to k_star."""

    k_star: int

    def __post_init__(self):
        if self.k_star < 1:
            raise ValueError("k_star must be positive")


@dataclass
class TraceRow:
    epoch: int
    k: int
    aggregate_loss: float
    train_01_error: float


@dataclass
class LossTrace:
    rows: list[TraceRow] = field(default_factory=list)
    # the dynamic big-M used per epoch; affects the reported close-k value,
    # never the gradient
    big_m: list[float | None] = field(default_factory=list)

    def values(self) -> np.ndarray:
        return np.array([r.aggregate_loss for r in self.rows])


def write_trace_csv(trace: LossTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "k", "aggregate_loss", "train_01_error"])
        for row in trace.rows:
            writer.writerow(
                [row.epoch, row.k, repr(row.aggregate_loss), repr(row.train_01_error)]
            )


def _epoch_spec(aggregate, epoch: int, epochs: int, n: int) -> AggregateSpec:
    if isinstance(aggregate, CloseDecay):
        if epochs < 3 or epochs % 3 != 0:
            raise ValueError("close-decay needs epochs divisible by 3 (and >= 3)")
        if aggregate.k_star > n:
            raise ValueError(f"k_star={aggregate.k_star} exceeds n={n}")
        return close_k_spec(schedule_k(epoch, epochs, n, aggregate.k_star))
    if aggregate.variant != "average" and aggregate.k > n:
        raise ValueError(f"k={aggregate.k} exceeds n={n}")
    return aggregate


def train(model: Model, data: LabeledDataset, loss: IndividualLoss,
          aggregate, config: TrainConfig):
    """Run config.epochs full-batch steps; returns (model, LossTrace).

    `aggregate` is an AggregateSpec or a CloseDecay schedule.  Each epoch
    computes all n individual losses, evaluates the aggregate to get the
    gradient mask, averages the masked per-example gradients, and applies
    the L2-regularized update.  The trace records the pre-step objective.
    """
    if isinstance(aggregate, CloseDecay) and config.k_star is not None:
        aggregate = CloseDecay(config.k_star)
    n = data.n
    X, y = data.features, data.labels
    # keep the explicit L2 decay w * (1 - 2*lr*lam) contractive for the large
    # grid lambdas; inactive for lam <= 4.5 at the default learning rate
    lr = config.learning_rate
    if config.lam > 0:
        lr = min(lr, 0.45 / config.lam)
    trace = LossTrace()
    for epoch in range(1, config.epochs + 1):
        spec = _epoch_spec(aggregate, epoch, config.epochs, n)
        scores = model.forward_batch(X)
        try:
            losses = loss.value(y, scores)
            report = aggregate_value_and_mask(spec, losses, loss.threshold)
        except LossError as exc:
            raise DivergenceError(epoch, str(exc)) from exc
        trace.rows.append(
            TraceRow(
                epoch=epoch,
                k=int(report.selected_indices.size if spec.variant != "top" else spec.k),
                aggregate_loss=report.aggregate_value,
                train_01_error=float(np.mean(zero_one_errors(y, scores))),
            )
        )
        trace.big_m.append(report.big_m)

        if lr == 0.0:
            continue
        sel = report.selected_indices
        upstream = np.zeros(n)
        upstream[sel] = loss.derivative(y[sel], scores[sel]) / sel.size
        grads = model.backward_batch(X, upstream)
        try:
            model = model.apply_update(grads, lr, config.lam)
        except ValueError as exc:
            raise DivergenceError(epoch, str(exc)) from exc
    return model, trace


def aggregate_parameter_gradient(model: Model, data: LabeledDataset,
                                 loss: IndividualLoss, spec: AggregateSpec):
    """Exact d(aggregate value)/d(parameters) at the current model.

    Uses the aggregate's per-example coefficients (1/n for average, 1/k on
    the top-k for atk, 1 on the selected set for top and close-k), i.e. the
    gradient of the value holding the selection fixed; the close-k M terms
    contribute nothing.  Returns (gradient dict, LossReport).
    """
    scores = model.forward_batch(data.features)
    losses = loss.value(data.labels, scores)
    report = aggregate_value_and_mask(spec, losses, loss.threshold)
    upstream = report.grad_coeffs * loss.derivative(data.labels, scores)
    return model.backward_batch(data.features, upstream), report


def objective_value(model: Model, data: LabeledDataset, loss: IndividualLoss,
                    spec: AggregateSpec, lam: float = 0.0) -> float:
    """Aggregate value plus the L2 penalty on weights (biases excluded)."""
    from .models import weight_norm_sq

    scores = model.forward_batch(data.features)
    losses = loss.value(data.labels, scores)
    report = aggregate_value_and_mask(spec, losses, loss.threshold)
    return report.aggregate_value + lam * weight_norm_sq(model)
