"""Individual surrogate losses and aggregate losses over a batch.

Individual losses (logistic, hinge) map a ±1 label and a real score to a
nonnegative value; each carries the threshold T below which an example is
correctly classified (loss < T iff margin y*score > 0).  Aggregates collapse
the n individual losses of a batch into a single objective and a gradient
mask saying which examples contribute gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

LOG2 = math.log(2.0)


class LossError(ValueError):
    """Invalid input to a loss computation (non-finite score, bad k, bad M)."""


@dataclass(frozen=True)
class IndividualLoss:
    """A surrogate loss kind together with its correctness threshold."""

    kind: str
    threshold: float

    def value(self, y, score):
        """Per-example loss, vectorized over numpy inputs. Stable to |margin| ~ 1e3."""
        y = np.asarray(y, dtype=float)
        score = np.asarray(score, dtype=float)
        if not np.all(np.isfinite(score)):
            raise LossError("non-finite model score")
        margin = y * score
        if self.kind == "logistic":
            return np.logaddexp(0.0, -margin)
        return np.maximum(0.0, 1.0 - margin)

    def derivative(self, y, score):
        """d loss / d score.  Hinge uses subgradient 0 at the kink (margin == 1)."""
        y = np.asarray(y, dtype=float)
        score = np.asarray(score, dtype=float)
        if not np.all(np.isfinite(score)):
            raise LossError("non-finite model score")
        margin = y * score
        if self.kind == "logistic":
            return -y * expit(-margin)
        return np.where(1.0 - margin > 0.0, -y, 0.0)


LOGISTIC = IndividualLoss("logistic", LOG2)
HINGE = IndividualLoss("hinge", 1.0)

LOSS_KINDS = {"logistic": LOGISTIC, "hinge": HINGE}


def individual_loss(loss: IndividualLoss, y: float, score: float) -> float:
    if y not in (-1, 1):
        raise LossError(f"label must be -1 or +1, got {y}")
    return float(loss.value(y, score))


def individual_loss_derivative(loss: IndividualLoss, y: float, score: float) -> float:
    if y not in (-1, 1):
        raise LossError(f"label must be -1 or +1, got {y}")
    return float(loss.derivative(y, score))


# ---------------------------------------------------------------------------
# aggregate specs


@dataclass(frozen=True)
class AggregateSpec:
    """One of the aggregate-loss variants.

    variant: "average" | "top" | "atk" | "close"
    k: required for all variants except "average"
    big_m: optional fixed large constant for "close"; when None it is
        recomputed per evaluation as max(10, 10 * max individual loss),
        which guarantees the M >= max(losses) requirement without a
        magic constant.
    """

    variant: str
    k: int | None = None
    big_m: float | None = None

    def __post_init__(self):
        if self.variant not in ("average", "top", "atk", "close"):
            raise LossError(f"unknown aggregate variant {self.variant!r}")
        if self.variant != "average":
            if self.k is None or self.k < 1:
                raise LossError(f"{self.variant} requires a positive k")
        if self.big_m is not None and self.big_m <= 0:
            raise LossError("big_m must be positive")


def average_spec() -> AggregateSpec:
    return AggregateSpec("average")


def top_k_spec(k: int) -> AggregateSpec:
    return AggregateSpec("top", k=k)


def average_top_k_spec(k: int) -> AggregateSpec:
    return AggregateSpec("atk", k=k)


def close_k_spec(k: int, big_m: float | None = None) -> AggregateSpec:
    return AggregateSpec("close", k=k, big_m=big_m)


@dataclass
class LossReport:
    """Value of an aggregate plus which examples carry gradient.

    selected_indices is ordered (by distance to T for close, by descending
    loss for top/atk, by position for average); grad_coeffs[i] is the exact
    partial derivative of the aggregate value w.r.t. the i-th individual
    loss, so the chained parameter gradient is sum_i grad_coeffs[i] * dl_i.
    """

    aggregate_value: float
    selected_indices: np.ndarray
    per_example_mask: np.ndarray
    grad_coeffs: np.ndarray = field(repr=False, default=None)
    big_m: float | None = None


def _validate_losses(losses) -> np.ndarray:
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 1 or losses.size == 0:
        raise LossError("losses must be a non-empty 1-D vector")
    if not np.all(np.isfinite(losses)):
        raise LossError("non-finite individual loss")
    if np.any(losses < 0):
        raise LossError("negative individual loss")
    return losses


def _close_order(losses: np.ndarray, T: float) -> np.ndarray:
    # ascending |loss - T|, ties by ascending original index
    return np.argsort(np.abs(losses - T), kind="stable")


def select_close_k(losses, T: float, k: int) -> np.ndarray:
    """Indices of the k losses nearest T, sorted by ascending |loss - T|.

    Ties are broken by ascending original index (stable), so the selection
    for k is always a prefix of the selection for k + 1.
    """
    losses = _validate_losses(losses)
    n = losses.size
    if not 1 <= k <= n:
        raise LossError(f"k={k} out of range for n={n}")
    return _close_order(losses, T)[:k]


def dynamic_big_m(losses) -> float:
    return max(10.0, 10.0 * float(np.max(losses)))


def _close_value_from_order(losses, T, k, M, order) -> float:
    rest = order[k:]
    incorrect_rest = int(np.count_nonzero(losses[rest] >= T))
    return float(losses[order[:k]].sum()) + M * incorrect_rest


def close_k_value(losses, T: float, k: int, M: float) -> float:
    """Sum of the k losses nearest T, plus 0 per remaining correct example
    (loss < T) and M per remaining incorrect one (loss >= T)."""
    losses = _validate_losses(losses)
    n = losses.size
    if not 1 <= k <= n:
        raise LossError(f"k={k} out of range for n={n}")
    if M < float(np.max(losses)):
        raise LossError(f"M={M} smaller than the largest individual loss")
    return _close_value_from_order(losses, T, k, M, _close_order(losses, T))


def aggregate_value_and_mask(spec: AggregateSpec, losses, T: float) -> LossReport:
    """Evaluate an aggregate over a batch of individual losses.

    average: mean, every example selected with coefficient 1/n.
    top:     the k-th largest loss; only that example selected, coefficient 1.
    atk:     mean of the k largest; those k selected, coefficient 1/k.
    close:   close-k value; the k nearest-to-T selected, coefficient 1
             (the 0 and M terms contribute no gradient).
    """
    losses = _validate_losses(losses)
    n = losses.size
    mask = np.zeros(n, dtype=bool)
    coeffs = np.zeros(n, dtype=float)

    if spec.variant == "average":
        selected = np.arange(n)
        mask[:] = True
        coeffs[:] = 1.0 / n
        return LossReport(float(losses.mean()), selected, mask, coeffs)

    k = spec.k
    if not 1 <= k <= n:
        raise LossError(f"k={k} out of range for n={n}")

    if spec.variant in ("top", "atk"):
        # descending loss, ties by ascending original index
        desc = np.argsort(-losses, kind="stable")
        if spec.variant == "top":
            selected = desc[k - 1 : k]
            mask[selected] = True
            coeffs[selected] = 1.0
            return LossReport(float(losses[selected[0]]), selected, mask, coeffs)
        selected = desc[:k]
        mask[selected] = True
        coeffs[selected] = 1.0 / k
        return LossReport(float(losses[selected].mean()), selected, mask, coeffs)

    # close
    M = spec.big_m if spec.big_m is not None else dynamic_big_m(losses)
    if M < float(np.max(losses)):
        raise LossError(f"M={M} smaller than the largest individual loss")
    order = _close_order(losses, T)
    selected = order[:k]
    value = _close_value_from_order(losses, T, k, M, order)
    mask[selected] = True
    coeffs[selected] = 1.0
    return LossReport(value, selected, mask, coeffs, big_m=M)


def zero_one_errors(labels, scores) -> np.ndarray:
    """Boolean misclassification vector; a zero margin counts as an error."""
    labels = np.asarray(labels, dtype=float)
    scores = np.asarray(scores, dtype=float)
    return labels * scores <= 0.0


def zero_one_error_rate(labels, scores) -> float:
    return float(np.mean(zero_one_errors(labels, scores)))
