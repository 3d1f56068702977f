"""Aggregate-loss classification toolkit.

Boundary-focused aggregate losses (close-k and its decaying-k training
schedule) alongside the usual baselines (average, top-k, average top-k),
linear / residual-MLP models trained by full-batch gradient descent,
synthetic scenario generators and corruption transforms, and a
split-protocol benchmark harness with pairwise significance matrices.
"""

from .datasets import (
    LabeledDataset,
    Standardizer,
    add_ambiguous,
    amplify_imbalance,
    gen_example1,
    gen_example2,
    gen_figure1,
    inject_outliers,
    load_table,
    sample_split,
    save_table,
    threshold_scan,
)
from .losses import (
    HINGE,
    LOGISTIC,
    AggregateSpec,
    IndividualLoss,
    LossReport,
    aggregate_value_and_mask,
    average_spec,
    average_top_k_spec,
    close_k_spec,
    close_k_value,
    select_close_k,
    top_k_spec,
)
from .models import LinearModel, ResidualMlpModel, init_model, load_model, save_model
from .training import (
    CloseDecay,
    DivergenceError,
    LossTrace,
    TrainConfig,
    schedule_k,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
