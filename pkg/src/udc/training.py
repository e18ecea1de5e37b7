"""Mini-batch Adam training with validation-based early stopping."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import EncodedDataset
from .errors import TrainingError
from .evaluation import macro_f1_arrays, micro_f1_arrays
from .metric import MetricConfig, metric_loss, partition_by_class
from .nn import (
    DropoutMode,
    FeatureBatch,
    ModelState,
    adam_step,
    backward,
    forward,
    softmax_cross_entropy,
)

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    ce_loss: float
    metric_loss: float
    val_micro_f1: float
    val_macro_f1: float


@dataclass
class TrainResult:
    model: ModelState
    log: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_val_micro_f1: float = 0.0


def predict_classes(model: ModelState, data: EncodedDataset, batch_size: int = 256) -> np.ndarray:
    """Deterministic argmax predictions over a dataset."""
    preds = []
    for start in range(0, len(data), batch_size):
        logits, _ = forward(model, data.token_ids[start : start + batch_size])
        preds.append(logits.argmax(axis=1))
    model._cache = None
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def train(
    model: ModelState,
    train_data: EncodedDataset,
    valid_data: EncodedDataset,
    config: TrainConfig,
    metric_config: MetricConfig | None = None,
) -> TrainResult:
    """Train in place and return the checkpoint with the best validation
    micro-F1, stopping after `patience` epochs without improvement.

    A metric_config with lambda_weight == 0 disables the metric path
    entirely, so it is bit-identical to passing None.
    """
    if len(train_data) == 0 or len(valid_data) == 0:
        raise TrainingError("training and validation sets must be non-empty")
    metric_on = metric_config is not None and metric_config.lambda_weight > 0.0
    rng = np.random.default_rng(config.seed)
    n = len(train_data)
    result = TrainResult(model=model.copy())
    best = -np.inf
    stale = 0
    params = model.trainable_parameters()
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        ce_sum = 0.0
        ml_sum = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            ids = train_data.token_ids[idx]
            labels = train_data.labels[idx]
            logits, feats = forward(model, ids, DropoutMode.TRAIN_STOCHASTIC, rng)
            ce, dlogits = softmax_cross_entropy(logits, labels)
            dfeat = None
            ml = 0.0
            if metric_on:
                batch = FeatureBatch(feats.features, feats.dim, labels)
                ml, dfeat = metric_loss(batch, partition_by_class(labels), metric_config)
            backward(model, dlogits, dfeat)
            adam_step(params, config)
            ce_sum += ce
            ml_sum += ml
            n_batches += 1
        val_preds = predict_classes(model, valid_data)
        val_micro = micro_f1_arrays(valid_data.labels, val_preds)
        val_macro = macro_f1_arrays(valid_data.labels, val_preds)
        result.log.append(
            EpochStats(epoch, ce_sum / n_batches, ml_sum / n_batches, val_micro, val_macro)
        )
        if val_micro > best:
            best = val_micro
            result.model = model.copy()
            result.best_epoch = epoch
            result.best_val_micro_f1 = val_micro
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return result


def write_train_log(log: list[EpochStats], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "ce_loss", "metric_loss", "val_micro_f1", "val_macro_f1"])
        for row in log:
            writer.writerow(
                [row.epoch, repr(row.ce_loss), repr(row.metric_loss),
                 repr(row.val_micro_f1), repr(row.val_macro_f1)]
            )
