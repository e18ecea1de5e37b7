"""Per-instance uncertainty scores.

The main scorer repeats stochastic-dropout predictions, then runs
bin count -> top-m mask -> normalize -> entropy on the sampled class
frequencies. Three baselines are provided: predictive entropy of the
mean stochastic softmax, negated output-layer variance, and k-NN label
agreement in feature space. Every scorer reads "higher value = more
uncertain".

Each Monte-Carlo chain draws from a generator seeded by
(seed, instance index, sample index), so parallel and serial scoring
produce identical results.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import EncodedDataset
from .errors import DataError
from .nn import FeatureBatch, ModelState, output_head, pooled_features, softmax

SCORER_KINDS = ("dropout_entropy", "dropout_baseline", "pl_variance", "distance_knn")
STOCHASTIC_KINDS = ("dropout_entropy", "dropout_baseline")


@dataclass
class ScorerConfig:
    kind: str
    num_samples: int = 100
    knn_k: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCORER_KINDS:
            raise DataError(f"unknown scorer kind {self.kind!r}")
        if self.kind in STOCHASTIC_KINDS and self.num_samples < 2:
            raise DataError("stochastic scorers need num_samples >= 2")
        if self.knn_k < 1:
            raise DataError("knn_k must be >= 1")


@dataclass
class PredictionSamples:
    sampled_classes: np.ndarray  # [num_instances, num_samples] int64
    num_classes: int

    def __post_init__(self):
        if self.sampled_classes.size and (
            self.sampled_classes.min() < 0 or self.sampled_classes.max() >= self.num_classes
        ):
            raise DataError("sampled class index out of range")


@dataclass
class UncertaintyScore:
    instance_id: str
    value: float
    predicted_class: int
    scorer: str
    histogram: list[int] | None = None
    true_label: int | None = None


def _instance_masks(
    seed: int, instance: int, num_samples: int, dim: int, p: float, dtype
) -> np.ndarray:
    masks = np.empty((num_samples, dim), dtype=dtype)
    for t in range(num_samples):
        rng = np.random.default_rng([seed, instance, t])
        masks[t] = (rng.random(dim) >= p) / (1.0 - p) if p > 0.0 else 1.0
    return masks


def _mc_logits(model: ModelState, h: np.ndarray, i: int, config: ScorerConfig) -> np.ndarray:
    """Logits of num_samples stochastic dropout passes for instance i,
    reusing the deterministic activations below the dropout layer."""
    masks = _instance_masks(
        config.seed, i, config.num_samples, h.shape[1], model.config.dropout_p, h.dtype
    )
    return output_head(model, masks * h[i])


def mc_sample(
    model: ModelState, data: EncodedDataset, num_samples: int, seed: int
) -> PredictionSamples:
    """Argmax class of each of num_samples stochastic forward passes."""
    if num_samples < 2:
        raise DataError("num_samples must be >= 2")
    cfg = ScorerConfig("dropout_entropy", num_samples=num_samples, seed=seed)
    h, _ = pooled_features(model, data.token_ids)
    model._cache = None
    out = np.empty((len(data), num_samples), dtype=np.int64)
    for i in range(len(data)):
        out[i] = _mc_logits(model, h, i, cfg).argmax(axis=1)
    return PredictionSamples(out, model.config.num_classes)


def bin_count(samples_row: np.ndarray, num_classes: int) -> np.ndarray:
    row = np.asarray(samples_row)
    if row.size and (row.min() < 0 or row.max() >= num_classes):
        raise DataError("class index out of range")
    return np.bincount(row, minlength=num_classes).astype(np.int64)


def mask_top_m(histogram: np.ndarray, num_classes: int) -> np.ndarray:
    """Keep the floor(2c/3) largest bins when there are more than 10
    classes, zeroing the rest; with 10 or fewer classes this is the
    identity. Ties at the cutoff keep the lower class index."""
    histogram = np.asarray(histogram)
    if num_classes <= 10:
        return histogram.copy()
    m = (2 * num_classes) // 3
    order = np.lexsort((np.arange(num_classes), -histogram))
    masked = np.zeros_like(histogram)
    keep = order[:m]
    masked[keep] = histogram[keep]
    return masked


def normalize(histogram: np.ndarray) -> np.ndarray:
    histogram = np.asarray(histogram, dtype=np.float64)
    total = histogram.sum()
    if total <= 0:
        raise DataError("cannot normalize an all-zero histogram")
    return histogram / total


def entropy(probabilities: np.ndarray) -> float:
    """Natural-log entropy with 0*log(0) = 0."""
    p = np.asarray(probabilities, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def deterministic_features(model: ModelState, data: EncodedDataset) -> FeatureBatch:
    h, _ = pooled_features(model, data.token_ids)
    model._cache = None
    return FeatureBatch(h, model.config.feature_dim, data.labels)


def de_score(
    model: ModelState, data: EncodedDataset, config: ScorerConfig
) -> list[UncertaintyScore]:
    """The histogram-entropy pipeline over Monte-Carlo dropout samples."""
    if config.kind != "dropout_entropy":
        raise DataError("de_score requires kind == dropout_entropy")
    samples = mc_sample(model, data, config.num_samples, config.seed)
    scores = []
    for i in range(len(data)):
        hist = bin_count(samples.sampled_classes[i], samples.num_classes)
        predicted = int(hist.argmax())
        u = entropy(normalize(mask_top_m(hist, samples.num_classes)))
        scores.append(
            UncertaintyScore(
                data.doc_ids[i], u, predicted, config.kind,
                histogram=[int(c) for c in hist],
                true_label=int(data.labels[i]),
            )
        )
    return scores


def dropout_baseline_score(
    model: ModelState, data: EncodedDataset, config: ScorerConfig
) -> list[UncertaintyScore]:
    """Predictive entropy of the mean softmax over stochastic passes."""
    if config.kind != "dropout_baseline":
        raise DataError("dropout_baseline_score requires kind == dropout_baseline")
    h, _ = pooled_features(model, data.token_ids)
    model._cache = None
    scores = []
    for i in range(len(data)):
        mean_p = softmax(_mc_logits(model, h, i, config)).mean(axis=0)
        scores.append(
            UncertaintyScore(
                data.doc_ids[i], entropy(mean_p), int(mean_p.argmax()), config.kind,
                true_label=int(data.labels[i]),
            )
        )
    return scores


def pl_variance_score(model: ModelState, data: EncodedDataset) -> list[UncertaintyScore]:
    """Negated variance of the deterministic output-layer activations, so
    flat (uninformative) outputs get the highest score."""
    h, _ = pooled_features(model, data.token_ids)
    model._cache = None
    logits = output_head(model, h)
    scores = []
    for i in range(len(data)):
        scores.append(
            UncertaintyScore(
                data.doc_ids[i],
                -float(np.var(np.asarray(logits[i], dtype=np.float64))),
                int(logits[i].argmax()),
                "pl_variance",
                true_label=int(data.labels[i]),
            )
        )
    return scores


def distance_confidence_score(
    model: ModelState,
    data: EncodedDataset,
    train_features: FeatureBatch,
    config: ScorerConfig,
) -> list[UncertaintyScore]:
    """One minus the exp(-distance)-weighted share of nearest training
    neighbors that agree with the predicted class."""
    if train_features.labels is None:
        raise DataError("distance scorer needs labeled training features")
    n_train = train_features.features.shape[0]
    if n_train == 0:
        raise DataError("distance scorer needs non-empty training features")
    if config.knn_k > n_train:
        raise DataError(f"knn_k={config.knn_k} exceeds {n_train} training features")
    h, _ = pooled_features(model, data.token_ids)
    model._cache = None
    logits = output_head(model, h)
    preds = logits.argmax(axis=1)
    f = np.asarray(h, dtype=np.float64)
    g = np.asarray(train_features.features, dtype=np.float64)
    d = (
        (f * f).sum(axis=1)[:, None]
        + (g * g).sum(axis=1)[None, :]
        - 2.0 * (f @ g.T)
    )
    np.maximum(d, 0.0, out=d)
    d /= train_features.dim
    labels = np.asarray(train_features.labels)
    scores = []
    for i in range(len(data)):
        order = np.lexsort((np.arange(n_train), d[i]))[: config.knn_k]
        dn = d[i][order]
        w = np.exp(-(dn - dn.min()))  # shift-invariant: ratios are unchanged
        agree = labels[order] == preds[i]
        confidence = float(w[agree].sum() / w.sum())
        scores.append(
            UncertaintyScore(
                data.doc_ids[i], 1.0 - confidence, int(preds[i]), "distance_knn",
                true_label=int(data.labels[i]),
            )
        )
    return scores


def score_dataset(
    model: ModelState,
    data: EncodedDataset,
    config: ScorerConfig,
    train_features: FeatureBatch | None = None,
) -> list[UncertaintyScore]:
    """Dispatch to the configured scorer."""
    if config.kind == "dropout_entropy":
        return de_score(model, data, config)
    if config.kind == "dropout_baseline":
        return dropout_baseline_score(model, data, config)
    if config.kind == "pl_variance":
        return pl_variance_score(model, data)
    if train_features is None:
        raise DataError("distance_knn scorer needs train_features")
    return distance_confidence_score(model, data, train_features, config)
