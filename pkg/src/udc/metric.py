"""Feature-space metric loss: pull same-class representations together,
push different-class representations at least a margin apart.

Distances are dimension-normalized squared Euclidean:
    D(r_i, r_j) = (1/d) * ||r_i - r_j||^2

The combined loss sums, over every class k present in the batch, the
mean pairwise intra-class distance plus lambda times the hinge
inter-class losses against every other present class. The double sum
visits each unordered class pair twice; that is kept literally.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .nn import FeatureBatch

log = logging.getLogger(__name__)


@dataclass
class MetricConfig:
    margin: float = 0.5
    lambda_weight: float = 0.1

    def __post_init__(self):
        if not (np.isfinite(self.margin) and self.margin >= 0.0):
            raise ValueError("margin must be finite and >= 0")
        if not (np.isfinite(self.lambda_weight) and self.lambda_weight >= 0.0):
            raise ValueError("lambda_weight must be finite and >= 0")


@dataclass
class ClassPartition:
    subsets: dict[int, np.ndarray]  # class index -> row indices
    num_classes_present: int


def partition_by_class(labels: np.ndarray) -> ClassPartition:
    labels = np.asarray(labels)
    subsets = {int(k): np.flatnonzero(labels == k) for k in np.unique(labels)}
    return ClassPartition(subsets, len(subsets))


def pairwise_distance(r_i: np.ndarray, r_j: np.ndarray, dim: int) -> float:
    if dim < 1 or len(r_i) != dim or len(r_j) != dim:
        raise ValueError("feature vectors must both have length dim >= 1")
    diff = np.asarray(r_i, dtype=np.float64) - np.asarray(r_j, dtype=np.float64)
    return float(diff @ diff) / dim


def distance_matrix(features: np.ndarray, dim: int) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    sq = (f * f).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (f @ f.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2 / dim


def intra_loss(batch: FeatureBatch, partition: ClassPartition, k: int) -> float:
    """Mean pairwise distance within class k; zero when the class has
    fewer than two members."""
    idx = partition.subsets[k]
    m = len(idx)
    if m < 2:
        return 0.0
    d = distance_matrix(batch.features[idx], batch.dim)
    total = d[np.triu_indices(m, k=1)].sum()
    return float(2.0 / (m * m - m) * total)


def inter_loss(
    batch: FeatureBatch, partition: ClassPartition, p: int, q: int, margin: float
) -> float:
    """Mean hinge penalty max(0, margin - D) over all cross pairs of
    classes p and q."""
    if p == q:
        raise ValueError("inter_loss needs two distinct classes")
    ip, iq = partition.subsets[p], partition.subsets[q]
    fp = np.asarray(batch.features[ip], dtype=np.float64)
    fq = np.asarray(batch.features[iq], dtype=np.float64)
    d = _cross_distances(fp, fq, batch.dim)
    return float(np.maximum(0.0, margin - d).sum() / (len(ip) * len(iq)))


def _cross_distances(fp: np.ndarray, fq: np.ndarray, dim: int) -> np.ndarray:
    d2 = (
        (fp * fp).sum(axis=1)[:, None]
        + (fq * fq).sum(axis=1)[None, :]
        - 2.0 * (fp @ fq.T)
    )
    np.maximum(d2, 0.0, out=d2)
    return d2 / dim


def metric_loss(
    batch: FeatureBatch, partition: ClassPartition, config: MetricConfig
) -> tuple[float, np.ndarray]:
    """Combined loss and its exact gradient with respect to the features.

    Hinge subgradient at D == margin is taken as zero (inactive). When the
    batch holds a single class the inter term is skipped with a warning.
    """
    feats = np.asarray(batch.features, dtype=np.float64)
    d = batch.dim
    grad = np.zeros_like(feats)
    loss = 0.0
    classes = sorted(partition.subsets)
    if len(classes) < 2:
        log.warning("metric loss batch holds a single class; inter term skipped")
    for k in classes:
        idx = partition.subsets[k]
        m = len(idx)
        if m >= 2:
            fk = feats[idx]
            dm = distance_matrix(fk, d)
            coef = 2.0 / (m * m - m)
            loss += coef * dm[np.triu_indices(m, k=1)].sum()
            # d/dr_i sum_{i<j} D = (2/d) (m r_i - sum_j r_j) per member
            grad[idx] += coef * (2.0 / d) * (m * fk - fk.sum(axis=0))
        for q in classes:
            if q == k:
                continue
            iq = partition.subsets[q]
            fq = feats[iq]
            fk = feats[idx]
            dm = _cross_distances(fk, fq, d)
            hinge = config.margin - dm
            active = dm < config.margin  # strict: boundary pairs contribute 0 grad
            coef = config.lambda_weight / (len(idx) * len(iq))
            loss += coef * np.where(active, hinge, 0.0).sum()
            act = active.astype(np.float64)
            # d/dr (margin - D) flips the sign of the distance gradient.
            grad[idx] += coef * (-2.0 / d) * (
                act.sum(axis=1)[:, None] * fk - act @ fq
            )
            grad[iq] += coef * (-2.0 / d) * (
                act.sum(axis=0)[:, None] * fq - act.T @ fk
            )
    return float(loss), grad


@dataclass
class DistanceStats:
    mean_intra: float
    mean_inter: float
    ratio: float


def distance_statistics(batch: FeatureBatch, partition: ClassPartition) -> DistanceStats:
    """Mean intra-pair and inter-pair distances and their ratio, computed
    in double precision over every unordered pair."""
    if partition.num_classes_present < 2:
        raise DataError("distance statistics need at least two classes")
    if not any(len(v) >= 2 for v in partition.subsets.values()):
        raise DataError("distance statistics need at least one intra-class pair")
    feats = np.asarray(batch.features, dtype=np.float64)
    labels = np.empty(feats.shape[0], dtype=np.int64)
    for k, idx in partition.subsets.items():
        labels[idx] = k
    dm = distance_matrix(feats, batch.dim)
    iu, ju = np.triu_indices(feats.shape[0], k=1)
    same = labels[iu] == labels[ju]
    mean_intra = float(dm[iu[same], ju[same]].mean())
    mean_inter = float(dm[iu[~same], ju[~same]].mean())
    return DistanceStats(mean_intra, mean_inter, mean_intra / mean_inter)
