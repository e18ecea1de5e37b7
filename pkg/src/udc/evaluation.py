"""Selective-prediction evaluation: rank by uncertainty, defer the top
ratio to perfect experts, and score what remains (or the combination).

Two deferral semantics are reported side by side:
  remaining_only - metrics over the kept (non-deferred) predictions;
  combined       - deferred predictions are replaced by their true class
                   and metrics cover the whole set.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

MODES = ("remaining_only", "combined")
DEFAULT_RATIOS = (0.0, 0.1, 0.2, 0.3, 0.4)


@dataclass
class ScoredPrediction:
    instance_id: str
    predicted_class: int
    true_class: int
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise DataError(f"non-finite score for instance {self.instance_id!r}")


@dataclass
class DeferralPolicy:
    ratios: tuple[float, ...] = DEFAULT_RATIOS
    mode: str = "remaining_only"

    def __post_init__(self):
        self.ratios = tuple(self.ratios)
        if self.mode not in MODES:
            raise DataError(f"unknown deferral mode {self.mode!r}")
        if any(not 0.0 <= r < 1.0 for r in self.ratios):
            raise DataError("ratios must lie in [0, 1)")
        if list(self.ratios) != sorted(set(self.ratios)):
            raise DataError("ratios must be ascending and unique")


def deferred_count(n: int, ratio: float) -> int:
    # floor(r*n) with a tolerance so exact products like 0.3*10 do not
    # land one below the intended integer.
    return int(math.floor(ratio * n + 1e-9))


def select_deferred(
    predictions: list[ScoredPrediction], ratio: float
) -> tuple[list[ScoredPrediction], list[ScoredPrediction]]:
    """Split into (deferred, kept): the floor(ratio*n) highest scores are
    deferred, ties broken by instance id ascending."""
    if not 0.0 <= ratio < 1.0:
        raise DataError(f"ratio must lie in [0, 1), got {ratio}")
    ranked = sorted(predictions, key=lambda p: (-p.score, p.instance_id))
    cut = deferred_count(len(predictions), ratio)
    return ranked[:cut], ranked[cut:]


def accuracy_arrays(true: np.ndarray, pred: np.ndarray) -> float:
    if len(true) == 0:
        raise DataError("metrics need a non-empty prediction set")
    return float(np.mean(np.asarray(true) == np.asarray(pred)))


def micro_f1_arrays(true: np.ndarray, pred: np.ndarray) -> float:
    """Micro-averaged F1 via globally pooled TP/FP/FN. For single-label
    multiclass this equals accuracy."""
    true = np.asarray(true)
    pred = np.asarray(pred)
    if len(true) == 0:
        raise DataError("metrics need a non-empty prediction set")
    classes = np.unique(np.concatenate([true, pred]))
    tp = fp = fn = 0
    for c in classes:
        tp += int(np.sum((pred == c) & (true == c)))
        fp += int(np.sum((pred == c) & (true != c)))
        fn += int(np.sum((pred != c) & (true == c)))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def macro_f1_arrays(true: np.ndarray, pred: np.ndarray) -> float:
    """Macro F1 averaged over the classes present in the true labels;
    a class the model never predicts scores F1 = 0."""
    true = np.asarray(true)
    pred = np.asarray(pred)
    if len(true) == 0:
        raise DataError("metrics need a non-empty prediction set")
    scores = []
    for c in np.unique(true):
        tp = int(np.sum((pred == c) & (true == c)))
        fp = int(np.sum((pred == c) & (true != c)))
        fn = int(np.sum((pred != c) & (true == c)))
        if tp == 0:
            scores.append(0.0)
            continue
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        scores.append(2.0 * precision * recall / (precision + recall))
    return float(np.mean(scores))


def _metrics(true: np.ndarray, pred: np.ndarray) -> dict[str, float]:
    return {
        "accuracy": accuracy_arrays(true, pred),
        "micro_f1": micro_f1_arrays(true, pred),
        "macro_f1": macro_f1_arrays(true, pred),
    }


def accuracy(predictions: list[ScoredPrediction]) -> float:
    return accuracy_arrays(*_arrays(predictions))


def micro_f1(predictions: list[ScoredPrediction]) -> float:
    return micro_f1_arrays(*_arrays(predictions))


def macro_f1(predictions: list[ScoredPrediction]) -> float:
    return macro_f1_arrays(*_arrays(predictions))


def _arrays(predictions: list[ScoredPrediction]) -> tuple[np.ndarray, np.ndarray]:
    true = np.array([p.true_class for p in predictions], dtype=np.int64)
    pred = np.array([p.predicted_class for p in predictions], dtype=np.int64)
    return true, pred


@dataclass
class EvalRow:
    scorer: str
    ratio: float
    mode: str
    accuracy: float
    micro_f1: float
    macro_f1: float
    improvement_ratio: float
    n_deferred: int


@dataclass
class EvalReport:
    rows: list[EvalRow]
    seed: int = 0
    config: dict = field(default_factory=dict)


def _metrics_at_ratio(
    predictions: list[ScoredPrediction], ratio: float, mode: str
) -> tuple[dict[str, float], int]:
    deferred, kept = select_deferred(predictions, ratio)
    if mode == "remaining_only":
        if not kept:
            raise DataError(f"ratio {ratio} leaves no kept predictions")
        return _metrics(*_arrays(kept)), len(deferred)
    true, pred = _arrays(predictions)
    deferred_ids = {p.instance_id for p in deferred}
    pred = pred.copy()
    for i, p in enumerate(predictions):
        if p.instance_id in deferred_ids:
            pred[i] = p.true_class
    return _metrics(true, pred), len(deferred)


def evaluate(
    predictions: list[ScoredPrediction],
    policy: DeferralPolicy,
    scorer: str = "scorer",
) -> EvalReport:
    """Metric table over the policy's ratios. The improvement ratio is
    relative micro-F1 gain over the ratio-0 row."""
    if not predictions:
        raise DataError("evaluate needs at least one prediction")
    rows = []
    base = None
    for ratio in policy.ratios:
        m, n_def = _metrics_at_ratio(predictions, ratio, policy.mode)
        if base is None:
            base_m, _ = _metrics_at_ratio(predictions, 0.0, policy.mode)
            base = base_m["micro_f1"]
        improvement = (m["micro_f1"] - base) / base if base > 0 else 0.0
        rows.append(
            EvalRow(scorer, ratio, policy.mode, m["accuracy"], m["micro_f1"],
                    m["macro_f1"], improvement, n_def)
        )
    return EvalReport(rows, config={"ratios": list(policy.ratios), "mode": policy.mode})


def random_deferral_baseline(
    predictions: list[ScoredPrediction],
    ratio: float,
    trials: int,
    seed: int,
    mode: str = "remaining_only",
) -> dict[str, float]:
    """Mean metrics over `trials` uniformly random deferred subsets of the
    same size floor(ratio*n); the control condition for any scorer."""
    if trials < 1:
        raise DataError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    n = len(predictions)
    cut = deferred_count(n, ratio)
    true, pred = _arrays(predictions)
    sums = {"accuracy": 0.0, "micro_f1": 0.0, "macro_f1": 0.0}
    for _ in range(trials):
        deferred_idx = rng.choice(n, size=cut, replace=False)
        if mode == "remaining_only":
            keep = np.ones(n, dtype=bool)
            keep[deferred_idx] = False
            m = _metrics(true[keep], pred[keep])
        else:
            adjusted = pred.copy()
            adjusted[deferred_idx] = true[deferred_idx]
            m = _metrics(true, adjusted)
        for k in sums:
            sums[k] += m[k]
    return {k: v / trials for k, v in sums.items()}


REPORT_COLUMNS = [
    "scorer", "ratio", "mode", "accuracy", "micro_f1", "macro_f1",
    "improvement_ratio", "n_deferred", "seed",
]


def write_report_csv(rows: list[EvalRow], path: str | Path, seed: int) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in rows:
            writer.writerow(
                [r.scorer, repr(r.ratio), r.mode, repr(r.accuracy), repr(r.micro_f1),
                 repr(r.macro_f1), repr(r.improvement_ratio), r.n_deferred, seed]
            )


def format_report_table(rows: list[EvalRow]) -> str:
    """Aligned text table: one line per (scorer, mode), one column pair
    (micro-F1 and relative improvement) per deferral ratio."""
    ratios = sorted({r.ratio for r in rows})
    header = ["scorer", "mode"] + [f"{int(round(r * 100))}%" for r in ratios]
    lines = []
    groups: dict[tuple[str, str], dict[float, EvalRow]] = {}
    for r in rows:
        groups.setdefault((r.scorer, r.mode), {})[r.ratio] = r
    for (scorer, mode), per_ratio in sorted(groups.items()):
        cells = [scorer, mode]
        for ratio in ratios:
            row = per_ratio.get(ratio)
            cells.append(
                f"{row.micro_f1:.3f} ({row.improvement_ratio * 100:+.2f}%)"
                if row is not None
                else "-"
            )
        lines.append(cells)
    widths = [max(len(h), *(len(l[i]) for l in lines)) if lines else len(h)
              for i, h in enumerate(header)]
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths))
    return "\n".join([fmt(header), fmt(["-" * w for w in widths])] + [fmt(l) for l in lines])
