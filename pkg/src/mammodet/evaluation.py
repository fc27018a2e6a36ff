"""ROC / AUC evaluation, seed statistics and prediction ensembling."""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import check_probability
from .corpus import Laterality, breast_ground_truth


@dataclass(frozen=True)
class LabeledScore:
    key: tuple
    score: float
    label: int

    def __post_init__(self):
        object.__setattr__(self, "score", check_probability(self.score, "score"))
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "label", int(self.label))


@dataclass(frozen=True)
class RocCurve:
    fpr: tuple
    tpr: tuple
    # thresholds[i] is the score cutoff reaching point i; the origin uses +inf
    thresholds: tuple

    def __len__(self):
        return len(self.fpr)

    def points(self):
        return list(zip(self.fpr, self.tpr))


@dataclass(frozen=True)
class RunStatistics:
    mean: float
    std: float
    n_runs: int


class UndefinedAucError(ValueError):
    pass


def _arrays(items):
    scores = np.array([it.score for it in items], dtype=np.float64)
    labels = np.array([it.label for it in items], dtype=np.int64)
    return scores, labels


def _class_counts(scores, labels):
    """Positive and negative counts per unique score, ascending by score."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"scores and labels differ in length: {scores.size} vs {labels.size}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError(
            f"AUC needs both classes, got {n_pos} positives and {n_neg} negatives"
        )
    uniq, inverse = np.unique(scores, return_inverse=True)
    pos = np.bincount(inverse, weights=labels == 1, minlength=uniq.size).astype(np.int64)
    neg = np.bincount(inverse, weights=labels == 0, minlength=uniq.size).astype(np.int64)
    return uniq, pos, neg


def auc_from_arrays(scores, labels):
    """Mann-Whitney AUC: P(positive score > negative score), ties counting 1/2.

    Computed from exact integer pair counts; the only rounding is the final
    division.
    """
    _, pos, neg = _class_counts(scores, labels)
    neg_below = np.cumsum(neg) - neg
    # twice the U statistic, kept integral
    u2 = int(np.sum(pos * (2 * neg_below + neg)))
    return u2 / (2 * int(pos.sum()) * int(neg.sum()))


def auc(items):
    scores, labels = _arrays(items)
    return auc_from_arrays(scores, labels)


def roc_curve_from_arrays(scores, labels):
    uniq, pos, neg = _class_counts(scores, labels)
    tp = np.concatenate([[0], np.cumsum(pos[::-1])])
    fp = np.concatenate([[0], np.cumsum(neg[::-1])])
    thresholds = np.concatenate([[np.inf], uniq[::-1]])
    return RocCurve(
        fpr=tuple((fp / fp[-1]).tolist()),
        tpr=tuple((tp / tp[-1]).tolist()),
        thresholds=tuple(thresholds.tolist()),
    )


def roc_curve(items):
    """ROC points swept over unique score thresholds, descending.

    Starts at (0, 0) and ends at (1, 1). Tied scores move along a single
    diagonal segment, so the trapezoidal area equals :func:`auc`.
    """
    scores, labels = _arrays(items)
    return roc_curve_from_arrays(scores, labels)


def trapezoid_area(curve):
    fpr = np.asarray(curve.fpr, dtype=np.float64)
    tpr = np.asarray(curve.tpr, dtype=np.float64)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def relative_error_reduction(auc_new, auc_base):
    """Fraction of the baseline's ``1 - AUC`` removed by the new model."""
    if auc_base == 1.0:
        raise ZeroDivisionError("baseline AUC of 1 leaves no error to reduce")
    return (auc_new - auc_base) / (1.0 - auc_base)


def run_statistics(values):
    """Mean and sample (n-1) standard deviation over runs."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("run_statistics needs at least one value")
    n = len(values)
    mean = math.fsum(values) / n
    if n == 1:
        return RunStatistics(mean, 0.0, 1)
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return RunStatistics(mean, math.sqrt(var), n)


class KeyMismatchError(ValueError):
    def __init__(self, difference):
        self.difference = sorted(difference, key=str)
        shown = ", ".join(map(str, self.difference[:10]))
        more = " ..." if len(self.difference) > 10 else ""
        super().__init__(f"prediction sets cover different breasts: {shown}{more}")


def ensemble(prediction_sets):
    """Average per-key scores across sets that cover identical keys.

    Parameters
    ----------
    prediction_sets : sequence of dict
        Each maps a breast key to a score.

    Returns
    -------
    dict
        Same keys, in the first set's order, mapped to the arithmetic mean.
    """
    sets = list(prediction_sets)
    if not sets:
        raise ValueError("ensemble needs at least one prediction set")
    keys = set(sets[0])
    diff = set()
    for s in sets[1:]:
        diff |= keys.symmetric_difference(s)
    if diff:
        raise KeyMismatchError(diff)
    return {k: _mean([s[k] for s in sets]) for k in sets[0]}


def _mean(values):
    # identical members must reproduce the value exactly
    if min(values) == max(values):
        return values[0]
    return math.fsum(values) / len(values)


def ensemble_predictions(prediction_lists, model_id="ensemble"):
    """Ensemble lists of :class:`~mammodet.inference.BreastPrediction`."""
    from .inference import BreastPrediction

    lists = [list(p) for p in prediction_lists]
    mal = ensemble([{p.key: p.malignant_prob for p in preds} for preds in lists])
    ben = ensemble([{p.key: p.benign_prob for p in preds} for preds in lists])
    return [
        BreastPrediction(exam_id=k[0], side=k[1], malignant_prob=mal[k],
                         benign_prob=ben[k], model_id=model_id)
        for k in mal
    ]


def labeled_scores(corpus, predictions):
    """Pair breast predictions with malignancy ground truth from ``corpus``."""
    out = []
    for p in predictions:
        try:
            exam = corpus.exam(p.exam_id)
        except KeyError:
            raise ValueError(f"prediction for unknown exam_id {p.exam_id!r}") from None
        side = Laterality(p.side)
        out.append(LabeledScore((p.exam_id, side), p.malignant_prob, breast_ground_truth(exam, side)))
    return out


# --- roc.csv / metrics.json ------------------------------------------------

ROC_HEADER = ("threshold", "fpr", "tpr")


def write_roc_csv(curve, path):
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ROC_HEADER)
        for t, f, p in zip(curve.thresholds, curve.fpr, curve.tpr):
            writer.writerow((repr(float(t)), repr(float(f)), repr(float(p))))


def read_roc_csv(path):
    """Parse a ``roc.csv`` file; raises ``ValueError`` on malformed content."""
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(h.strip() for h in rows[0]) != ROC_HEADER:
        raise ValueError(f"{path}: expected header {','.join(ROC_HEADER)}")
    thresholds, fpr, tpr = [], [], []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
        try:
            t, f, p = (float(x) for x in row)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric value in {row}") from None
        if not (0.0 <= f <= 1.0 and 0.0 <= p <= 1.0):
            raise ValueError(f"{path}:{lineno}: rates must lie in [0, 1]")
        thresholds.append(t)
        fpr.append(f)
        tpr.append(p)
    if len(fpr) < 2:
        raise ValueError(f"{path}: a ROC curve needs at least two points")
    if np.any(np.diff(fpr) < 0) or np.any(np.diff(tpr) < 0):
        raise ValueError(f"{path}: fpr and tpr must be non-decreasing")
    return RocCurve(tuple(fpr), tuple(tpr), tuple(thresholds))


def metrics_dict(model_id, auc_value, n_pos, n_neg, runs):
    return {
        "model_id": model_id,
        "auc": auc_value,
        "n_pos": n_pos,
        "n_neg": n_neg,
        "runs": {"mean": runs.mean, "std": runs.std, "n": runs.n_runs},
    }


def write_metrics(metrics, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2)
        fh.write("\n")
