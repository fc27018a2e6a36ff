"""Detector output post-processing and breast-level aggregation.

Per image: drop detections below ``score_threshold``, run greedy NMS within
each lesion class, then reduce the surviving boxes of a class to one view
score (max by default). Per breast: combine the CC and MLO view scores
(mean by default). A breast imaged in a single view takes that view's
score; a view with no surviving box of a class scores 0.
"""

import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_probability
from .corpus import Laterality, LesionClass, Projection, breast_ground_truth, breast_keys
from .geometry import BoundingBox, boxes_to_array, iou_matrix


class Aggregation(str, Enum):
    MAX_BOX_MEAN_VIEW = "max-box-mean-view"
    MAX_BOX_MAX_VIEW = "max-box-max-view"
    MEAN_BOX_MEAN_VIEW = "mean-box-mean-view"

    @property
    def box_reduce(self):
        return "mean" if self is Aggregation.MEAN_BOX_MEAN_VIEW else "max"

    @property
    def view_reduce(self):
        return "max" if self is Aggregation.MAX_BOX_MAX_VIEW else "mean"


@dataclass(frozen=True)
class Detection:
    image_id: str
    box: BoundingBox
    lesion_class: LesionClass
    score: float
    model_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "score", check_probability(self.score, "score"))
        object.__setattr__(self, "lesion_class", LesionClass(self.lesion_class))


@dataclass(frozen=True)
class InferenceConfig:
    score_threshold: float = 0.001
    nms_iou: float = 0.1
    aggregation: Aggregation = Aggregation.MAX_BOX_MEAN_VIEW

    def __post_init__(self):
        object.__setattr__(self, "score_threshold", check_probability(self.score_threshold, "score_threshold"))
        object.__setattr__(self, "nms_iou", check_probability(self.nms_iou, "nms_iou"))
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))


@dataclass(frozen=True)
class BreastPrediction:
    exam_id: str
    side: Laterality
    malignant_prob: float
    benign_prob: float
    # (view name, malignant view score, benign view score) per available image
    view_scores: tuple = field(default=(), compare=False)
    model_id: str = ""

    @property
    def key(self):
        return (self.exam_id, Laterality(self.side))


class UnknownImageError(ValueError):
    def __init__(self, ids):
        self.ids = sorted(set(ids))
        shown = ", ".join(self.ids[:10]) + (" ..." if len(self.ids) > 10 else "")
        super().__init__(f"detections reference unknown image_id: {shown}")


def filter_by_score(dets, threshold):
    """Detections with ``score >= threshold``, order preserved."""
    return [d for d in dets if d.score >= threshold]


def _greedy_nms(boxes, scores, iou_threshold):
    # stable sort: equal scores keep input order
    order = np.argsort(-scores, kind="stable")
    if len(order) == 1:
        return order.tolist()
    overlaps = iou_matrix(boxes, boxes)
    suppressed = np.zeros(len(order), dtype=bool)
    keep = []
    for i in order:
        if suppressed[i]:
            continue
        keep.append(int(i))
        suppressed |= overlaps[i] > iou_threshold
    return keep


def nms(dets, iou_threshold):
    """Greedy non-maximum suppression within each lesion class.

    The highest-scoring remaining detection is kept and every same-class
    detection overlapping it with IoU strictly above ``iou_threshold`` is
    dropped. Benign and malignant boxes never suppress each other. The
    result is sorted by descending score, ties in input order.
    """
    dets = list(dets)
    by_class = defaultdict(list)
    for i, d in enumerate(dets):
        by_class[d.lesion_class].append(i)
    kept = []
    for idx in by_class.values():
        boxes = boxes_to_array([dets[i].box for i in idx])
        scores = np.array([dets[i].score for i in idx])
        kept.extend(idx[k] for k in _greedy_nms(boxes, scores, iou_threshold))
    kept.sort(key=lambda i: (-dets[i].score, i))
    return [dets[i] for i in kept]


def view_score(dets, lesion_class, reduce="max"):
    """Reduce one image's detections of ``lesion_class`` to a score.

    ``reduce`` is ``"max"`` or ``"mean"``; 0.0 when no detection of the
    class is present.
    """
    lesion_class = LesionClass(lesion_class)
    scores = [d.score for d in dets if d.lesion_class is lesion_class]
    if not scores:
        return 0.0
    if reduce == "max":
        return max(scores)
    if reduce == "mean":
        return float(np.mean(scores))
    raise ValueError(f"unknown reduce {reduce!r}")


def breast_probability(cc_score, mlo_score, strategy=Aggregation.MAX_BOX_MEAN_VIEW):
    """Combine two view scores into a breast probability.

    Either score may be ``None`` for a missing view, in which case the
    other is returned unchanged (0.0 if both are missing).
    """
    strategy = Aggregation(strategy)
    present = [s for s in (cc_score, mlo_score) if s is not None]
    for s in present:
        check_probability(s, "view score")
    if not present:
        return 0.0
    if len(present) == 1:
        return float(present[0])
    if strategy.view_reduce == "max":
        return float(max(present))
    return (present[0] + present[1]) / 2.0


def postprocess_image(dets, config):
    return nms(filter_by_score(dets, config.score_threshold), config.nms_iou)


def predict_breasts(corpus, detections, config=None, model_id=""):
    """Breast-level predictions for every breast in ``corpus`` with an image.

    Returns one :class:`BreastPrediction` per ``(exam_id, side)``, in corpus order.
    """
    config = config or InferenceConfig()
    per_image = defaultdict(list)
    unknown = []
    for d in detections:
        if d.image_id not in corpus.images:
            unknown.append(d.image_id)
        per_image[d.image_id].append(d)
    if unknown:
        raise UnknownImageError(unknown)

    reduce = config.aggregation.box_reduce
    out = []
    for exam_id, side in breast_keys(corpus):
        exam = corpus.exam(exam_id)
        views = {}
        for img in exam.images_for_side(side):
            kept = postprocess_image(per_image.get(img.image_id, ()), config)
            views[img.view.projection] = (
                view_score(kept, LesionClass.MALIGNANT, reduce),
                view_score(kept, LesionClass.BENIGN, reduce),
            )
        missing = (None, None)
        cc, mlo = views.get(Projection.CC, missing), views.get(Projection.MLO, missing)
        out.append(BreastPrediction(
            exam_id=exam_id,
            side=side,
            malignant_prob=breast_probability(cc[0], mlo[0], config.aggregation),
            benign_prob=breast_probability(cc[1], mlo[1], config.aggregation),
            view_scores=tuple(
                (f"{side.value}-{proj.value}", s[0], s[1]) for proj, s in views.items()
            ),
            model_id=model_id,
        ))
    return out


class BreastScorer(BaseEstimator):
    """Estimator wrapper around :func:`predict_breasts`.

    ``fit`` indexes a corpus (nothing is learned); ``transform`` maps a
    list of detections to an ``(n_breasts, 2)`` array of
    ``[malignant_prob, benign_prob]`` rows aligned with ``breast_keys_``.

    Parameters
    ----------
    score_threshold : float, default 0.001
    nms_iou : float, default 0.1
    aggregation : str, default "max-box-mean-view"
    """

    def __init__(self, score_threshold=0.001, nms_iou=0.1, aggregation="max-box-mean-view"):
        self.score_threshold = score_threshold
        self.nms_iou = nms_iou
        self.aggregation = aggregation

    def _config(self):
        return InferenceConfig(self.score_threshold, self.nms_iou, self.aggregation)

    def fit(self, corpus, y=None):
        self._config()
        self.corpus_ = corpus
        self.breast_keys_ = breast_keys(corpus)
        self.labels_ = np.array(
            [breast_ground_truth(corpus.exam(e), s) for e, s in self.breast_keys_], dtype=int
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "corpus_"):
            from sklearn.exceptions import NotFittedError
            raise NotFittedError("BreastScorer is not fitted; call fit(corpus) first")

    def predict_breasts(self, detections, model_id=""):
        self._check_fitted()
        return predict_breasts(self.corpus_, detections, self._config(), model_id)

    def transform(self, detections):
        preds = self.predict_breasts(detections)
        return np.array([[p.malignant_prob, p.benign_prob] for p in preds]).reshape(-1, 2)

    def predict_proba(self, detections):
        """Malignancy probability per breast, aligned with ``breast_keys_``."""
        return self.transform(detections)[:, 0]

    def score(self, detections, y=None):
        """Malignancy AUC of the predictions against corpus ground truth."""
        from .evaluation import auc_from_arrays
        labels = self.labels_ if y is None else np.asarray(y)
        return auc_from_arrays(self.predict_proba(detections), labels)


# --- detections.jsonl / predictions.jsonl ---------------------------------

class RecordFormatError(ValueError):
    def __init__(self, path, line, message):
        self.path, self.line = path, line
        super().__init__(f"{path}:{line}: {message}")


def _iter_jsonl(path):
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, 1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise RecordFormatError(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise RecordFormatError(path, lineno, "record must be a JSON object")
            yield lineno, obj


def detection_to_obj(d):
    return {
        "image_id": d.image_id,
        "class": d.lesion_class.value,
        "score": d.score,
        "box": list(d.box.as_tuple()),
        "model_id": d.model_id,
    }


def write_detections(dets, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in dets:
            fh.write(json.dumps(detection_to_obj(d), separators=(",", ":")) + "\n")


def read_detections(path):
    out = []
    for lineno, obj in _iter_jsonl(path):
        try:
            out.append(Detection(
                image_id=str(obj["image_id"]),
                box=BoundingBox.from_sequence(obj["box"]),
                lesion_class=LesionClass(obj["class"]),
                score=obj["score"],
                model_id=str(obj.get("model_id", "")),
            ))
        except KeyError as exc:
            raise RecordFormatError(path, lineno, f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise RecordFormatError(path, lineno, str(exc)) from None
    return out


def prediction_to_obj(p):
    return {
        "exam_id": p.exam_id,
        "side": Laterality(p.side).value,
        "malignant_prob": p.malignant_prob,
        "benign_prob": p.benign_prob,
        "model_id": p.model_id,
    }


def write_predictions(preds, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in preds:
            fh.write(json.dumps(prediction_to_obj(p), separators=(",", ":")) + "\n")


def read_predictions(path):
    out = []
    for lineno, obj in _iter_jsonl(path):
        try:
            out.append(BreastPrediction(
                exam_id=str(obj["exam_id"]),
                side=Laterality(obj["side"]),
                malignant_prob=check_probability(obj["malignant_prob"], "malignant_prob"),
                benign_prob=check_probability(obj.get("benign_prob", 0.0), "benign_prob"),
                model_id=str(obj.get("model_id", "")),
            ))
        except KeyError as exc:
            raise RecordFormatError(path, lineno, f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise RecordFormatError(path, lineno, str(exc)) from None
    return out
