"""Exam / image / annotation data model and the ``corpus.jsonl`` format.

Each line of a corpus file is one JSON object with a ``kind`` of either
``"exam"`` or ``"annotation"``::

    {"kind": "exam", "exam_id": "e1", "patient_id": "p1", "biopsied": true,
     "labels": {"left": {"malignant": true, "benign": false},
                "right": {"malignant": false, "benign": false}},
     "images": [{"image_id": "e1-L-CC", "view": "L-CC", "width": 3000, "height": 4000}]}
    {"kind": "annotation", "image_id": "e1-L-CC", "class": "malignant",
     "box": [10.0, 20.0, 110.0, 140.0]}

Breast counts in :class:`CorpusSummary` are per breast per exam.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .geometry import BoundingBox, ImageSize, contains

logger = logging.getLogger(__name__)


class Laterality(str, Enum):
    LEFT = "L"
    RIGHT = "R"


class Projection(str, Enum):
    CC = "CC"
    MLO = "MLO"


class LesionClass(str, Enum):
    BENIGN = "benign"
    MALIGNANT = "malignant"


@dataclass(frozen=True)
class ViewId:
    laterality: Laterality
    projection: Projection

    def __str__(self):
        return f"{self.laterality.value}-{self.projection.value}"

    @classmethod
    def parse(cls, text):
        try:
            side, proj = text.split("-")
            return cls(Laterality(side), Projection(proj))
        except ValueError:
            raise ValueError(f"unknown view {text!r}; expected one of {[str(v) for v in ALL_VIEWS]}") from None


ALL_VIEWS = tuple(ViewId(s, p) for s in Laterality for p in Projection)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    exam_id: str
    view: ViewId
    size: ImageSize


@dataclass(frozen=True)
class LesionAnnotation:
    image_id: str
    box: BoundingBox
    lesion_class: LesionClass


@dataclass(frozen=True)
class BreastLabel:
    has_malignant: bool = False
    has_benign: bool = False

    def has(self, lesion_class):
        if lesion_class is LesionClass.MALIGNANT:
            return self.has_malignant
        return self.has_benign


@dataclass(frozen=True)
class ExamRecord:
    exam_id: str
    patient_id: str
    images: tuple
    biopsied: bool
    left_label: BreastLabel = BreastLabel()
    right_label: BreastLabel = BreastLabel()

    def label(self, side):
        return self.left_label if Laterality(side) is Laterality.LEFT else self.right_label

    def image_for(self, view):
        for img in self.images:
            if img.view == view:
                return img
        return None

    def images_for_side(self, side):
        side = Laterality(side)
        return [img for img in self.images if img.view.laterality is side]


@dataclass(frozen=True)
class Corpus:
    exams: tuple = ()
    annotations: tuple = ()
    _images: dict = field(default=None, init=False, repr=False, compare=False)
    _exams: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "exams", tuple(self.exams))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        object.__setattr__(
            self, "_images", {img.image_id: img for e in self.exams for img in e.images}
        )
        object.__setattr__(self, "_exams", {e.exam_id: e for e in self.exams})

    @property
    def images(self):
        """Mapping of image id to :class:`ImageRecord`."""
        return self._images

    def exam(self, exam_id):
        return self._exams[exam_id]

    def __len__(self):
        return len(self.exams)


@dataclass(frozen=True)
class CorpusSummary:
    n_exams: int = 0
    n_images: int = 0
    n_patients: int = 0
    n_biopsy_exams: int = 0
    n_malignant_breasts: int = 0
    n_benign_breasts: int = 0
    n_both_breasts: int = 0


class CorpusError(ValueError):
    """Base class for corpus parsing and integrity failures."""


class CorpusFormatError(CorpusError):
    def __init__(self, line, message, path=None):
        self.line = line
        self.path = path
        self.message = message
        where = f"{path}:{line}" if path is not None else f"line {line}"
        super().__init__(f"{where}: {message}")


class CorpusIntegrityError(CorpusError):
    def __init__(self, message, ids):
        self.ids = list(ids)
        super().__init__(f"{message}: {', '.join(map(str, self.ids))}")


def breast_ground_truth(exam, side):
    """1 if the breast on ``side`` has a malignant finding, else 0.

    Benign-only breasts count as negatives.
    """
    return int(exam.label(side).has_malignant)


def breast_keys(corpus):
    """``(exam_id, side)`` for every breast with at least one image, in corpus order."""
    keys = []
    for e in corpus.exams:
        for side in Laterality:
            if e.images_for_side(side):
                keys.append((e.exam_id, side))
    return keys


def summarize(corpus):
    n_mal = n_ben = n_both = 0
    for e in corpus.exams:
        for lab in (e.left_label, e.right_label):
            n_mal += lab.has_malignant
            n_ben += lab.has_benign
            n_both += lab.has_malignant and lab.has_benign
    return CorpusSummary(
        n_exams=len(corpus.exams),
        n_images=sum(len(e.images) for e in corpus.exams),
        n_patients=len({e.patient_id for e in corpus.exams}),
        n_biopsy_exams=sum(e.biopsied for e in corpus.exams),
        n_malignant_breasts=n_mal,
        n_benign_breasts=n_ben,
        n_both_breasts=n_both,
    )


def validate(corpus):
    """Check referential integrity and the exam/label invariants.

    Raises :class:`CorpusIntegrityError` naming the offending ids.
    """
    seen_exams, dup_exams = set(), []
    seen_images, dup_images = set(), []
    bad_labels, dup_views = [], []
    for e in corpus.exams:
        if e.exam_id in seen_exams:
            dup_exams.append(e.exam_id)
        seen_exams.add(e.exam_id)
        views = [img.view for img in e.images]
        if len(set(views)) != len(views):
            dup_views.append(e.exam_id)
        for img in e.images:
            if img.image_id in seen_images:
                dup_images.append(img.image_id)
            seen_images.add(img.image_id)
            if img.exam_id != e.exam_id:
                raise CorpusIntegrityError("image attached to the wrong exam", [img.image_id])
        if not e.biopsied and (e.left_label != BreastLabel() or e.right_label != BreastLabel()):
            bad_labels.append(e.exam_id)
    if dup_exams:
        raise CorpusIntegrityError("duplicate exam_id", dup_exams)
    if dup_images:
        raise CorpusIntegrityError("duplicate image_id", dup_images)
    if dup_views:
        raise CorpusIntegrityError("more than one image per view in exams", dup_views)
    if bad_labels:
        raise CorpusIntegrityError("non-biopsied exams carry findings", bad_labels)

    exams = {e.exam_id: e for e in corpus.exams}
    unknown, outside, unlabeled = [], [], []
    for ann in corpus.annotations:
        img = corpus.images.get(ann.image_id)
        if img is None:
            unknown.append(ann.image_id)
            continue
        if not contains(img.size, ann.box):
            outside.append(ann.image_id)
        if not exams[img.exam_id].label(img.view.laterality).has(ann.lesion_class):
            unlabeled.append(ann.image_id)
    if unknown:
        raise CorpusIntegrityError("annotations reference unknown image_id", unknown)
    if outside:
        raise CorpusIntegrityError("annotation boxes outside image bounds", outside)
    if unlabeled:
        raise CorpusIntegrityError("annotation class missing from its breast label", unlabeled)
    return corpus


_EXAM_FIELDS = {"kind", "exam_id", "patient_id", "biopsied", "labels", "images"}
_IMAGE_FIELDS = {"image_id", "view", "width", "height"}
_ANNOTATION_FIELDS = {"kind", "image_id", "class", "box"}
_LABEL_SIDES = {"left", "right"}
_LABEL_FIELDS = {"malignant", "benign"}


def _check_fields(obj, allowed, what, strict, line):
    extra = set(obj) - allowed
    if not extra:
        return
    if strict:
        raise CorpusFormatError(line, f"unknown {what} fields {sorted(extra)}")
    logger.warning("line %d: ignoring unknown %s fields %s", line, what, sorted(extra))


def _require(obj, key, typ, line):
    if key not in obj:
        raise CorpusFormatError(line, f"missing field {key!r}")
    value = obj[key]
    if typ is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif typ is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, typ)
    if not ok:
        raise CorpusFormatError(line, f"field {key!r} must be {typ.__name__}, got {value!r}")
    return value


def _parse_label(obj, line, strict):
    if not isinstance(obj, dict):
        raise CorpusFormatError(line, f"breast label must be an object, got {obj!r}")
    _check_fields(obj, _LABEL_FIELDS, "label", strict, line)
    return BreastLabel(
        has_malignant=_require(obj, "malignant", bool, line),
        has_benign=_require(obj, "benign", bool, line),
    )


def _parse_exam(obj, line, strict):
    _check_fields(obj, _EXAM_FIELDS, "exam", strict, line)
    exam_id = _require(obj, "exam_id", str, line)
    labels = _require(obj, "labels", dict, line)
    _check_fields(labels, _LABEL_SIDES, "labels", strict, line)
    images = []
    for raw in _require(obj, "images", list, line):
        if not isinstance(raw, dict):
            raise CorpusFormatError(line, f"image entry must be an object, got {raw!r}")
        _check_fields(raw, _IMAGE_FIELDS, "image", strict, line)
        try:
            view = ViewId.parse(_require(raw, "view", str, line))
            size = ImageSize(_require(raw, "width", int, line), _require(raw, "height", int, line))
        except CorpusFormatError:
            raise
        except ValueError as exc:
            raise CorpusFormatError(line, str(exc)) from None
        images.append(ImageRecord(_require(raw, "image_id", str, line), exam_id, view, size))
    return ExamRecord(
        exam_id=exam_id,
        patient_id=_require(obj, "patient_id", str, line),
        images=tuple(images),
        biopsied=_require(obj, "biopsied", bool, line),
        left_label=_parse_label(labels.get("left", {"malignant": False, "benign": False}), line, strict),
        right_label=_parse_label(labels.get("right", {"malignant": False, "benign": False}), line, strict),
    )


def _parse_annotation(obj, line, strict):
    _check_fields(obj, _ANNOTATION_FIELDS, "annotation", strict, line)
    box = _require(obj, "box", list, line)
    try:
        cls = LesionClass(_require(obj, "class", str, line))
        box = BoundingBox.from_sequence(box)
    except CorpusFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise CorpusFormatError(line, str(exc)) from None
    return LesionAnnotation(_require(obj, "image_id", str, line), box, cls)


def parse_records(lines, strict=False, path=None):
    """Parse an iterable of JSONL lines into a validated :class:`Corpus`."""
    exams, annotations = [], []
    for lineno, text in enumerate(lines, 1):
        if not text.strip():
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(lineno, f"invalid JSON ({exc.msg})", path) from None
        if not isinstance(obj, dict):
            raise CorpusFormatError(lineno, "record must be a JSON object", path)
        kind = obj.get("kind")
        try:
            if kind == "exam":
                exams.append(_parse_exam(obj, lineno, strict))
            elif kind == "annotation":
                annotations.append(_parse_annotation(obj, lineno, strict))
            else:
                raise CorpusFormatError(lineno, f"unknown record kind {kind!r}")
        except CorpusFormatError as exc:
            if path is not None and exc.path is None:
                raise CorpusFormatError(exc.line, exc.message, path) from None
            raise
    return validate(Corpus(exams, annotations))


def load_corpus(path, strict=False):
    """Read and validate a ``corpus.jsonl`` file.

    With ``strict=True`` unknown fields are an error; otherwise they are
    dropped with a logged warning.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        return parse_records(fh, strict=strict, path=path)


def _label_obj(label):
    return {"malignant": label.has_malignant, "benign": label.has_benign}


def exam_to_obj(e):
    return {
        "kind": "exam",
        "exam_id": e.exam_id,
        "patient_id": e.patient_id,
        "biopsied": e.biopsied,
        "labels": {"left": _label_obj(e.left_label), "right": _label_obj(e.right_label)},
        "images": [
            {"image_id": img.image_id, "view": str(img.view),
             "width": img.size.width, "height": img.size.height}
            for img in e.images
        ],
    }


def annotation_to_obj(a):
    return {
        "kind": "annotation",
        "image_id": a.image_id,
        "class": a.lesion_class.value,
        "box": list(a.box.as_tuple()),
    }


def dump_lines(corpus):
    """Serialize ``corpus`` to JSONL lines (exams first, then annotations)."""
    for e in corpus.exams:
        yield json.dumps(exam_to_obj(e), separators=(",", ":")) + "\n"
    for a in corpus.annotations:
        yield json.dumps(annotation_to_obj(a), separators=(",", ":")) + "\n"


def save_corpus(corpus, path):
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            fh.writelines(dump_lines(corpus))
    except OSError as exc:
        raise OSError(f"cannot write corpus to {path}: {exc.strerror or exc}") from exc
