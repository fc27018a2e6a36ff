"""Proposal target assignment against lesion annotations.

Proposals are matched to their highest-IoU annotation. At or above the
foreground threshold they take the annotation's class, below the
background threshold they are background, and in between they are
ignored. Images with no annotations yield background everywhere.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._random import as_rng
from ._validation import check_in_range, check_positive
from .corpus import LesionAnnotation, LesionClass
from .geometry import ImageSize, boxes_to_array, clip_to_image, iou_matrix, rescale_isotropic


class Target(str, Enum):
    BACKGROUND = "background"
    BENIGN = "benign"
    MALIGNANT = "malignant"
    IGNORE = "ignore"


@dataclass(frozen=True)
class MatchConfig:
    fg_iou_threshold: float = 0.5
    bg_iou_threshold: float = 0.3

    def __post_init__(self):
        fg = check_in_range(self.fg_iou_threshold, "fg_iou_threshold", 0.0, 1.0, low_inclusive=False)
        bg = check_in_range(self.bg_iou_threshold, "bg_iou_threshold", 0.0, fg)
        object.__setattr__(self, "fg_iou_threshold", fg)
        object.__setattr__(self, "bg_iou_threshold", bg)


@dataclass(frozen=True)
class ProposalTarget:
    proposal_index: int
    target: Target
    annotation_index: int | None
    iou: float


def best_matches(proposals, annotations):
    """Best IoU and matching annotation index per proposal.

    ``argmax`` returns the first maximum, so ties go to the lowest index.
    Returns ``(ious, indices)``; with no annotations, ious are 0 and indices -1.
    """
    n = len(proposals)
    if n == 0 or len(annotations) == 0:
        return np.zeros(n), np.full(n, -1, dtype=np.int64)
    m = iou_matrix(boxes_to_array(proposals), boxes_to_array([a.box for a in annotations]))
    idx = m.argmax(axis=1)
    return m[np.arange(n), idx], idx


def match_proposals(proposals, annotations, config=None):
    config = config or MatchConfig()
    ious, idx = best_matches(proposals, annotations)
    out = []
    for i, (best, j) in enumerate(zip(ious.tolist(), idx.tolist())):
        if j < 0:
            out.append(ProposalTarget(i, Target.BACKGROUND, None, 0.0))
        elif best >= config.fg_iou_threshold:
            out.append(ProposalTarget(i, Target(annotations[j].lesion_class.value), j, best))
        elif best < config.bg_iou_threshold:
            out.append(ProposalTarget(i, Target.BACKGROUND, j, best))
        else:
            out.append(ProposalTarget(i, Target.IGNORE, j, best))
    return out


def foreground_count(proposals, annotations, threshold):
    """Number of proposals whose best IoU reaches ``threshold``."""
    if not annotations:
        return 0
    ious, _ = best_matches(proposals, annotations)
    return int(np.count_nonzero(ious >= threshold))


def augment_annotations(annotations, factor_range=(0.8, 1.2), rng=None, image_size=None):
    """Rescale each annotation box about its center by an independent
    ``Uniform(lo, hi)`` factor, then clip it to its image.

    Parameters
    ----------
    annotations : sequence of LesionAnnotation
    factor_range : (float, float)
    rng : numpy.random.Generator or int seed
    image_size : ImageSize or mapping of image_id to ImageSize
    """
    lo, hi = factor_range
    lo = check_positive(lo, "factor_range[0]")
    hi = check_positive(hi, "factor_range[1]")
    if lo > hi:
        raise ValueError(f"factor_range must satisfy lo <= hi, got {factor_range}")
    if image_size is None:
        raise ValueError("image_size is required for clipping")
    rng = as_rng(rng)
    factors = rng.uniform(lo, hi, size=len(annotations)) if lo < hi else np.full(len(annotations), lo)
    out = []
    for ann, f in zip(annotations, factors.tolist()):
        size = image_size if isinstance(image_size, ImageSize) else image_size[ann.image_id]
        box = clip_to_image(rescale_isotropic(ann.box, f), size)
        out.append(LesionAnnotation(ann.image_id, box, LesionClass(ann.lesion_class)))
    return out
