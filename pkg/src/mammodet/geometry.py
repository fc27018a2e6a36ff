"""Axis-aligned box geometry in image pixel coordinates.

Boxes are half-open: a box ``(x_min, y_min, x_max, y_max)`` covers
``[x_min, x_max) x [y_min, y_max)``, so a single pixel at column ``c``
and row ``r`` is the box ``(c, r, c + 1, r + 1)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_finite, check_positive, check_positive_int


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, check_finite(getattr(self, name), name))
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box must have positive area, got {self.as_tuple()}")

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    @property
    def center(self):
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def as_tuple(self):
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @classmethod
    def from_sequence(cls, seq):
        if len(seq) != 4:
            raise ValueError(f"box needs 4 coordinates, got {len(seq)}")
        return cls(*seq)


@dataclass(frozen=True)
class ImageSize:
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "width", check_positive_int(self.width, "width"))
        object.__setattr__(self, "height", check_positive_int(self.height, "height"))


@dataclass(frozen=True)
class ResizeSpec:
    max_width: int
    max_height: int

    def __post_init__(self):
        object.__setattr__(self, "max_width", check_positive_int(self.max_width, "max_width"))
        object.__setattr__(self, "max_height", check_positive_int(self.max_height, "max_height"))


# Maximum input resolutions per backbone.
RESIZE_PRESETS = {
    "R-50": ResizeSpec(2200, 3000),
    "R-101": ResizeSpec(1700, 2700),
    "X-101": ResizeSpec(1300, 2100),
}


def area(b):
    return (b.x_max - b.x_min) * (b.y_max - b.y_min)


def intersection(a, b):
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def iou(a, b):
    """Intersection over union of two boxes, in ``[0, 1]``.

    Symmetric in its arguments; exactly 1 for identical boxes and exactly
    0 for boxes that do not overlap (touching edges included).
    """
    inter = intersection(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (area(a) + area(b) - inter)


def boxes_to_array(boxes):
    """Stack boxes into an ``(n, 4)`` float64 array."""
    if len(boxes) == 0:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


def iou_matrix(a, b):
    """Pairwise IoU between two ``(n, 4)`` / ``(m, 4)`` box arrays.

    Uses the same operation order as :func:`iou` so results agree bit for bit.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    w = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    h = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    overlap = (w > 0) & (h > 0)
    inter = np.where(overlap, w * h, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(overlap, inter / union, 0.0)
    return out


def rescale_isotropic(b, factor):
    """Scale width and height of ``b`` by ``factor`` about its center.

    The result is not clipped; use :func:`clip_to_image` for that.
    """
    factor = check_positive(factor, "factor")
    if factor == 1.0:
        return b
    cx, cy = b.center
    half_w = (b.x_max - b.x_min) / 2.0 * factor
    half_h = (b.y_max - b.y_min) / 2.0 * factor
    return BoundingBox(cx - half_w, cy - half_h, cx + half_w, cy + half_h)


def clip_to_image(b, size):
    """Clamp ``b`` to ``[0, width] x [0, height]``.

    Raises
    ------
    ValueError
        If the box does not intersect the image, so clipping would leave
        zero area.
    """
    x_min = min(max(b.x_min, 0.0), size.width)
    y_min = min(max(b.y_min, 0.0), size.height)
    x_max = min(max(b.x_max, 0.0), size.width)
    y_max = min(max(b.y_max, 0.0), size.height)
    if not (x_min < x_max and y_min < y_max):
        raise ValueError(
            f"box {b.as_tuple()} lies outside the {size.width}x{size.height} image"
        )
    return BoundingBox(x_min, y_min, x_max, y_max)


def contains(size, b):
    """True when ``b`` lies inside the image rectangle."""
    return b.x_min >= 0 and b.y_min >= 0 and b.x_max <= size.width and b.y_max <= size.height


def bbox_from_mask(mask):
    """Tightest half-open box around the nonzero pixels of a 2-D mask.

    ``mask`` is indexed ``[row, col]``; columns map to x and rows to y.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise ValueError("mask has no positive pixels")
    return BoundingBox(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def resize_transform(size, spec):
    """Aspect-preserving downscale that fits ``size`` within ``spec``.

    Returns
    -------
    scale : float
        ``min(max_width / width, max_height / height, 1)``; never upscales.
    new_size : ImageSize
        Each dimension multiplied by ``scale`` and rounded half up.
    """
    scale = min(spec.max_width / size.width, spec.max_height / size.height, 1.0)
    new_w = min(max(_round_half_up(size.width * scale), 1), spec.max_width)
    new_h = min(max(_round_half_up(size.height * scale), 1), spec.max_height)
    return scale, ImageSize(new_w, new_h)


def transform_box(b, scale):
    scale = check_positive(scale, "scale")
    return BoundingBox(b.x_min * scale, b.y_min * scale, b.x_max * scale, b.y_max * scale)
