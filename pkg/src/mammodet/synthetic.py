"""Seeded synthetic corpora and a simulated detector with known AUC.

Each candidate box gets a malignant score ``logistic(z)`` with
``z ~ Normal(mu_pos, sigma**2)`` on malignant breasts and
``Normal(mu_neg, sigma**2)`` elsewhere (benign scores likewise, keyed on
the benign label). With ``shared_view_latent`` one ``z`` per breast is
reused for every box of both views, so any max/mean aggregation returns
``logistic(z)`` and the breast-level AUC is the binormal value
``Phi((mu_pos - mu_neg) / (sigma * sqrt(2)))``.
"""

import math
from dataclasses import dataclass

from ._random import as_rng
from ._validation import check_finite, check_in_range, check_positive, check_positive_int
from .corpus import (
    ALL_VIEWS,
    BreastLabel,
    Corpus,
    ExamRecord,
    ImageRecord,
    Laterality,
    LesionAnnotation,
    LesionClass,
)
from .geometry import BoundingBox, ImageSize
from .inference import Detection

# random stream ids under one seed
CORPUS_STREAM = 0
DETECTION_STREAM = 1


@dataclass(frozen=True)
class SynthConfig:
    n_exams: int = 100
    malignant_prevalence: float = 0.05
    benign_prevalence: float = 0.1
    both_prevalence: float = 0.0
    boxes_per_view: float = 1.0
    min_boxes_per_view: int = 0
    mu_pos: float = 2.0
    mu_neg: float = 0.0
    sigma: float = 1.0
    shared_view_latent: bool = False
    min_image_side: int = 2000
    max_image_side: int = 5000
    new_patient_rate: float = 0.6
    seed: int = 0
    model_id: str = "synthetic"

    def __post_init__(self):
        check_positive_int(self.n_exams, "n_exams", minimum=0)
        pm = check_in_range(self.malignant_prevalence, "malignant_prevalence", 0.0, 1.0, low_inclusive=False)
        pb = check_in_range(self.benign_prevalence, "benign_prevalence", 0.0, 1.0, high_inclusive=False)
        both = check_in_range(self.both_prevalence, "both_prevalence", 0.0, min(pm, pb))
        if pm + pb - both > 1.0 + 1e-12:
            raise ValueError("malignant + benign - both prevalence must not exceed 1")
        check_in_range(self.boxes_per_view, "boxes_per_view", 0.0, math.inf)
        check_positive_int(self.min_boxes_per_view, "min_boxes_per_view", minimum=0)
        check_finite(self.mu_pos, "mu_pos")
        check_finite(self.mu_neg, "mu_neg")
        check_positive(self.sigma, "sigma")
        check_positive_int(self.min_image_side, "min_image_side")
        check_positive_int(self.max_image_side, "max_image_side", minimum=self.min_image_side)
        check_in_range(self.new_patient_rate, "new_patient_rate", 0.0, 1.0, low_inclusive=False)

    @property
    def analytic_auc(self):
        """Binormal breast-level AUC; exact for ``shared_view_latent`` runs."""
        return normal_cdf((self.mu_pos - self.mu_neg) / (self.sigma * math.sqrt(2.0)))


def normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def logistic(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _draw_label(rng, config):
    u = rng.random()
    both = config.both_prevalence
    mal_only = config.malignant_prevalence - both
    ben_only = config.benign_prevalence - both
    if u < both:
        return BreastLabel(True, True)
    if u < both + mal_only:
        return BreastLabel(True, False)
    if u < both + mal_only + ben_only:
        return BreastLabel(False, True)
    return BreastLabel()


def _random_box(rng, size, lo=0.02, hi=0.1):
    w = rng.uniform(lo, hi) * size.width
    h = rng.uniform(lo, hi) * size.height
    x = rng.uniform(0.0, size.width - w)
    y = rng.uniform(0.0, size.height - h)
    # clamp guards against rounding at the far edge
    return BoundingBox(x, y, min(x + w, size.width), min(y + h, size.height))


def generate_corpus(config, rng=None):
    """Synthetic corpus of ``config.n_exams`` four-view exams.

    One lesion per finding class is planted on both views of each
    labeled breast.
    """
    rng = as_rng(rng, config.seed, CORPUS_STREAM)
    exams, annotations = [], []
    n_patients = 0
    for i in range(config.n_exams):
        exam_id = f"E{i:06d}"
        if n_patients == 0 or rng.random() < config.new_patient_rate:
            patient = n_patients
            n_patients += 1
        else:
            patient = int(rng.integers(0, n_patients))
        labels = {Laterality.LEFT: _draw_label(rng, config), Laterality.RIGHT: _draw_label(rng, config)}
        images = []
        for view in ALL_VIEWS:
            size = ImageSize(
                int(rng.integers(config.min_image_side, config.max_image_side + 1)),
                int(rng.integers(config.min_image_side, config.max_image_side + 1)),
            )
            img = ImageRecord(f"{exam_id}-{view}", exam_id, view, size)
            images.append(img)
            label = labels[view.laterality]
            for cls in (LesionClass.MALIGNANT, LesionClass.BENIGN):
                if label.has(cls):
                    annotations.append(LesionAnnotation(img.image_id, _random_box(rng, size), cls))
        biopsied = any(lab != BreastLabel() for lab in labels.values())
        exams.append(ExamRecord(
            exam_id=exam_id,
            patient_id=f"P{patient:06d}",
            images=tuple(images),
            biopsied=biopsied,
            left_label=labels[Laterality.LEFT],
            right_label=labels[Laterality.RIGHT],
        ))
    return Corpus(exams, annotations)


def simulate_detections(corpus, config, rng=None, return_latents=False):
    """Simulated detector output for every image of ``corpus``.

    Each view gets ``min_boxes_per_view + Poisson(boxes_per_view)`` boxes
    placed uniformly in the image; every box yields one malignant and one
    benign detection.

    Returns
    -------
    list of Detection
        Or ``(detections, latents)`` when ``return_latents`` is set, where
        ``latents`` maps ``(exam_id, side)`` to the shared ``(z_malignant,
        z_benign)`` pair (empty unless ``shared_view_latent``).
    """
    rng = as_rng(rng, config.seed, DETECTION_STREAM)
    mu = {True: config.mu_pos, False: config.mu_neg}
    sigma = config.sigma
    dets, latents = [], {}
    for exam in corpus.exams:
        for side in Laterality:
            images = exam.images_for_side(side)
            if not images:
                continue
            label = exam.label(side)
            shared = None
            if config.shared_view_latent:
                shared = (rng.normal(mu[label.has_malignant], sigma),
                          rng.normal(mu[label.has_benign], sigma))
                latents[(exam.exam_id, side)] = shared
            for img in images:
                k = config.min_boxes_per_view + int(rng.poisson(config.boxes_per_view))
                for _ in range(k):
                    box = _random_box(rng, img.size)
                    if shared is None:
                        z_m = rng.normal(mu[label.has_malignant], sigma)
                        z_b = rng.normal(mu[label.has_benign], sigma)
                    else:
                        z_m, z_b = shared
                    dets.append(Detection(img.image_id, box, LesionClass.MALIGNANT,
                                          logistic(float(z_m)), config.model_id))
                    dets.append(Detection(img.image_id, box, LesionClass.BENIGN,
                                          logistic(float(z_b)), config.model_id))
    if return_latents:
        return dets, latents
    return dets
