"""Detection post-processing, breast-level aggregation and AUC evaluation
for multi-view screening mammography."""

from .assignment import MatchConfig, ProposalTarget, Target, augment_annotations, foreground_count, match_proposals
from .corpus import (
    BreastLabel,
    Corpus,
    CorpusError,
    CorpusSummary,
    ExamRecord,
    ImageRecord,
    Laterality,
    LesionAnnotation,
    LesionClass,
    Projection,
    ViewId,
    breast_ground_truth,
    load_corpus,
    save_corpus,
    summarize,
)
from .evaluation import (
    LabeledScore,
    RocCurve,
    RunStatistics,
    auc,
    ensemble,
    relative_error_reduction,
    roc_curve,
    run_statistics,
    trapezoid_area,
)
from .geometry import (
    BoundingBox,
    ImageSize,
    ResizeSpec,
    area,
    bbox_from_mask,
    clip_to_image,
    iou,
    rescale_isotropic,
    resize_transform,
    transform_box,
)
from .inference import (
    Aggregation,
    BreastPrediction,
    BreastScorer,
    Detection,
    InferenceConfig,
    breast_probability,
    filter_by_score,
    nms,
    predict_breasts,
    view_score,
)
from .sampling import BiopsyRatioSampler, SamplerConfig, sample_batch, stratify
from .synthetic import SynthConfig, generate_corpus, simulate_detections

__version__ = "0.1.0"
