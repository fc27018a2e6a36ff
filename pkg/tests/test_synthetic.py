import math
from collections import Counter

import numpy as np
import pytest

from mammodet.corpus import BreastLabel, Laterality, LesionClass, dump_lines, summarize
from mammodet.evaluation import auc, labeled_scores
from mammodet.geometry import clip_to_image
from mammodet.inference import Aggregation, InferenceConfig, predict_breasts, write_detections
from mammodet.synthetic import (
    SynthConfig,
    generate_corpus,
    logistic,
    normal_cdf,
    simulate_detections,
)


def test_empty_corpus():
    assert len(generate_corpus(SynthConfig(n_exams=0))) == 0


def test_full_malignant_prevalence():
    c = generate_corpus(SynthConfig(n_exams=50, malignant_prevalence=1.0, benign_prevalence=0.0))
    assert all(e.left_label.has_malignant and e.right_label.has_malignant for e in c.exams)
    assert all(e.biopsied for e in c.exams)


def test_malignant_count_within_binomial_bound():
    c = generate_corpus(SynthConfig(n_exams=1000, malignant_prevalence=0.01, benign_prevalence=0.05, seed=3))
    n, p = 2000, 0.01
    k = summarize(c).n_malignant_breasts
    assert abs(k - n * p) <= 3 * math.sqrt(n * p * (1 - p))


def test_corpus_structure():
    c = generate_corpus(SynthConfig(n_exams=300, malignant_prevalence=0.2, benign_prevalence=0.3,
                                    both_prevalence=0.1, seed=9))
    s = summarize(c)
    assert s.n_images == 1200 and 0 < s.n_patients < 300 and s.n_both_breasts > 0
    per_image = Counter(a.image_id for a in c.annotations)
    for e in c.exams:
        assert len(e.images) == 4
        assert e.biopsied == (e.left_label != BreastLabel() or e.right_label != BreastLabel())
        for img in e.images:
            assert 2000 <= img.size.width <= 5000 and 2000 <= img.size.height <= 5000
            lab = e.label(img.view.laterality)
            assert per_image[img.image_id] == lab.has_malignant + lab.has_benign
    for a in c.annotations:
        assert clip_to_image(a.box, c.images[a.image_id].size) == a.box


def test_one_guaranteed_box_per_view():
    cfg = SynthConfig(n_exams=30, boxes_per_view=0, min_boxes_per_view=1, shared_view_latent=True)
    c = generate_corpus(cfg)
    dets = simulate_detections(c, cfg)
    counts = Counter((d.image_id, d.lesion_class) for d in dets)
    assert set(counts.values()) == {1}
    assert len(counts) == 2 * len(c.images)


def test_poisson_box_counts():
    cfg = SynthConfig(n_exams=500, boxes_per_view=2.5, seed=1)
    c = generate_corpus(cfg)
    dets = simulate_detections(c, cfg)
    n_boxes = sum(d.lesion_class is LesionClass.MALIGNANT for d in dets)
    mean = n_boxes / len(c.images)
    assert abs(mean - 2.5) < 5 * math.sqrt(2.5 / len(c.images))
    for d in dets:
        assert clip_to_image(d.box, c.images[d.image_id].size) == d.box


def test_shared_latent_makes_breast_score_exact():
    cfg = SynthConfig(n_exams=200, malignant_prevalence=0.3, benign_prevalence=0.2,
                      boxes_per_view=0, min_boxes_per_view=1, shared_view_latent=True, seed=5)
    c = generate_corpus(cfg)
    dets, latents = simulate_detections(c, cfg, return_latents=True)
    for strategy in Aggregation:
        preds = predict_breasts(c, dets, InferenceConfig(aggregation=strategy))
        for p in preds:
            z_m, z_b = latents[p.key]
            assert p.malignant_prob == logistic(z_m)
            assert p.benign_prob == logistic(z_b)


def test_no_signal_gives_chance_auc():
    cfg = SynthConfig(n_exams=10_000, malignant_prevalence=0.3, benign_prevalence=0.2,
                      mu_pos=0.5, mu_neg=0.5, boxes_per_view=0, min_boxes_per_view=1,
                      shared_view_latent=True, seed=8)
    c = generate_corpus(cfg)
    preds = predict_breasts(c, simulate_detections(c, cfg))
    assert abs(auc(labeled_scores(c, preds)) - 0.5) < 0.02


def test_binormal_identity_by_pair_sampling():
    # independent of the pipeline: draw positive/negative latent pairs directly
    rng = np.random.default_rng(2024)
    n = 1_000_000
    pos = rng.normal(2.0, 1.0, n)
    neg = rng.normal(0.0, 1.0, n)
    mc = np.mean(pos > neg)
    expected = SynthConfig(mu_pos=2.0, mu_neg=0.0, sigma=1.0).analytic_auc
    assert expected == pytest.approx(0.9213503964748575, abs=1e-12)
    assert abs(mc - expected) < 5 * math.sqrt(expected * (1 - expected) / n)


def test_normal_cdf_and_logistic():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(math.sqrt(2)) == pytest.approx(0.92135, abs=1e-5)
    assert logistic(0.0) == 0.5
    assert logistic(-800.0) == 0.0 and logistic(800.0) == 1.0
    assert logistic(-3.0) == pytest.approx(1 - logistic(3.0), abs=1e-15)


def test_determinism(tmp_path):
    cfg = SynthConfig(n_exams=50, boxes_per_view=2.0, seed=77)
    a, b = generate_corpus(cfg), generate_corpus(cfg)
    assert list(dump_lines(a)) == list(dump_lines(b))
    write_detections(simulate_detections(a, cfg), tmp_path / "1.jsonl")
    write_detections(simulate_detections(b, cfg), tmp_path / "2.jsonl")
    assert (tmp_path / "1.jsonl").read_bytes() == (tmp_path / "2.jsonl").read_bytes()
    other = generate_corpus(SynthConfig(n_exams=50, boxes_per_view=2.0, seed=78))
    assert list(dump_lines(other)) != list(dump_lines(a))


@pytest.mark.parametrize("kwargs", [
    {"n_exams": -1},
    {"malignant_prevalence": 0.0},
    {"malignant_prevalence": 1.5},
    {"benign_prevalence": 1.0},
    {"malignant_prevalence": 0.7, "benign_prevalence": 0.5},
    {"both_prevalence": 0.2, "malignant_prevalence": 0.1},
    {"sigma": 0.0},
    {"boxes_per_view": -1},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)


def test_every_imaged_breast_gets_a_latent():
    cfg = SynthConfig(n_exams=5, shared_view_latent=True)
    c = generate_corpus(cfg)
    _, latents = simulate_detections(c, cfg, return_latents=True)
    assert set(latents) == {(e.exam_id, s) for e in c.exams for s in Laterality}
