import random

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mammodet.corpus import BreastLabel, Corpus, Laterality, LesionClass, ViewId
from mammodet.geometry import BoundingBox, iou
from mammodet.inference import (
    Aggregation,
    BreastScorer,
    Detection,
    InferenceConfig,
    RecordFormatError,
    UnknownImageError,
    breast_probability,
    filter_by_score,
    nms,
    predict_breasts,
    read_detections,
    read_predictions,
    view_score,
    write_detections,
    write_predictions,
)

from conftest import make_exam
from oracles import greedy_nms

M, B = LesionClass.MALIGNANT, LesionClass.BENIGN


def det(score, box=(0, 0, 10, 10), cls=M, image_id="img"):
    return Detection(image_id, BoundingBox(*box), cls, score)


def random_dets(rng, n, image_id="img", extent=100, quantize=False):
    out = []
    for _ in range(n):
        x, y = rng.uniform(0, extent, size=2)
        w, h = rng.uniform(5, 40, size=2)
        s = float(rng.integers(0, 5)) / 4 if quantize else float(rng.random())
        out.append(Detection(image_id, BoundingBox(x, y, x + w, y + h), [M, B][int(rng.integers(2))], s))
    return out


def test_filter_by_score():
    dets = [det(0.0005), det(0.002), det(0.9)]
    assert filter_by_score(dets, 0.0) == dets
    assert [d.score for d in filter_by_score(dets, 0.001)] == [0.002, 0.9]
    assert filter_by_score(dets, 1.0) == []


def test_nms_examples():
    single = [det(0.5)]
    assert nms(single, 0.1) == single
    pair = [det(0.9, (0, 0, 10, 10)), det(0.7, (5, 5, 15, 15))]
    assert [d.score for d in nms(pair, 0.1)] == [0.9]
    assert [d.score for d in nms(pair, 0.2)] == [0.9, 0.7]


def test_nms_is_per_class():
    dets = [det(0.9, cls=M), det(0.8, cls=B)]
    assert nms(dets, 0.1) == dets


def test_nms_ties_follow_input_order():
    a, b = det(0.5, (0, 0, 10, 10)), det(0.5, (1, 1, 11, 11))
    assert nms([a, b], 0.1) == [a]
    assert nms([b, a], 0.1) == [b]


@pytest.mark.parametrize("quantize", [False, True])
def test_nms_matches_greedy_oracle(quantize):
    rng = np.random.default_rng(21)
    for _ in range(200):
        dets = random_dets(rng, int(rng.integers(1, 51)), quantize=quantize)
        thr = float(rng.choice([0.0, 0.1, 0.3, 0.5, 0.7]))
        items = [(d.box.as_tuple(), d.lesion_class.value, d.score) for d in dets]
        assert nms(dets, thr) == [dets[i] for i in greedy_nms(items, thr)]


def test_view_score():
    assert view_score([det(0.2), det(0.9)], M) == 0.9
    assert view_score([], M) == 0.0
    assert view_score([det(0.36, cls=B)], B) == 0.36
    assert view_score([det(0.36, cls=B)], M) == 0.0
    assert view_score([det(0.2), det(0.4)], M, "mean") == pytest.approx(0.3)
    dets = [det(s) for s in (0.1, 0.7, 0.3)]
    for _ in range(5):
        random.shuffle(dets)
        assert view_score(dets, M) == 0.7


def test_breast_probability():
    assert breast_probability(0.9, 0.4) == pytest.approx(0.65)
    assert breast_probability(0.0, 0.0) == 0.0
    assert breast_probability(0.9, 0.4, Aggregation.MAX_BOX_MAX_VIEW) == 0.9
    assert breast_probability(0.7, None) == 0.7
    assert breast_probability(None, None) == 0.0
    rng = np.random.default_rng(1)
    for a, b in rng.random((100, 2)):
        for s in Aggregation:
            assert breast_probability(a, b, s) == breast_probability(b, a, s)
            assert breast_probability(a, a, s) == a
    with pytest.raises(ValueError):
        breast_probability(1.2, 0.3)


def _exam_corpus(views=None):
    kwargs = {} if views is None else {"views": views}
    return Corpus([make_exam("e", True, left=BreastLabel(True, False), size=(1000, 1000), **kwargs)])


def test_predict_breasts_examples():
    c = _exam_corpus()
    dets = [
        Detection("e-L-CC", BoundingBox(0, 0, 10, 10), M, 0.9),
        Detection("e-L-CC", BoundingBox(500, 500, 510, 510), M, 0.3),
        Detection("e-L-MLO", BoundingBox(0, 0, 10, 10), M, 0.4),
    ]
    preds = predict_breasts(c, dets)
    assert [(p.exam_id, p.side) for p in preds] == [("e", Laterality.LEFT), ("e", Laterality.RIGHT)]
    assert preds[0].malignant_prob == pytest.approx(0.65)
    assert preds[0].benign_prob == 0.0
    assert preds[1].malignant_prob == 0.0
    assert dict((v, m) for v, m, _ in preds[0].view_scores) == {"L-CC": 0.9, "L-MLO": 0.4}
    maxview = predict_breasts(c, dets, InferenceConfig(aggregation="max-box-max-view"))
    assert maxview[0].malignant_prob == 0.9
    meanbox = predict_breasts(c, dets, InferenceConfig(aggregation="mean-box-mean-view"))
    assert meanbox[0].malignant_prob == pytest.approx(((0.9 + 0.3) / 2 + 0.4) / 2)


def test_single_view_fallback():
    c = _exam_corpus(views=(ViewId.parse("L-CC"),))
    preds = predict_breasts(c, [Detection("e-L-CC", BoundingBox(0, 0, 5, 5), M, 0.7)])
    assert len(preds) == 1 and preds[0].malignant_prob == 0.7


def test_unknown_image_rejected():
    with pytest.raises(UnknownImageError, match="ghost"):
        predict_breasts(_exam_corpus(), [Detection("ghost", BoundingBox(0, 0, 1, 1), M, 0.5)])


def test_sub_threshold_detections_contribute_nothing():
    c = _exam_corpus()
    dets = [Detection("e-L-CC", BoundingBox(0, 0, 10, 10), M, 0.0005)]
    assert predict_breasts(c, dets)[0].malignant_prob == 0.0
    assert predict_breasts(c, dets, InferenceConfig(0.0))[0].malignant_prob == pytest.approx(0.00025)


def _corpus_with_dets(rng, n_exams=20):
    exams = [make_exam(f"e{i}", size=(1000, 1000)) for i in range(n_exams)]
    c = Corpus(exams)
    dets = []
    for img in c.images:
        # a grid of disjoint boxes so NMS never interacts with score changes
        k = int(rng.integers(0, 4))
        for j in range(k):
            x = 100 * j
            dets.append(Detection(img, BoundingBox(x, 0, x + 50, 50), [M, B][int(rng.integers(2))],
                                  float(rng.random() ** 3)))
    return c, dets


@pytest.mark.parametrize("strategy", ["max-box-mean-view", "max-box-max-view"])
def test_raising_a_score_never_lowers_the_breast(strategy):
    rng = np.random.default_rng(3)
    cfg = InferenceConfig(aggregation=strategy)
    for _ in range(20):
        c, dets = _corpus_with_dets(rng)
        if not dets:
            continue
        base = {p.key: p for p in predict_breasts(c, dets, cfg)}
        i = int(rng.integers(len(dets)))
        d = dets[i]
        bumped = list(dets)
        bumped[i] = Detection(d.image_id, d.box, d.lesion_class, min(1.0, d.score + float(rng.random())))
        after = {p.key: p for p in predict_breasts(c, bumped, cfg)}
        for k in base:
            assert after[k].malignant_prob >= base[k].malignant_prob
            assert after[k].benign_prob >= base[k].benign_prob


@pytest.mark.parametrize("strategy", ["max-box-mean-view", "max-box-max-view"])
def test_lower_threshold_never_lowers_or_drops(strategy):
    rng = np.random.default_rng(4)
    c, dets = _corpus_with_dets(rng, 40)
    hi = predict_breasts(c, dets, InferenceConfig(0.05, aggregation=strategy))
    lo = predict_breasts(c, dets, InferenceConfig(0.001, aggregation=strategy))
    assert [p.key for p in hi] == [p.key for p in lo]
    for a, b in zip(hi, lo):
        assert b.malignant_prob >= a.malignant_prob


def test_kept_set_respects_threshold():
    rng = np.random.default_rng(9)
    for _ in range(100):
        dets = random_dets(rng, 40)
        kept = nms(dets, 0.1)
        for i, a in enumerate(kept):
            for b in kept[i + 1:]:
                if a.lesion_class is b.lesion_class:
                    assert iou(a.box, b.box) <= 0.1


def test_breast_scorer_estimator_api():
    c = _exam_corpus()
    dets = [Detection("e-L-CC", BoundingBox(0, 0, 10, 10), M, 0.9),
            Detection("e-L-MLO", BoundingBox(0, 0, 10, 10), M, 0.4)]
    est = BreastScorer()
    assert est.get_params() == {"score_threshold": 0.001, "nms_iou": 0.1,
                                "aggregation": "max-box-mean-view"}
    with pytest.raises(NotFittedError):
        est.transform(dets)
    out = est.fit(c).transform(dets)
    assert out.shape == (2, 2) and out[0, 0] == pytest.approx(0.65)
    assert est.score(dets) == 1.0
    other = clone(est).set_params(aggregation="max-box-max-view")
    assert other.fit(c).predict_proba(dets)[0] == 0.9
    with pytest.raises(ValueError):
        BreastScorer(nms_iou=2).fit(c)


def test_detection_validation():
    with pytest.raises(ValueError):
        det(1.5)
    with pytest.raises(ValueError):
        InferenceConfig(score_threshold=-0.1)


def test_detections_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    dets = random_dets(rng, 30)
    write_detections(dets, tmp_path / "d.jsonl")
    assert read_detections(tmp_path / "d.jsonl") == dets


def test_predictions_round_trip(tmp_path):
    c = _exam_corpus()
    preds = predict_breasts(c, [Detection("e-L-CC", BoundingBox(0, 0, 10, 10), M, 0.123)], model_id="m")
    write_predictions(preds, tmp_path / "p.jsonl")
    back = read_predictions(tmp_path / "p.jsonl")
    assert back == preds and back[0].model_id == "m"


def test_bad_detection_line(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text('{"image_id":"a","class":"malignant","score":0.5,"box":[0,0,1,1]}\n'
                 '{"image_id":"a","class":"weird","score":0.5,"box":[0,0,1,1]}\n')
    with pytest.raises(RecordFormatError, match=":2:"):
        read_detections(p)
