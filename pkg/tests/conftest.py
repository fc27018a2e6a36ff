import pytest

from mammodet.corpus import (
    ALL_VIEWS,
    BreastLabel,
    Corpus,
    ExamRecord,
    ImageRecord,
    LesionAnnotation,
    LesionClass,
)
from mammodet.geometry import BoundingBox, ImageSize


def make_exam(exam_id, biopsied=False, left=BreastLabel(), right=BreastLabel(),
              views=ALL_VIEWS, patient_id=None, size=(100, 200)):
    images = tuple(
        ImageRecord(f"{exam_id}-{v}", exam_id, v, ImageSize(*size)) for v in views
    )
    return ExamRecord(exam_id, patient_id or f"p-{exam_id}", images, biopsied, left, right)


@pytest.fixture
def two_exam_corpus():
    malignant_left = make_exam("e1", biopsied=True, left=BreastLabel(True, False))
    normal = make_exam("e2")
    ann = LesionAnnotation("e1-L-CC", BoundingBox(10, 20, 40, 60), LesionClass.MALIGNANT)
    return Corpus([malignant_left, normal], [ann])


_acceptance = []


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _acceptance.append((props["criterion"], report.passed, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _acceptance:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{detail}]" if detail else ""))
