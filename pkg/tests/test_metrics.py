import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import box_iou
from spikeloc.metrics import EvalReport, REFERENCE_RATE_GAUSSIAN_MRAD, iou, mean_iou, mrad, rad


def test_iou_examples():
    assert iou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1 / 7, abs=1e-12)
    assert iou((0.1, 0.1, 0.4, 0.5), (0.1, 0.1, 0.4, 0.5)) == 1.0
    assert iou((0, 0, 1, 1), (2, 2, 3, 3)) == 0.0
    assert iou((0.2, 0.2, 0.2, 0.2), (0.2, 0.2, 0.2, 0.2)) == 0.0
    assert iou((0.5, 0.5, 0.1, 0.1), (0, 0, 1, 1)) == 0.0  # inverted prediction scores 0


def test_mean_iou():
    t = np.array([[0, 0, 1, 1]] * 3, dtype=float)
    p = np.array([[0, 0, 1, 1], [0, 0, 1, 0.5], [2, 2, 3, 3]], dtype=float)
    assert mean_iou(p, t) == pytest.approx(50.0)
    assert mean_iou(t, t) == 100.0
    perm = [2, 0, 1]
    assert mean_iou(p[perm], t[perm]) == mean_iou(p, t)
    with pytest.raises(ValueError):
        mean_iou(p[:2], t)
    with pytest.raises(ValueError):
        mean_iou(np.zeros((0, 4)), np.zeros((0, 4)))


def test_rad_and_mrad():
    assert abs(rad(80, 76) - 5.0) < 1e-12
    assert rad(50, 50) == 0.0
    assert rad(50, 0) == 100.0
    with pytest.raises(ZeroDivisionError):
        rad(0, 10)
    assert abs(mrad([1, 2, 3, 4, 5]) - 3.0) < 1e-12
    assert mrad([0] * 5) == 0.0
    with pytest.raises(ValueError):
        mrad([1, 2, 3])
    assert REFERENCE_RATE_GAUSSIAN_MRAD == 0.87


def random_box(draw):
    a, b = sorted(draw(st.floats(0, 1)) for _ in range(2))
    c, d = sorted(draw(st.floats(0, 1)) for _ in range(2))
    return (a, c, b, d)


def test_iou_fuzz_bounds_symmetry_and_oracle():
    rng = np.random.default_rng(0)
    a = rng.random((100_000, 2, 2))
    b = rng.random((100_000, 2, 2))
    A = np.concatenate([a.min(1), a.max(1)], axis=1)
    B = np.concatenate([b.min(1), b.max(1)], axis=1)
    v = iou(A, B)
    assert v.min() >= 0 and v.max() <= 1
    assert np.array_equal(v, iou(B, A))
    assert np.allclose(iou(A, A), 1.0)
    for i in range(500):
        assert v[i] == pytest.approx(box_iou(A[i], B[i]), abs=1e-12)


def test_report_csv_and_summary():
    rep = EvalReport(80.0, {"gaussian_noise": [79, 78, 76, 70, 60], "jpeg": [80, 80, 79, 79, 78]})
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert len(rows) == 10
    assert [int(r["severity"]) for r in rows[:5]] == [1, 2, 3, 4, 5]
    for r in rows:
        recomputed = (float(r["miou_clean"]) - float(r["miou_corrupted"])) / float(r["miou_clean"]) * 100
        assert abs(recomputed - float(r["rad"])) < 1e-9
    summary = json.loads(rep.summary())
    assert summary["mrad"]["gaussian_noise"] == pytest.approx(np.mean([1.25, 2.5, 5, 12.5, 25]))
    assert rep.rad_matrix()["jpeg"][4] == pytest.approx(2.5)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_iou_property(data):
    a, b = random_box(data.draw), random_box(data.draw)
    v = iou(a, b)
    assert 0 <= v <= 1 and v == iou(b, a)
