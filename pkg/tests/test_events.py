import numpy as np
import pytest
from hypothesis import given, strategies as st

from sassdpr.errors import EmptyGrid, ParameterError, TooShort
from sassdpr.events import (
    EventInterval,
    EventLabel,
    GridTarget,
    LabeledEpoch,
    KCOMPLEX_GRID,
    SPINDLE_GRID,
    confusion_counts,
    detect_events,
    grid_search,
    grid_values,
    labels_from_intervals,
    score_events,
    tkeo,
)


def test_tkeo_examples():
    np.testing.assert_array_equal(tkeo(np.full(5, 3.0)), 0.0)
    np.testing.assert_array_equal(tkeo([1.0, 2.0, 3.0]), [1.0, 1.0, 1.0])
    with pytest.raises(TooShort):
        tkeo([1.0, 2.0])


@pytest.mark.parametrize("A,w", [(1.0, 0.1), (2.5, 0.7), (0.3, 2.0)])
def test_tkeo_of_a_sinusoid_is_constant(A, w):
    n = np.arange(200)
    psi = tkeo(A * np.sin(w * n + 0.3))
    np.testing.assert_allclose(psi, A * A * np.sin(w) ** 2, atol=1e-12)


@given(shift=st.integers(0, 20), seed=st.integers(0, 10 ** 6))
def test_tkeo_commutes_with_shifts(shift, seed):
    x = np.random.default_rng(seed).standard_normal(60)
    a = tkeo(x)[1:-1]
    b = tkeo(np.concatenate([np.zeros(shift), x]))[shift + 1:-1]
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_detect_events_duration_rules():
    fs = 10.0
    e = np.zeros(100)
    e[5:8] = 1.0     # 0.3 s, too short
    e[20:30] = 2.0   # 1.0 s, kept
    e[50:90] = 1.0   # 4.0 s, too long
    ev = detect_events(e, 0.5, fs, 0.5, 3.0)
    assert [(x.start, x.end) for x in ev] == [(20, 30)]
    assert ev[0].peak_energy == 2.0 and ev[0].duration == 10


def test_keep_first_discards_close_followers():
    fs = 10.0
    e = np.zeros(200)
    e[10:20] = 1.0
    e[25:35] = 1.0   # starts 1.5 s after the first: kept only without the rule
    e[60:70] = 1.0
    kw = dict(threshold=0.5, fs=fs, min_dur_s=0.5, max_dur_s=2.0, merge_window_s=2.0)
    assert len(detect_events(e, **kw)) == 3
    kept = detect_events(e, keep_first=True, label="KComplex", **kw)
    assert [(x.start, x.end) for x in kept] == [(10, 20), (60, 70)]
    assert kept[0].label is EventLabel.KCOMPLEX


def test_detect_events_validation():
    with pytest.raises(ParameterError):
        detect_events(np.ones(10), 0.0, 10.0, 0.1, 1.0)
    with pytest.raises(ParameterError):
        detect_events(np.ones(10), 1.0, 0.0, 0.1, 1.0)
    with pytest.raises(ParameterError):
        EventInterval(5, 5)
    assert detect_events(np.zeros(50), 0.1, 10.0, 0.1, 1.0) == []


@given(e=st.lists(st.floats(0, 2), min_size=1, max_size=300),
       thr=st.floats(0.1, 1.9), lo=st.floats(0.0, 3.0), span=st.floats(0.0, 10.0),
       keep=st.booleans())
def test_detected_events_are_sorted_disjoint_and_in_range(e, thr, lo, span, keep):
    fs = 10.0
    e = np.array(e)
    ev = detect_events(e, thr, fs, lo, lo + span, merge_window_s=1.0, keep_first=keep)
    for a, b in zip(ev, ev[1:]):
        assert a.end < b.start
        if keep:
            assert b.start - a.start >= 1.0 * fs
    for x in ev:
        assert lo * fs <= x.duration <= (lo + span) * fs
        assert np.all(e[x.start:x.end] > thr)
        # maximal runs
        assert x.start == 0 or e[x.start - 1] <= thr
        assert x.end == e.size or e[x.end] <= thr


def test_identical_sets_score_perfectly():
    ref = [EventInterval(10, 30), EventInterval(50, 60)]
    rep = score_events(ref, ref, 100)
    assert rep.f1 == 1.0 and rep.kappa == 1.0
    assert rep.events_detected == (2, 2) and rep.false_detections == 0


def test_empty_detection_scores_zero():
    rep = score_events([], [EventInterval(10, 30)], 100)
    assert rep.f1 == 0.0 and rep.recall == 0.0 and rep.kappa == 0.0
    assert rep.events_detected == (0, 1)


def test_kappa_example_against_sklearn():
    metrics = pytest.importorskip("sklearn.metrics")
    # TP=5, FP=5, FN=5, TN=85 on 100 samples
    det = [EventInterval(0, 10)]
    ref = [EventInterval(5, 15)]
    rep = score_events(det, ref, 100)
    assert rep.confusion == (5, 5, 5, 85)
    truth = labels_from_intervals(ref, 100)
    pred = labels_from_intervals(det, 100)
    assert rep.kappa == pytest.approx(metrics.cohen_kappa_score(truth, pred), abs=1e-12)
    assert rep.kappa == pytest.approx(0.4444444, abs=1e-6)
    assert rep.f1 == pytest.approx(metrics.f1_score(truth, pred), abs=1e-12)
    assert rep.f1 == 0.5


@st.composite
def interval_sets(draw, N=120):
    cuts = sorted(draw(st.sets(st.integers(0, N), max_size=8)))
    cuts = cuts[: len(cuts) // 2 * 2]
    return [EventInterval(a, b) for a, b in zip(cuts[::2], cuts[1::2]) if a < b]


@given(a=interval_sets(), b=interval_sets())
def test_swapping_roles_keeps_f1_and_kappa(a, b):
    ab = score_events(a, b, 120)
    ba = score_events(b, a, 120)
    assert ab.f1 == pytest.approx(ba.f1, abs=1e-12)
    assert ab.kappa == pytest.approx(ba.kappa, abs=1e-12)
    assert ab.precision == pytest.approx(ba.recall, abs=1e-12)
    assert -1.0 <= ab.kappa <= 1.0 and 0.0 <= ab.f1 <= 1.0


def test_confusion_counts_sum():
    p = np.array([1, 1, 0, 0], bool)
    r = np.array([1, 0, 1, 0], bool)
    assert confusion_counts(p, r) == (1, 1, 1, 1)
    with pytest.raises(ParameterError):
        labels_from_intervals([EventInterval(0, 11)], 10)


def test_grid_values_are_inclusive():
    np.testing.assert_allclose(grid_values(0.3, 0.8, 0.1), [0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
    assert KCOMPLEX_GRID["lam0"].size == 13 and KCOMPLEX_GRID["lam1"].size == 13
    assert SPINDLE_GRID["lam1"].size == 16 and SPINDLE_GRID["lam2"][-1] == 6.0


def threshold_detector(epoch, params):
    return detect_events(np.abs(epoch.y), params["lam0"], epoch.fs, 0.0, 100.0)


@pytest.fixture
def epochs():
    y = np.zeros(100)
    y[20:40] = 1.0
    y[60:70] = 0.3
    return [LabeledEpoch(y, 10.0, [EventInterval(20, 40)])]


def test_grid_search_single_point(epochs):
    res = grid_search(epochs, threshold_detector, {"lam0": [0.5]}, GridTarget(0.9, 0.9))
    assert len(res.table) == 1
    row = res.table[0]
    assert row["sensitivity"] == 1.0 and row["specificity"] == 1.0
    assert res.feasible == res.table


def test_grid_search_feasibility_and_workers(epochs):
    grids = {"lam0": [0.1, 0.5, 2.0]}
    res = grid_search(epochs, threshold_detector, grids, GridTarget(0.95, 0.5))
    assert [r["lam0"] for r in res.feasible] == [0.5]
    par = grid_search(epochs, threshold_detector, grids, GridTarget(0.95, 0.5), workers=2)
    assert par.table == res.table


def test_grid_search_rejects_empty_inputs(epochs):
    with pytest.raises(EmptyGrid):
        grid_search(epochs, threshold_detector, {"lam0": []}, GridTarget(0.9, 0.9))
    with pytest.raises(EmptyGrid):
        grid_search([], threshold_detector, {"lam0": [1.0]}, GridTarget(0.9, 0.9))
