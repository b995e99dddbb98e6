from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hemoembed.signals import (
    DeadChannelWarning,
    SeriesFormatError,
    SubjectSeries,
    load_series,
    majority_label,
    make_windows,
    normalize,
    save_series,
    windows_for,
)


def series(values, bleed=0, draws=(), labels=None, rate=10.0, sid="A"):
    values = np.asarray(values, dtype=float)
    names = tuple(f"c{i}" for i in range(values.shape[0]))
    return SubjectSeries(sid, rate, names, values, bleed, draws, labels)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 80)), elements=finite))
def test_normalize_moments(x):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeadChannelWarning)
        out = normalize(series(x))
    for row, orig in zip(out.values, x):
        assert abs(row.mean()) < 1e-9
        if orig.std() > 1e-6 * max(1.0, np.abs(orig).max()):
            assert row.std() == pytest.approx(1.0, rel=1e-9)


def test_dead_channel():
    x = np.vstack([np.full(10, 3.0), np.arange(10.0)])
    with pytest.warns(DeadChannelWarning):
        out = normalize(series(x))
    np.testing.assert_array_equal(out.values[0], 0.0)
    assert out.dead_channels == ("c0",)


def test_normalize_needs_two_steps():
    with pytest.raises(ValueError):
        normalize(series(np.ones((1, 1))))


def test_validation():
    with pytest.raises(ValueError, match="non-finite"):
        series([[1.0, np.nan]])
    with pytest.raises(ValueError):
        series([[1.0, 2.0]], bleed=5)
    with pytest.raises(ValueError):
        series([[1.0, 2.0, 3.0]], draws=(2, 1))
    with pytest.raises(ValueError):
        series([[1.0, 2.0]], labels=[0])


def test_windows_floor_division():
    s = series(np.zeros((2, 70_000)), bleed=100)
    assert len(make_windows(s, 600)) == 116


def test_window_metadata():
    labels = np.array([0] * 6 + [1] * 4 + [2] * 2)
    s = series(np.arange(24.0).reshape(2, 12), bleed=4, draws=(5,), labels=labels, rate=2.0)
    ws = make_windows(s, 4)
    assert [w.start_idx for w in ws] == [0, 4, 8]
    assert [w.seconds_from_bleed for w in ws] == [-2.0, 0.0, 2.0]
    assert [w.overlaps_draw for w in ws] == [False, True, False]
    assert [w.regime_label for w in ws] == [0, 0, 1]  # window 3 ties 1 vs 2 -> smallest
    np.testing.assert_array_equal(ws[1].values, s.values[:, 4:8])


def test_majority_tie_smallest():
    assert majority_label(np.array([3, 3, 1, 1, 2])) == 1


def test_windows_for_concatenates():
    ws = windows_for([series(np.zeros((1, 10)), sid="A"), series(np.zeros((1, 7)), sid="B")], 3)
    assert ws.subject_ids == ["A"] * 3 + ["B"] * 2
    assert ws.stacked().shape == (5, 1, 3)


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    s = series(rng.standard_normal((3, 50)) * 1e3, bleed=7, draws=(3, 40), labels=rng.integers(0, 3, 50))
    save_series(s, tmp_path / "A.csv")
    t = load_series(tmp_path / "A.csv")
    assert t.values.tobytes() == s.values.tobytes()
    assert (t.subject_id, t.sample_rate_hz, t.bleed_start_idx, t.draw_events) == ("A", 10.0, 7, (3, 40))
    np.testing.assert_array_equal(t.regime_labels, s.regime_labels)
    assert t.channels == s.channels


def _write(tmp_path, text):
    p = tmp_path / "x.csv"
    p.write_text(text)
    return p


def test_loader_errors(tmp_path):
    meta = "# subject_id=A sample_rate_hz=1 bleed_start_idx=0 draw_events=\n"
    with pytest.raises(SeriesFormatError, match="missing bleed_start_idx"):
        load_series(_write(tmp_path, "# subject_id=A sample_rate_hz=1 draw_events=\na\n1\n"))
    with pytest.raises(SeriesFormatError, match="row 4 has 1 columns"):
        load_series(_write(tmp_path, meta + "a,b\n1,2\n3\n"))
    with pytest.raises(SeriesFormatError, match="row 3, column 2"):
        load_series(_write(tmp_path, meta + "a,b\n1,x\n"))
    with pytest.raises(SeriesFormatError, match="non-finite"):
        load_series(_write(tmp_path, meta + "a\nnan\n"))
    with pytest.raises(SeriesFormatError):
        load_series(_write(tmp_path, "a,b\n1,2\n"))
