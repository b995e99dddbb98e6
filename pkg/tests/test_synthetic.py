from __future__ import annotations

import numpy as np
import pytest

from hemoembed.signals import make_windows
from hemoembed.synthetic import (
    SyntheticConfig,
    _waveform,
    draw_event_indices,
    generate_synthetic,
    repeat_regime_config,
)


def small(**kw):
    base = dict(num_subjects=3, baseline_minutes=1.0, bleed_minutes=3.0, draw_interval_minutes=1.0, seed=4)
    base.update(kw)
    return SyntheticConfig(**base)


def test_deterministic_and_subject_local():
    a = generate_synthetic(small())
    b = generate_synthetic(small())
    c = generate_synthetic(small(num_subjects=2))
    for x, y in zip(a, b):
        assert x.values.tobytes() == y.values.tobytes()
    # subject i depends only on (seed, i)
    assert a[1].values.tobytes() == c[1].values.tobytes()
    assert [s.subject_id for s in a] == ["S01", "S02", "S03"]


def test_regime_layout():
    s = generate_synthetic(small())[0]
    fs = 50
    assert s.bleed_start_idx == 60 * fs
    lab = s.regime_labels
    assert np.all(lab[: s.bleed_start_idx] == 0)
    bleed = 3 * 60 * fs
    b1 = s.bleed_start_idx + round(0.3 * bleed)
    b2 = s.bleed_start_idx + round(0.7 * bleed)
    assert np.all(lab[s.bleed_start_idx:b1] == 1)
    assert np.all(lab[b1:b2] == 2)
    assert np.all(lab[b2:] == 3)


def test_draw_events():
    cfg = small()
    assert draw_event_indices(cfg, 4 * 60 * 50) == (3000, 6000, 9000)
    assert draw_event_indices(small(first_draw_minutes=0.5), 4 * 60 * 50) == (1500, 4500, 7500, 10500)
    s = generate_synthetic(cfg)[0]
    assert s.draw_events == (3000, 6000, 9000)
    # the artifact raises every channel during the draw
    clean = generate_synthetic(small(draw_artifact_magnitude=0.0))[0]
    diff = s.values - clean.values
    assert np.all(diff[:, 3000:3050] > 0)
    np.testing.assert_array_equal(diff[:, 3050:6000], 0.0)


def test_pulse_waveform_zero_mean():
    phase = np.linspace(0, 2 * np.pi, 100_000, endpoint=False)
    assert abs(_waveform(phase, "pulse").mean()) < 1e-9
    with pytest.raises(ValueError):
        _waveform(phase, "square")


def test_heart_channels_phase_locked():
    # one heart drives every heart channel, so their dominant frequencies coincide
    s = generate_synthetic(small(noise_std=0.0, draw_artifact_magnitude=0.0))[0]
    seg = s.values[:, :3000]
    peaks = [np.argmax(np.abs(np.fft.rfft(ch - ch.mean()))) for ch in seg[:5]]
    assert len(set(peaks)) == 1


def test_validation():
    with pytest.raises(ValueError):
        small(regime_boundaries=(0.7, 0.3))
    with pytest.raises(ValueError):
        small(regime_boundaries=(0.3,))
    with pytest.raises(ValueError):
        small(regime_sequence=(1, 4, 2))
    with pytest.raises(ValueError):
        SyntheticConfig.from_dict({"subjects": 3})


def test_per_subject_boundaries():
    cfg = small(regime_boundaries=[(0.2, 0.5), (0.3, 0.7), (0.4, 0.8)])
    a, b, _ = generate_synthetic(cfg)
    assert not np.array_equal(a.regime_labels, b.regime_labels)


def test_config_round_trip():
    cfg = small(regime_sequence=(1, 3, 2))
    assert SyntheticConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_repeat_regime_fixture():
    cfg = repeat_regime_config(num_subjects=1, baseline_minutes=1.0, bleed_minutes=3.0)
    s = generate_synthetic(cfg)[0]
    labels = [w.regime_label for w in make_windows(s, 120)]
    runs = [labels[0]] + [b for a, b in zip(labels, labels[1:]) if a != b]
    assert runs == [0, 1, 2, 1]
