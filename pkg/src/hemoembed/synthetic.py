"""Ground-truth-labelled synthetic stand-in for a controlled-hemorrhage recording protocol.

Each subject rests for a baseline period, then bleeds through a sequence of
regimes.  Every channel is an oscillator whose level, amplitude and frequency
shift at regime boundaries.  Lab blood draws are additive square pulses.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .signals import SubjectSeries


@dataclass
class ChannelSpec:
    name: str
    level: float
    amplitude: float
    frequency_hz: float
    shape: str = "sine"  # "sine" or "pulse"
    # channels sharing an oscillator share its rate and phase within a subject
    oscillator: str = "heart"
    phase_offset: float = 0.0
    # one entry per bleed regime (regime 1..num_regimes); the baseline is (0, 1, 1, 0)
    level_shift: tuple[float, ...] = ()
    amplitude_scale: tuple[float, ...] = ()
    frequency_scale: tuple[float, ...] = ()
    drift_per_minute: tuple[float, ...] = ()


def default_channels() -> list[ChannelSpec]:
    """Six channels loosely shaped like ART, PAP, CVP, ECG, pleth and airway pressure.

    The first bleed regime is deliberately close to baseline: compensation masks
    the early bleed.
    """
    heart = (1.02, 1.2, 1.45)
    flat = (0.0, 0.0, 0.0)
    return [
        ChannelSpec("ART", 90.0, 15.0, 1.5, "pulse", "heart", -0.4, (-4.0, -22.0, -40.0), (0.95, 0.7, 0.45), heart, (0.0, -0.5, -0.5)),
        ChannelSpec("PAP", 20.0, 6.0, 1.5, "pulse", "heart", -0.3, (-1.0, -5.0, -9.0), (0.95, 0.75, 0.5), heart, flat),
        ChannelSpec("CVP", 8.0, 2.0, 1.5, "sine", "heart", 0.6, (-0.3, -2.0, -3.5), (0.95, 0.8, 0.6), heart, flat),
        ChannelSpec("ECG", 0.0, 1.0, 1.5, "pulse", "heart", 0.0, (0.0, 0.0, 0.1), (1.0, 0.9, 0.8), heart, flat),
        ChannelSpec("pleth", 50.0, 10.0, 1.5, "sine", "heart", -1.2, (-2.0, -9.0, -16.0), (0.9, 0.6, 0.35), heart, flat),
        ChannelSpec("airway", 10.0, 5.0, 0.5, "sine", "resp", 0.0, (0.0, 0.5, 1.0), (1.0, 1.05, 1.15), (1.0, 1.1, 1.25), flat),
    ]


@dataclass
class SyntheticConfig:
    num_subjects: int = 8
    sample_rate_hz: float = 50.0
    baseline_minutes: float = 4.0
    bleed_minutes: float = 16.0
    num_regimes: int = 3
    # either one list shared by all subjects or one list per subject
    regime_boundaries: Any = (0.3, 0.7)
    # which regime's parameters each bleed segment uses; default 1..num_regimes
    regime_sequence: tuple[int, ...] | None = None
    draw_interval_minutes: float = 3.0
    first_draw_minutes: float | None = None  # defaults to draw_interval_minutes
    draw_width_seconds: float = 1.0
    draw_artifact_magnitude: float = 1.5
    channels: list[ChannelSpec] = field(default_factory=default_channels)
    noise_std: float = 0.1
    subject_jitter: float = 0.05
    seed: int = 0

    def __post_init__(self):
        self.channels = [c if isinstance(c, ChannelSpec) else ChannelSpec(**c) for c in self.channels]
        for c in self.channels:
            for name in ("level_shift", "amplitude_scale", "frequency_scale", "drift_per_minute"):
                setattr(c, name, tuple(getattr(c, name)))
        self.validate()

    def boundaries_for(self, subject: int) -> tuple[float, ...]:
        b = self.regime_boundaries
        if len(b) and isinstance(b[0], (list, tuple)):
            return tuple(b[subject])
        return tuple(b)

    @property
    def sequence(self) -> tuple[int, ...]:
        if self.regime_sequence is None:
            return tuple(range(1, self.num_regimes + 1))
        return tuple(self.regime_sequence)

    def validate(self) -> None:
        if self.num_subjects < 1:
            raise ValueError("num_subjects must be >= 1")
        if self.num_regimes < 2:
            raise ValueError("num_regimes must be >= 2")
        for name in ("sample_rate_hz", "baseline_minutes", "bleed_minutes", "draw_interval_minutes", "draw_width_seconds"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.channels:
            raise ValueError("at least one channel is required")
        seq = self.sequence
        if any(not 1 <= r <= self.num_regimes for r in seq):
            raise ValueError("regime_sequence entries must lie in [1, num_regimes]")
        for s in range(self.num_subjects):
            b = self.boundaries_for(s)
            if len(b) != len(seq) - 1:
                raise ValueError(f"subject {s}: need {len(seq) - 1} regime boundaries, got {len(b)}")
            if any(not 0.0 < x < 1.0 for x in b) or any(y <= x for x, y in zip(b, b[1:])):
                raise ValueError(f"subject {s}: regime boundaries must be strictly increasing within (0, 1)")
        for c in self.channels:
            for name in ("level_shift", "amplitude_scale", "frequency_scale", "drift_per_minute"):
                if len(getattr(c, name)) != self.num_regimes:
                    raise ValueError(f"channel {c.name}: {name} needs {self.num_regimes} entries")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synthetic config keys: {sorted(unknown)}")
        d = dict(d)
        if d.get("regime_sequence") is not None:
            d["regime_sequence"] = tuple(d["regime_sequence"])
        return cls(**d)


def _waveform(phase: np.ndarray, shape: str) -> np.ndarray:
    if shape == "sine":
        return np.sin(phase)
    if shape == "pulse":
        # sharpened positive lobe; its cycle mean is 5/32
        lobe = np.maximum(np.sin(phase), 0.0) ** 6
        return 2.0 * (lobe - 5.0 / 32.0)
    raise ValueError(f"unknown waveform shape {shape!r}")


def _segment_bounds(cfg: SyntheticConfig, subject: int, bleed_start: int, bleed_len: int) -> list[int]:
    inner = [bleed_start + int(round(f * bleed_len)) for f in cfg.boundaries_for(subject)]
    return [0, bleed_start, *inner, bleed_start + bleed_len]


def draw_event_indices(cfg: SyntheticConfig, num_timesteps: int) -> tuple[int, ...]:
    first = cfg.draw_interval_minutes if cfg.first_draw_minutes is None else cfg.first_draw_minutes
    per_minute = 60.0 * cfg.sample_rate_hz
    out = []
    j = 0
    while True:
        idx = int(round((first + j * cfg.draw_interval_minutes) * per_minute))
        if idx >= num_timesteps:
            break
        if idx >= 0:
            out.append(idx)
        j += 1
    return tuple(out)


def _subject(cfg: SyntheticConfig, subject: int) -> SubjectSeries:
    rng = np.random.default_rng([cfg.seed, subject])
    fs = cfg.sample_rate_hz
    bleed_start = int(round(cfg.baseline_minutes * 60.0 * fs))
    bleed_len = int(round(cfg.bleed_minutes * 60.0 * fs))
    total = bleed_start + bleed_len
    bounds = _segment_bounds(cfg, subject, bleed_start, bleed_len)
    seg_regime = (0, *cfg.sequence)

    labels = np.empty(total, dtype=np.int64)
    for s, r in enumerate(seg_regime):
        labels[bounds[s]:bounds[s + 1]] = r

    values = np.empty((len(cfg.channels), total))
    j = cfg.subject_jitter
    oscillators = sorted({ch.oscillator for ch in cfg.channels})
    rate_j = {name: 1.0 + j * rng.standard_normal() for name in oscillators}
    phase0 = {name: rng.uniform(0.0, 2.0 * np.pi) for name in oscillators}
    for ci, ch in enumerate(cfg.channels):
        level_j = j * ch.amplitude * rng.standard_normal()
        amp_j = 1.0 + j * rng.standard_normal()
        level = np.empty(total)
        amp = np.empty(total)
        freq = np.empty(total)
        for s, r in enumerate(seg_regime):
            a, b = bounds[s], bounds[s + 1]
            if r == 0:
                shift, ascale, fscale, drift = 0.0, 1.0, 1.0, 0.0
            else:
                shift = ch.level_shift[r - 1]
                ascale = ch.amplitude_scale[r - 1]
                fscale = ch.frequency_scale[r - 1]
                drift = ch.drift_per_minute[r - 1]
            minutes = np.arange(b - a) / (60.0 * fs)
            level[a:b] = ch.level + shift + drift * minutes
            amp[a:b] = ch.amplitude * ascale
            freq[a:b] = ch.frequency_hz * fscale
        phase = phase0[ch.oscillator] + ch.phase_offset + np.cumsum(2.0 * np.pi * freq * rate_j[ch.oscillator] / fs)
        noise = cfg.noise_std * ch.amplitude * rng.standard_normal(total)
        values[ci] = level + level_j + amp * amp_j * _waveform(phase, ch.shape) + noise

    draws = draw_event_indices(cfg, total)
    width = max(1, int(round(cfg.draw_width_seconds * fs)))
    amplitudes = np.array([ch.amplitude for ch in cfg.channels])
    for idx in draws:
        values[:, idx:idx + width] += cfg.draw_artifact_magnitude * amplitudes[:, None]

    return SubjectSeries(
        subject_id=f"S{subject + 1:02d}",
        sample_rate_hz=fs,
        channels=tuple(ch.name for ch in cfg.channels),
        values=values,
        bleed_start_idx=bleed_start,
        draw_events=draws,
        regime_labels=labels,
    )


def generate_synthetic(cfg: SyntheticConfig) -> list[SubjectSeries]:
    """Deterministic in ``cfg.seed``; subject ``i`` depends only on (seed, i)."""
    cfg.validate()
    return [_subject(cfg, i) for i in range(cfg.num_subjects)]


def repeat_regime_config(**overrides) -> SyntheticConfig:
    """A protocol where the bleed revisits an earlier regime (A, B, A)."""
    kw: dict[str, Any] = dict(num_regimes=2, regime_boundaries=(1 / 3, 2 / 3), regime_sequence=(1, 2, 1))
    kw.update(overrides)
    if "channels" not in kw:
        kw["channels"] = [
            dataclasses.replace(
                c,
                level_shift=(c.level_shift[0], c.level_shift[2]),
                amplitude_scale=(c.amplitude_scale[0], c.amplitude_scale[2]),
                frequency_scale=(c.frequency_scale[0], c.frequency_scale[2]),
                drift_per_minute=(0.0, 0.0),
            )
            for c in default_channels()
        ]
    return SyntheticConfig(**kw)

