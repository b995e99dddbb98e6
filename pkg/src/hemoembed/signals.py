"""Multichannel physiological series: data model, CSV I/O, normalization, windowing."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

DEFAULT_CHANNELS = ("ART", "PAP", "CVP", "ECG", "pleth", "airway")


class SeriesFormatError(ValueError):
    """Raised when a series file does not match the expected CSV layout."""


class DeadChannelWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class SubjectSeries:
    subject_id: str
    sample_rate_hz: float
    channels: tuple[str, ...]
    values: np.ndarray  # [num_channels, num_timesteps], float64
    bleed_start_idx: int
    draw_events: tuple[int, ...] = ()
    regime_labels: np.ndarray | None = None
    dead_channels: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D [channels, timesteps], got shape {values.shape}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "draw_events", tuple(int(i) for i in self.draw_events))
        c, t = values.shape
        if c < 1 or t < 1:
            raise ValueError("series needs at least one channel and one timestep")
        if len(self.channels) != c:
            raise ValueError(f"{len(self.channels)} channel names for {c} channels")
        if not np.all(np.isfinite(values)):
            ch, ts = np.argwhere(~np.isfinite(values))[0]
            raise ValueError(f"non-finite value in channel {self.channels[ch]!r} at timestep {ts}")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if not 0 <= self.bleed_start_idx < t:
            raise ValueError(f"bleed_start_idx {self.bleed_start_idx} outside [0, {t})")
        ev = self.draw_events
        if any(b <= a for a, b in zip(ev, ev[1:])):
            raise ValueError("draw_events must be strictly increasing")
        if ev and (ev[0] < 0 or ev[-1] >= t):
            raise ValueError(f"draw_events must lie in [0, {t})")
        if self.regime_labels is not None:
            labels = np.asarray(self.regime_labels, dtype=np.int64)
            if labels.shape != (t,):
                raise ValueError(f"regime_labels length {labels.shape} != num_timesteps {t}")
            object.__setattr__(self, "regime_labels", labels)

    @property
    def num_channels(self) -> int:
        return self.values.shape[0]

    @property
    def num_timesteps(self) -> int:
        return self.values.shape[1]

    def seconds_from_bleed(self, idx) -> float:
        return (idx - self.bleed_start_idx) / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class Window:
    subject_id: str
    start_idx: int
    length: int
    values: np.ndarray  # [num_channels, length]
    seconds_from_bleed: float
    overlaps_draw: bool
    regime_label: int | None = None  # majority ground-truth label, synthetic data only


@dataclass
class WindowSet:
    windows: list[Window] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.windows)

    def __iter__(self) -> Iterator[Window]:
        return iter(self.windows)

    def __getitem__(self, i) -> Window:
        return self.windows[i]

    def extend(self, other: "WindowSet") -> None:
        self.windows.extend(other.windows)

    @property
    def subject_ids(self) -> list[str]:
        return [w.subject_id for w in self.windows]

    def stacked(self) -> np.ndarray:
        """All windows as one [n, channels, length] array (windows must share a length)."""
        return np.stack([w.values for w in self.windows]) if self.windows else np.empty((0, 0, 0))


def normalize(series: SubjectSeries) -> SubjectSeries:
    """Z-score every channel over the whole record (population std).

    A channel with zero variance is only mean-centred (so it becomes all zeros),
    listed in ``dead_channels`` and reported with a :class:`DeadChannelWarning`.
    """
    if series.num_timesteps < 2:
        raise ValueError("normalization needs at least 2 timesteps")
    x = series.values
    mean = x.mean(axis=1, keepdims=True)
    centred = x - mean
    std = np.sqrt((centred ** 2).mean(axis=1, keepdims=True))
    dead = std[:, 0] == 0.0
    out = centred / np.where(dead[:, None], 1.0, std)
    # a second pass removes the O(eps) residual mean left by the division
    out -= out.mean(axis=1, keepdims=True)
    dead_names = tuple(ch for ch, d in zip(series.channels, dead) if d)
    if dead_names:
        warnings.warn(f"{series.subject_id}: zero-variance channels {dead_names}", DeadChannelWarning, stacklevel=2)
    return replace(series, values=out, dead_channels=dead_names)


def majority_label(labels: np.ndarray) -> int:
    """Most frequent label; ties go to the smallest label."""
    vals, counts = np.unique(labels, return_counts=True)
    return int(vals[np.argmax(counts)])


def make_windows(series: SubjectSeries, length: int) -> WindowSet:
    """Cut consecutive nonoverlapping windows; a trailing partial window is dropped."""
    if length < 1:
        raise ValueError("window length must be >= 1")
    n = series.num_timesteps // length
    draws = np.asarray(series.draw_events, dtype=np.int64)
    out = []
    for i in range(n):
        start = i * length
        stop = start + length
        label = None
        if series.regime_labels is not None:
            label = majority_label(series.regime_labels[start:stop])
        out.append(
            Window(
                subject_id=series.subject_id,
                start_idx=start,
                length=length,
                values=series.values[:, start:stop],
                seconds_from_bleed=series.seconds_from_bleed(start),
                overlaps_draw=bool(np.any((draws >= start) & (draws < stop))),
                regime_label=label,
            )
        )
    return WindowSet(out)


def windows_for(series_list: Sequence[SubjectSeries], length: int) -> WindowSet:
    ws = WindowSet()
    for s in series_list:
        ws.extend(make_windows(s, length))
    return ws


# --- CSV I/O -----------------------------------------------------------------

_REQUIRED_META = ("subject_id", "sample_rate_hz", "bleed_start_idx", "draw_events")


def _fmt(x: float) -> str:
    return np.format_float_positional(x, unique=True, trim="-")


def save_series(series: SubjectSeries, path: str | Path) -> Path:
    """Write ``series`` as CSV; regime labels, if any, go to a ``.labels`` sidecar."""
    path = Path(path)
    meta = (
        f"# subject_id={series.subject_id} sample_rate_hz={_fmt(series.sample_rate_hz)} "
        f"bleed_start_idx={series.bleed_start_idx} "
        f"draw_events={';'.join(str(i) for i in series.draw_events)}"
    )
    if series.regime_labels is not None:
        sidecar = path.with_suffix(".labels")
        sidecar.write_text("".join(f"{int(v)}\n" for v in series.regime_labels))
        meta += f" regime_labels_file={sidecar.name}"
    lines = [meta, ",".join(series.channels)]
    lines.extend(",".join(_fmt(v) for v in row) for row in series.values.T.tolist())
    path.write_text("\n".join(lines) + "\n")
    return path


def _parse_meta(line: str, path: Path) -> dict[str, str]:
    if not line.startswith("#"):
        raise SeriesFormatError(f"{path}: line 1 must be a '# key=value ...' metadata header")
    meta = {}
    for tok in line[1:].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise SeriesFormatError(f"{path}: malformed metadata token {tok!r}")
        meta[key] = val
    for key in _REQUIRED_META:
        if key not in meta:
            raise SeriesFormatError(f"{path}: missing {key}")
    return meta


def load_series(path: str | Path) -> SubjectSeries:
    path = Path(path)
    with path.open(newline="") as fh:
        meta = _parse_meta(fh.readline().rstrip("\n"), path)
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SeriesFormatError(f"{path}: missing channel-name header") from None
        header = [h.strip() for h in header]
        if not header or any(not h for h in header):
            raise SeriesFormatError(f"{path}: malformed channel header {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != len(header):
                raise SeriesFormatError(
                    f"{path}: row {lineno} has {len(row)} columns, expected {len(header)}"
                )
            parsed = []
            for col, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise SeriesFormatError(
                        f"{path}: non-numeric cell {cell!r} at row {lineno}, column {col + 1} ({header[col]})"
                    ) from None
                if not np.isfinite(v):
                    raise SeriesFormatError(
                        f"{path}: non-finite cell {cell!r} at row {lineno}, column {col + 1} ({header[col]})"
                    )
                parsed.append(v)
            rows.append(parsed)
    if not rows:
        raise SeriesFormatError(f"{path}: no data rows")
    try:
        rate = float(meta["sample_rate_hz"])
        bleed = int(meta["bleed_start_idx"])
        draws = tuple(int(v) for v in meta["draw_events"].split(";") if v)
    except ValueError as exc:
        raise SeriesFormatError(f"{path}: bad metadata value ({exc})") from None
    labels = None
    if "regime_labels_file" in meta:
        sidecar = path.parent / meta["regime_labels_file"]
        labels = np.array([int(v) for v in sidecar.read_text().split()], dtype=np.int64)
    try:
        return SubjectSeries(
            subject_id=meta["subject_id"],
            sample_rate_hz=rate,
            channels=tuple(header),
            values=np.array(rows, dtype=np.float64).T,
            bleed_start_idx=bleed,
            draw_events=draws,
            regime_labels=labels,
        )
    except ValueError as exc:
        raise SeriesFormatError(f"{path}: {exc}") from None
