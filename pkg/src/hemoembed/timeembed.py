"""Sinusoidal position vectors added to window embeddings."""
from __future__ import annotations

import enum
from typing import Sequence

import numpy as np


class TimeAttachMode(str, enum.Enum):
    NONE = "none"
    FULL = "full"  # position = window index from record start
    FROM_BLEED = "from-bleed"  # prebleed windows sit at position 0


def sinusoidal_embedding(position: float, dim: int) -> np.ndarray:
    """Components 2i, 2i+1 = sin, cos of position / 10000**(2i/dim)."""
    if dim < 2 or dim % 2:
        raise ValueError(f"dim must be a positive even integer, got {dim}")
    i = np.arange(dim // 2)
    angle = position / np.power(10000.0, 2.0 * i / dim)
    out = np.empty(dim)
    out[0::2] = np.sin(angle)
    out[1::2] = np.cos(angle)
    return out


def positions(window_index: Sequence[int], bleed_window: Sequence[int] | None, mode: TimeAttachMode) -> np.ndarray:
    """Per-window positions; ``bleed_window`` is each window's first bleed window index."""
    idx = np.asarray(window_index, dtype=np.float64)
    if mode is TimeAttachMode.FULL:
        return idx
    if mode is TimeAttachMode.FROM_BLEED:
        if bleed_window is None:
            raise ValueError("from-bleed mode needs the bleed window index")
        return np.maximum(idx - np.asarray(bleed_window, dtype=np.float64), 0.0)
    return np.zeros_like(idx)


def attach_time(
    embeddings: np.ndarray,
    window_index: Sequence[int],
    mode: TimeAttachMode | str = TimeAttachMode.NONE,
    bleed_window: Sequence[int] | None = None,
    scale_factor: float = 2.0,
) -> np.ndarray:
    """Add scaled sinusoidal position vectors to embeddings ``[n, d]``.

    Row r gets ``s * sinusoidal_embedding(pos_r, d)`` with
    ``s = scale_factor * std(all components) / max |component|``, so each
    added component stays strictly below ``scale_factor`` standard deviations.
    ``window_index`` counts windows from the start of each subject's record.
    """
    mode = TimeAttachMode(mode)
    E = np.asarray(embeddings, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] == 0:
        raise ValueError("attach_time needs a non-empty [n, d] embedding array")
    if mode is TimeAttachMode.NONE:
        return E.copy()
    n, d = E.shape
    if len(window_index) != n:
        raise ValueError("one window index per embedding is required")
    return E + time_offsets(E, window_index, mode, bleed_window, scale_factor)


def time_offsets(E, window_index, mode, bleed_window=None, scale_factor: float = 2.0) -> np.ndarray:
    """The additive term used by :func:`attach_time`."""
    mode = TimeAttachMode(mode)
    E = np.asarray(E, dtype=np.float64)
    n, d = E.shape
    if mode is TimeAttachMode.NONE:
        return np.zeros_like(E)
    pos = positions(window_index, bleed_window, mode)
    P = np.vstack([sinusoidal_embedding(p, d) for p in pos])
    sigma = float(E.std())
    peak = float(np.abs(P).max())
    if sigma == 0.0 or peak == 0.0:
        return np.zeros_like(E)
    # shrink by one ulp so the bound holds strictly after rounding
    s = np.nextafter(scale_factor * sigma / peak, 0.0)
    offsets = s * P
    while np.abs(offsets).max() >= scale_factor * sigma:
        s = np.nextafter(s, 0.0)
        offsets = s * P
    return offsets
