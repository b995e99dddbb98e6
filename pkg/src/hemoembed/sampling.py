"""Reference / positive / negative subseries sampling with disjoint negatives.

Per batch item a reference subseries is drawn from its sequence and a positive
subseries from inside the reference.  Then K*N negatives are drawn; a negative
taken from sequence j never overlaps the reference drawn from sequence j, so
a negative can never also be a positive.

Spans are half-open: ``[start, start + length)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_MIN_LENGTH = 16


class SamplerScheme(str, enum.Enum):
    CROSS_SUBJECT = "cross"  # negatives from any sequence in the batch
    WITHIN_SUBJECT = "within"  # negatives only from the item's own sequence


@dataclass(frozen=True)
class Span:
    source: int  # index into the batch
    start: int
    length: int

    @property
    def stop(self) -> int:
        return self.start + self.length

    def contains(self, other: "Span") -> bool:
        return self.source == other.source and self.start <= other.start and other.stop <= self.stop

    def overlaps(self, other: "Span") -> bool:
        return self.source == other.source and self.start < other.stop and other.start < self.stop


@dataclass
class TripletBatch:
    sources: list[np.ndarray]  # N arrays [channels, len_i]
    source_ids: list[str]
    references: list[Span]
    positives: list[Span]
    negatives: list[list[Span]]  # N lists of K spans
    scheme: SamplerScheme
    min_length: int

    @property
    def size(self) -> int:
        return len(self.references)

    @property
    def num_negatives(self) -> int:
        return len(self.negatives[0]) if self.negatives else 0

    def values(self, span: Span) -> np.ndarray:
        return self.sources[span.source][:, span.start:span.stop]


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator so parallel draws with distinct seeds stay reproducible."""
    return np.random.Generator(np.random.Philox(seed))


def placement_count(source_len: int, ref_span: Span, neg_len: int) -> int:
    """Start positions where a length-``neg_len`` span fits wholly before or after ``ref_span``."""
    if neg_len < 1:
        raise ValueError("neg_len must be >= 1")
    before = max(0, ref_span.start - neg_len + 1)
    after = max(0, source_len - ref_span.stop - neg_len + 1)
    return before + after


def sample_negative_start(rng: np.random.Generator, source_len: int, ref_span: Span, neg_len: int) -> int:
    """Uniform draw over all disjoint placements of a span of ``neg_len``."""
    before = max(0, ref_span.start - neg_len + 1)
    total = placement_count(source_len, ref_span, neg_len)
    if total == 0:
        raise ValueError(f"no room for a negative of length {neg_len} beside reference {ref_span}")
    u = int(rng.integers(total))
    return u if u < before else ref_span.stop + (u - before)


def _reference_start(rng: np.random.Generator, source_len: int, length: int, min_length: int) -> int:
    """Uniform start among placements leaving a gap of at least ``min_length`` on one side."""
    hi = source_len - length
    left_hi = hi - min_length  # starts leaving room after
    right_lo = min_length  # starts leaving room before
    if right_lo <= left_hi + 1:
        return int(rng.integers(0, hi + 1))
    n_left = left_hi + 1 if left_hi >= 0 else 0
    n_right = hi - right_lo + 1 if hi >= right_lo else 0
    u = int(rng.integers(n_left + n_right))
    return u if u < n_left else right_lo + (u - n_left)


def sample_triplets(
    batch: Sequence[np.ndarray],
    K: int,
    scheme: SamplerScheme | str = SamplerScheme.CROSS_SUBJECT,
    rng_seed=0,
    min_length: int = DEFAULT_MIN_LENGTH,
    source_ids: Sequence[str] | None = None,
) -> TripletBatch:
    scheme = SamplerScheme(scheme)
    N = len(batch)
    if N < 1:
        raise ValueError("batch must hold at least one sequence")
    if K < 1:
        raise ValueError("K must be >= 1")
    if min_length < 1:
        raise ValueError("min_length must be >= 1")
    ids = list(source_ids) if source_ids is not None else [str(i) for i in range(N)]
    sources = [np.asarray(y) for y in batch]
    for i, y in enumerate(sources):
        if y.shape[-1] < 2 * min_length:
            raise ValueError(
                f"source {ids[i]!r} has length {y.shape[-1]}, needs >= 2*min_length = {2 * min_length}"
            )
    rng = make_rng(rng_seed) if not isinstance(rng_seed, np.random.Generator) else rng_seed

    refs, poss = [], []
    for i, y in enumerate(sources):
        L = y.shape[-1]
        len_ref = int(rng.integers(min_length, L - min_length + 1))
        len_pos = int(rng.integers(min_length, len_ref + 1))
        ref = Span(i, _reference_start(rng, L, len_ref, min_length), len_ref)
        pos_start = ref.start + int(rng.integers(0, len_ref - len_pos + 1))
        refs.append(ref)
        poss.append(Span(i, pos_start, len_pos))

    negs: list[list[Span]] = [[] for _ in range(N)]
    for n in range(K * N):
        item = n // K
        j = item if scheme is SamplerScheme.WITHIN_SUBJECT else int(rng.integers(N))
        L = sources[j].shape[-1]
        ref = refs[j]
        max_len = max(ref.start, L - ref.stop)
        len_neg = int(rng.integers(min_length, max_len + 1))
        negs[item].append(Span(j, sample_negative_start(rng, L, ref, len_neg), len_neg))

    return TripletBatch(sources, ids, refs, poss, negs, scheme, min_length)
