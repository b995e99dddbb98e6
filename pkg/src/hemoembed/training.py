"""Triplet objective, its gradients through the encoder, and the training loop.

Loss for one reference with embedding r, positive p and negatives n_1..n_K::

    L = softplus(-r.p) + sum_k softplus(r.n_k)

which equals -log sigmoid(r.p) - sum_k log sigmoid(-r.n_k).  A batch loss is
the mean over its N items.
"""
from __future__ import annotations

import csv
import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .encoder import (
    EncoderConfig,
    EncoderParams,
    _backward,
    _check_input,
    _forward,
    init_params,
    save_checkpoint,
)
from .sampling import DEFAULT_MIN_LENGTH, SamplerScheme, TripletBatch, make_rng, sample_triplets
from .signals import SubjectSeries

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


def softplus(z):
    """log(1 + exp(z)), stable for large |z|."""
    return np.logaddexp(0.0, z)


sigmoid = expit


@dataclass
class LossValue:
    total: float
    positive: float
    negatives: np.ndarray  # one term per negative

    @property
    def negative_mean(self) -> float:
        return float(np.mean(self.negatives)) if len(self.negatives) else 0.0


def triplet_loss(e_ref, e_pos, e_negs) -> LossValue:
    e_ref = np.asarray(e_ref, dtype=np.float64)
    e_pos = np.asarray(e_pos, dtype=np.float64)
    e_negs = np.atleast_2d(np.asarray(e_negs, dtype=np.float64))
    if len(e_negs) < 1:
        raise ValueError("need at least one negative")
    if e_ref.shape != e_pos.shape or e_negs.shape[1:] != e_ref.shape:
        raise ValueError(
            f"embedding dimension mismatch: ref {e_ref.shape}, pos {e_pos.shape}, negs {e_negs.shape}"
        )
    pos = float(softplus(-(e_ref @ e_pos)))
    negs = softplus(e_negs @ e_ref)
    return LossValue(pos + float(np.sum(negs)), pos, negs)


def _embedding_grads(e_ref, e_pos, e_negs):
    """d loss / d (ref, pos, negs) for one item."""
    dpos = -sigmoid(-(e_ref @ e_pos))
    dneg = sigmoid(e_negs @ e_ref)
    g_ref = dpos * e_pos + dneg @ e_negs
    g_pos = dpos * e_ref
    g_negs = dneg[:, None] * e_ref[None, :]
    return g_ref, g_pos, g_negs


def _members(batch: TripletBatch):
    """All spans in a fixed order: refs, positives, then negatives item by item."""
    spans = list(batch.references) + list(batch.positives)
    for negs in batch.negatives:
        spans.extend(negs)
    return spans


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def batch_loss(params: EncoderParams, batch: TripletBatch) -> LossValue:
    """Batch-mean loss (no gradients)."""
    spans = _members(batch)
    embs = [_forward(params, _check_input(params.config, batch.values(s)))[0] for s in spans]
    return _assemble_loss(batch, embs)[0]


def _assemble_loss(batch: TripletBatch, embs):
    N, K = batch.size, batch.num_negatives
    refs = embs[:N]
    poss = embs[N:2 * N]
    negs = [np.vstack(embs[2 * N + i * K:2 * N + (i + 1) * K]) for i in range(N)]
    items = [triplet_loss(refs[i], poss[i], negs[i]) for i in range(N)]
    mean = LossValue(
        total=float(np.mean([v.total for v in items])),
        positive=float(np.mean([v.positive for v in items])),
        negatives=np.mean([v.negatives for v in items], axis=0),
    )
    return mean, refs, poss, negs


def loss_gradients(params: EncoderParams, batch: TripletBatch, threads: int = 1):
    """Batch-mean loss and its exact gradient w.r.t. every encoder parameter.

    Per-member gradients are summed in a fixed order, so the result does not
    depend on ``threads``.
    """
    spans = _members(batch)
    fwd = _map(lambda s: _forward(params, _check_input(params.config, batch.values(s))), spans, threads)
    embs = [e for e, _ in fwd]
    loss, refs, poss, negs = _assemble_loss(batch, embs)
    N, K = batch.size, batch.num_negatives
    upstream: list[np.ndarray] = [None] * len(spans)
    for i in range(N):
        g_ref, g_pos, g_negs = _embedding_grads(refs[i], poss[i], negs[i])
        upstream[i] = g_ref / N
        upstream[N + i] = g_pos / N
        for k in range(K):
            upstream[2 * N + i * K + k] = g_negs[k] / N
    per_member = _map(lambda m: _backward(params, fwd[m][1], upstream[m]), range(len(spans)), threads)
    grads = {name: np.zeros_like(a) for name, a in params.items()}
    for g in per_member:
        for name in grads:
            grads[name] += g[name]
    return loss, grads


# --- optimizers ------------------------------------------------------------------


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            arrays[name] -= self.lr * g


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            arrays[name] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


# --- training loop ---------------------------------------------------------------


@dataclass
class TrainConfig:
    iterations: int = 1500
    batch_size: int = 8
    negatives: int = 4
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # "adam" or "sgd"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    scheme: str = "cross"  # "cross" or "within"
    min_length: int = DEFAULT_MIN_LENGTH
    # each batch sequence is a random crop of this many timesteps (None: whole record)
    sequence_length: int | None = 600
    seed: int = 0
    checkpoint_every: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.batch_size < 1 or self.negatives < 1:
            raise ValueError("batch_size and negatives must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        SamplerScheme(self.scheme)

    def make_optimizer(self):
        if self.optimizer == "sgd":
            return SGD(self.learning_rate)
        return Adam(self.learning_rate, self.adam_beta1, self.adam_beta2, self.adam_eps)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TraceRow:
    iteration: int
    loss: float
    pos_term: float
    neg_term_mean: float


@dataclass
class TrainResult:
    params: EncoderParams
    trace: list[TraceRow] = field(default_factory=list)

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.trace])


def draw_batch_sequences(
    sources: Sequence[SubjectSeries], cfg: TrainConfig, rng: np.random.Generator
) -> tuple[list[np.ndarray], list[str]]:
    """N training sequences: random crops, one subject each (distinct while possible)."""
    n = len(sources)
    replace = cfg.batch_size > n
    picks = rng.choice(n, size=cfg.batch_size, replace=replace)
    seqs, ids = [], []
    for p in picks:
        s = sources[int(p)]
        T = s.num_timesteps
        L = T if cfg.sequence_length is None else min(cfg.sequence_length, T)
        start = int(rng.integers(0, T - L + 1))
        seqs.append(s.values[:, start:start + L])
        ids.append(s.subject_id)
    return seqs, ids


def train(
    sources: Sequence[SubjectSeries],
    enc_cfg: EncoderConfig,
    train_cfg: TrainConfig,
    checkpoint_dir: str | Path | None = None,
    init: EncoderParams | None = None,
    callback: Callable[[TraceRow], None] | None = None,
) -> TrainResult:
    if not sources:
        raise ValueError("no training sources")
    need = 2 * train_cfg.min_length
    for s in sources:
        L = s.num_timesteps if train_cfg.sequence_length is None else min(train_cfg.sequence_length, s.num_timesteps)
        if L < need:
            raise ValueError(f"source {s.subject_id!r}: training sequences of {L} steps < 2*min_length")
        if s.num_channels != enc_cfg.in_channels:
            raise ValueError(f"source {s.subject_id!r} has {s.num_channels} channels, encoder expects {enc_cfg.in_channels}")
    params = init.copy() if init is not None else init_params(enc_cfg, train_cfg.seed)
    opt = train_cfg.make_optimizer()
    result = TrainResult(params)
    for it in range(train_cfg.iterations):
        rng = make_rng([train_cfg.seed, it])
        seqs, ids = draw_batch_sequences(sources, train_cfg, rng)
        batch = sample_triplets(seqs, train_cfg.negatives, train_cfg.scheme, rng, train_cfg.min_length, ids)
        loss, grads = loss_gradients(params, batch, train_cfg.threads)
        if not np.isfinite(loss.total):
            raise TrainingError(
                f"non-finite loss at iteration {it}: total={loss.total} positive={loss.positive} "
                f"negatives={loss.negatives.tolist()}"
            )
        opt.step(params.arrays, grads)
        row = TraceRow(it, loss.total, loss.positive, loss.negative_mean)
        result.trace.append(row)
        if callback is not None:
            callback(row)
        if checkpoint_dir is not None and train_cfg.checkpoint_every and (it + 1) % train_cfg.checkpoint_every == 0:
            save_checkpoint(params, Path(checkpoint_dir) / f"encoder_{it + 1:06d}")
    return result


def write_trace(trace: Sequence[TraceRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss", "pos_term", "neg_term_mean"])
        for r in trace:
            w.writerow([r.iteration, repr(r.loss), repr(r.pos_term), repr(r.neg_term_mean)])


# --- gradient check -----------------------------------------------------------------


def tiny_config() -> EncoderConfig:
    return EncoderConfig(in_channels=2, hidden_channels=3, num_layers=2, kernel_size=2, embedding_dim=4)


@dataclass
class GradCheckReport:
    num_parameters: int
    max_abs_error: float
    max_rel_error: float
    worst_parameter: str

    def passed(self, rel_tol: float = 1e-4) -> bool:
        return self.max_rel_error < rel_tol


def grad_check(
    enc_cfg: EncoderConfig | None = None,
    seed: int = 0,
    step: float = 1e-5,
    params: EncoderParams | None = None,
    rel_floor: float = 1e-6,
) -> GradCheckReport:
    """Compare analytic gradients of one random triplet batch to central differences.

    Relative error per parameter is ``|a - n| / max(|a|, |n|, rel_floor)``.
    """
    enc_cfg = enc_cfg or tiny_config()
    rng = make_rng(seed)
    if params is None:
        params = init_params(enc_cfg, seed)
        # nonzero biases so every parameter participates
        for name, a in params.items():
            if name.endswith(".bias"):
                a[...] = rng.uniform(-0.1, 0.1, size=a.shape)
    sources = [rng.standard_normal((enc_cfg.in_channels, 24)) for _ in range(2)]
    batch = sample_triplets(sources, K=2, rng_seed=rng, min_length=4)
    _, grads = loss_gradients(params, batch)
    analytic = np.concatenate([g.ravel() for g in grads.values()])
    names = [f"{name}[{i}]" for name, a in params.items() for i in range(a.size)]
    base = params.flat()
    numeric = np.empty_like(base)
    for i in range(len(base)):
        up = base.copy()
        up[i] += step
        down = base.copy()
        down[i] -= step
        numeric[i] = (batch_loss(params.with_flat(up), batch).total - batch_loss(params.with_flat(down), batch).total) / (2 * step)
    abs_err = np.abs(analytic - numeric)
    rel_err = abs_err / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), rel_floor)
    worst = int(np.argmax(rel_err))
    return GradCheckReport(len(base), float(abs_err.max()), float(rel_err.max()), names[worst])
