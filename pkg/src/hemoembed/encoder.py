"""Dilated causal convolutional encoder with exact reverse-mode gradients.

Per layer: causal dilated conv -> leaky ReLU -> residual add.  The final
feature map is max-pooled over time and mapped linearly to the embedding,
so any input length T >= 1 yields an ``embedding_dim`` vector.

Everything is float64 numpy; one window is a ``[channels, T]`` array.
"""
from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

CHECKPOINT_FORMAT = "hemoembed-encoder/1"


@dataclass(frozen=True)
class EncoderConfig:
    in_channels: int
    hidden_channels: int = 32
    num_layers: int = 5
    kernel_size: int = 3
    dilation_base: int = 2
    embedding_dim: int = 128
    leaky_slope: float = 0.01
    residual: bool = True

    def __post_init__(self):
        if self.in_channels < 1 or self.hidden_channels < 1:
            raise ValueError("channel counts must be >= 1")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.kernel_size < 1:
            raise ValueError("kernel_size must be >= 1")
        if self.dilation_base < 1:
            raise ValueError("dilation_base must be >= 1")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")

    def dilation(self, layer: int) -> int:
        return self.dilation_base ** layer

    def layer_in(self, layer: int) -> int:
        return self.in_channels if layer == 0 else self.hidden_channels

    def has_projection(self, layer: int) -> bool:
        return self.residual and self.layer_in(layer) != self.hidden_channels

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown encoder config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def desk_config(in_channels: int, embedding_dim: int = 128) -> EncoderConfig:
    return EncoderConfig(in_channels, hidden_channels=32, num_layers=5, embedding_dim=embedding_dim)


def full_config(in_channels: int, embedding_dim: int = 128) -> EncoderConfig:
    """Preset sized for 600-step windows (receptive field 2047)."""
    return EncoderConfig(in_channels, hidden_channels=40, num_layers=10, embedding_dim=embedding_dim)


def receptive_field(config: EncoderConfig) -> int:
    return 1 + (config.kernel_size - 1) * sum(config.dilation(l) for l in range(config.num_layers))


def param_shapes(config: EncoderConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter names and shapes in canonical (checkpoint) order."""
    shapes = []
    h = config.hidden_channels
    for l in range(config.num_layers):
        shapes.append((f"conv{l}.weight", (h, config.layer_in(l), config.kernel_size)))
        shapes.append((f"conv{l}.bias", (h,)))
        if config.has_projection(l):
            shapes.append((f"proj{l}.weight", (h, config.layer_in(l))))
    shapes.append(("linear.weight", (config.embedding_dim, h)))
    shapes.append(("linear.bias", (config.embedding_dim,)))
    return shapes


class EncoderParams:
    """Named float64 weight arrays of one encoder, in canonical order."""

    def __init__(self, config: EncoderConfig, arrays: dict[str, np.ndarray], seed: int | None = None):
        self.config = config
        self.seed = seed
        self.arrays: dict[str, np.ndarray] = {}
        for name, shape in param_shapes(config):
            a = np.asarray(arrays[name], dtype=np.float64)
            if a.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name}: non-finite parameter values")
            self.arrays[name] = a
        extra = set(arrays) - set(self.arrays)
        if extra:
            raise ValueError(f"unexpected parameters {sorted(extra)}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self.arrays.items())

    @property
    def num_parameters(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays.values()])

    def with_flat(self, flat: np.ndarray) -> "EncoderParams":
        out, pos = {}, 0
        for name, a in self.arrays.items():
            out[name] = np.array(flat[pos:pos + a.size]).reshape(a.shape)
            pos += a.size
        if pos != len(flat):
            raise ValueError(f"flat vector has {len(flat)} entries, expected {pos}")
        return EncoderParams(self.config, out, self.seed)

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.config, {k: v.copy() for k, v in self.arrays.items()}, self.seed)


def init_params(config: EncoderConfig, seed: int) -> EncoderParams:
    """Kernels ~ U(-sqrt(1/fan_in), +sqrt(1/fan_in)); biases zero."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in param_shapes(config):
        if name.endswith(".bias"):
            arrays[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = np.sqrt(1.0 / fan_in)
            arrays[name] = rng.uniform(-bound, bound, size=shape)
    return EncoderParams(config, arrays, seed)


# --- forward / backward -------------------------------------------------------


def _check_input(config: EncoderConfig, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != config.in_channels:
        raise ValueError(f"expected input of shape ({config.in_channels}, T), got {x.shape}")
    if x.shape[1] < 1:
        raise ValueError("input must have at least one timestep")
    return x


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0, z, slope * z)


@dataclass
class _Cache:
    padded: list[np.ndarray]  # padded layer inputs
    inputs: list[np.ndarray]
    pre_act: list[np.ndarray]
    features: np.ndarray
    argmax: np.ndarray
    pooled: np.ndarray


def _forward(params: EncoderParams, x: np.ndarray) -> tuple[np.ndarray, _Cache]:
    cfg = params.config
    T = x.shape[1]
    k = cfg.kernel_size
    h = x
    padded, inputs, pre = [], [], []
    for l in range(cfg.num_layers):
        d = cfg.dilation(l)
        pad = (k - 1) * d
        hp = np.pad(h, ((0, 0), (pad, 0))) if pad else h
        W = params[f"conv{l}.weight"]
        z = np.broadcast_to(params[f"conv{l}.bias"][:, None], (W.shape[0], T)).copy()
        for j in range(k):
            z += W[:, :, j] @ hp[:, j * d:j * d + T]
        a = _leaky(z, cfg.leaky_slope)
        if cfg.residual:
            a = a + (params[f"proj{l}.weight"] @ h if cfg.has_projection(l) else h)
        padded.append(hp)
        inputs.append(h)
        pre.append(z)
        h = a
    idx = np.argmax(h, axis=1)  # first maximal index on ties
    pooled = h[np.arange(h.shape[0]), idx]
    emb = params["linear.weight"] @ pooled + params["linear.bias"]
    return emb, _Cache(padded, inputs, pre, h, idx, pooled)


def forward(params: EncoderParams, window: np.ndarray) -> np.ndarray:
    """Embedding of one ``[channels, T]`` window."""
    return _forward(params, _check_input(params.config, window))[0]


def feature_map(params: EncoderParams, window: np.ndarray) -> np.ndarray:
    """Final convolutional feature map ``[hidden, T]`` (before pooling)."""
    return _forward(params, _check_input(params.config, window))[1].features


def backward(
    params: EncoderParams,
    window: np.ndarray,
    upstream: np.ndarray,
    input_grad: bool = False,
):
    """Gradients of ``forward(params, window) @ upstream`` w.r.t. every parameter.

    Returns a dict name -> array (same shapes as ``params``), plus the gradient
    w.r.t. the window when ``input_grad`` is true.
    """
    cfg = params.config
    x = _check_input(cfg, window)
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != (cfg.embedding_dim,):
        raise ValueError(f"upstream gradient must have shape ({cfg.embedding_dim},), got {g.shape}")
    _, cache = _forward(params, x)
    return _backward(params, cache, g, input_grad)


def _backward(params: EncoderParams, cache: _Cache, g: np.ndarray, input_grad: bool = False):
    cfg = params.config
    k = cfg.kernel_size
    grads: dict[str, np.ndarray] = {}
    grads["linear.weight"] = np.outer(g, cache.pooled)
    grads["linear.bias"] = g.copy()
    dpooled = params["linear.weight"].T @ g
    H, T = cache.features.shape
    dh = np.zeros((H, T))
    dh[np.arange(H), cache.argmax] = dpooled
    for l in reversed(range(cfg.num_layers)):
        d = cfg.dilation(l)
        pad = (k - 1) * d
        h_in = cache.inputs[l]
        hp = cache.padded[l]
        z = cache.pre_act[l]
        W = params[f"conv{l}.weight"]
        dz = np.where(z > 0, dh, cfg.leaky_slope * dh)
        grads[f"conv{l}.bias"] = dz.sum(axis=1)
        dW = np.empty_like(W)
        need_dx = l > 0 or input_grad
        dhp = np.zeros_like(hp) if need_dx else None
        for j in range(k):
            seg = hp[:, j * d:j * d + T]
            dW[:, :, j] = dz @ seg.T
            if need_dx:
                dhp[:, j * d:j * d + T] += W[:, :, j].T @ dz
        grads[f"conv{l}.weight"] = dW
        if cfg.residual and cfg.has_projection(l):
            grads[f"proj{l}.weight"] = dh @ h_in.T
        if need_dx:
            dx = dhp[:, pad:]
            if cfg.residual:
                dx = dx + (params[f"proj{l}.weight"].T @ dh if cfg.has_projection(l) else dh)
            dh = dx
    ordered = {name: grads[name] for name, _ in param_shapes(cfg)}
    if input_grad:
        return ordered, dh
    return ordered


def embed_many(params: EncoderParams, windows: Sequence[np.ndarray], threads: int = 1) -> np.ndarray:
    """Embeddings of many windows as an ``[n, embedding_dim]`` array, in input order."""
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(lambda w: forward(params, w), windows))
    else:
        rows = [forward(params, w) for w in windows]
    if not rows:
        return np.empty((0, params.config.embedding_dim))
    return np.vstack(rows)


# --- checkpoints ---------------------------------------------------------------


def save_checkpoint(params: EncoderParams, path: str | Path) -> Path:
    """Write ``<path>.json`` (manifest) and ``<path>.bin`` (little-endian float64 blob)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path = path.with_suffix(".json")
    blob_path = path.with_suffix(".bin")
    tensors, offset = [], 0
    for name, a in params.items():
        tensors.append({"name": name, "shape": list(a.shape), "offset": offset, "count": int(a.size)})
        offset += a.size * 8
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "dtype": "<f8",
        "config": params.config.to_dict(),
        "seed": params.seed,
        "num_parameters": params.num_parameters,
        "blob": blob_path.name,
        "tensors": tensors,
    }
    blob_path.write_bytes(params.flat().astype("<f8").tobytes())
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def load_checkpoint(path: str | Path) -> EncoderParams:
    manifest_path = Path(path).with_suffix(".json")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{manifest_path}: not an encoder checkpoint")
    config = EncoderConfig.from_dict(manifest["config"])
    blob = (manifest_path.parent / manifest["blob"]).read_bytes()
    arrays = {}
    for t in manifest["tensors"]:
        data = np.frombuffer(blob, dtype="<f8", count=t["count"], offset=t["offset"])
        arrays[t["name"]] = data.astype(np.float64).reshape(t["shape"])
    return EncoderParams(config, arrays, manifest.get("seed"))
