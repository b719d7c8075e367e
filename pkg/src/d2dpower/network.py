"""Feed-forward network: Xavier-initialized dense layers, batch
normalization, sigmoid activations, and a final rescale to dBm.

Every layer, including the output layer, applies
    A = X @ W, normalize(A), H = S * A_hat + Z, Y = sigmoid(H)
and the last layer's Y in (0, 1) maps affinely onto
[out_min_dbm, out_max_dbm]. In train mode normalization uses the batch
mean/variance per feature (and refreshes the running statistics); in
infer mode it uses the running statistics, which makes every row
independent of the rest so a single device can run its own forward pass.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    CheckpointFormatError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    ConfigurationError,
    NumericError,
    ShapeError,
)

# Final sigmoid outputs are clipped into [_CLIP, 1 - _CLIP] before
# rescaling: a saturated sigmoid rounds to exactly 1.0 in float64, which
# would emit the closed-interval endpoint instead of a power strictly
# inside the output range.
_CLIP = 1e-12

_MAGIC = b"D2DPWNET"
_FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIIIIddd")


@dataclass(frozen=True)
class NetworkConfig:
    width: int
    depth: int
    output_size: int
    input_size: int = 4
    bn_epsilon: float = 1e-5
    out_min_dbm: float = -150.0
    out_max_dbm: float = 20.0

    def __post_init__(self):
        if self.width < 1:
            raise ConfigurationError(f"width must be >= 1, got {self.width}")
        if self.depth < 1:
            raise ConfigurationError(f"depth must be >= 1, got {self.depth}")
        if self.output_size < 1:
            raise ConfigurationError(f"output_size must be >= 1, got {self.output_size}")
        if self.input_size < 1:
            raise ConfigurationError(f"input_size must be >= 1, got {self.input_size}")
        if self.bn_epsilon <= 0:
            raise ConfigurationError(f"bn_epsilon must be positive, got {self.bn_epsilon}")
        if not self.out_min_dbm < self.out_max_dbm:
            raise ConfigurationError(
                f"out_min_dbm must be < out_max_dbm, got {self.out_min_dbm} and {self.out_max_dbm}"
            )

    def layer_sizes(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per weight matrix: depth hidden layers of the
        configured width plus the output layer."""
        dims = [self.input_size] + [self.width] * self.depth + [self.output_size]
        return list(zip(dims[:-1], dims[1:]))


@dataclass(frozen=True)
class LayerParams:
    """One layer's weight matrix plus batch-norm scale/shift vectors."""

    w: np.ndarray
    s: np.ndarray
    z: np.ndarray


@dataclass(frozen=True)
class NetworkParams:
    layers: tuple[LayerParams, ...]
    config: NetworkConfig


@dataclass(frozen=True)
class Gradients:
    """Cost derivatives, mirroring NetworkParams layer by layer."""

    layers: tuple[LayerParams, ...]


@dataclass
class BatchNormStats:
    """Exponential running mean/variance per layer, for infer mode."""

    mean: list[np.ndarray]
    var: list[np.ndarray]
    momentum: float = 0.99

    def copy(self) -> "BatchNormStats":
        return BatchNormStats(
            [m.copy() for m in self.mean], [v.copy() for v in self.var], self.momentum
        )


def xavier_init(fan_in: int, fan_out: int, rng) -> np.ndarray:
    """Uniform(-r, r) weights with r = sqrt(6 / (fan_in + fan_out))."""
    if fan_in < 1 or fan_out < 1:
        raise ConfigurationError("fan_in and fan_out must be >= 1")
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, (fan_in, fan_out))


def init_params(config: NetworkConfig, rng) -> NetworkParams:
    layers = []
    for fan_in, fan_out in config.layer_sizes():
        layers.append(
            LayerParams(
                w=xavier_init(fan_in, fan_out, rng),
                s=np.ones(fan_out),
                z=np.zeros(fan_out),
            )
        )
    return NetworkParams(tuple(layers), config)


def init_stats(config: NetworkConfig, momentum: float = 0.99) -> BatchNormStats:
    if not 0.0 < momentum < 1.0:
        raise ConfigurationError(f"momentum must be in (0, 1), got {momentum}")
    sizes = [fan_out for _, fan_out in config.layer_sizes()]
    return BatchNormStats(
        mean=[np.zeros(n) for n in sizes],
        var=[np.ones(n) for n in sizes],
        momentum=momentum,
    )


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class _LayerCache:
    x_in: np.ndarray
    a_hat: np.ndarray
    inv_std: np.ndarray
    y: np.ndarray
    clip_mask: np.ndarray | None = None


def forward(
    params: NetworkParams,
    x: np.ndarray,
    mode: str = "train",
    stats: BatchNormStats | None = None,
    update_stats: bool = True,
):
    """Map coordinate rows [B, input_size] to powers [B, output_size] dBm.

    Returns (p_dbm, cache); the cache holds the intermediates backward()
    needs and is only built in train mode (None in infer mode). Train
    mode requires B >= 2 (per-feature variance over the batch) and, when
    stats is given and update_stats is True, refreshes the running
    statistics in place.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    cfg = params.config
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != cfg.input_size:
        raise ShapeError(f"expected input [B, {cfg.input_size}], got {x.shape}")
    if mode == "train" and x.shape[0] < 2:
        raise ShapeError("train mode needs at least 2 rows for batch statistics")
    if mode == "infer" and stats is None:
        raise ValueError("infer mode requires running statistics")
    if not np.isfinite(x).all():
        raise NumericError("non-finite network input")

    cache = [] if mode == "train" else None
    n_layers = len(params.layers)
    h = x
    out = None
    for idx, layer in enumerate(params.layers):
        a = h @ layer.w
        if not np.isfinite(a).all():
            raise NumericError(f"non-finite pre-activation in layer {idx}", layer=idx)
        if mode == "train":
            mu = a.mean(axis=0)
            var = a.var(axis=0)
            if stats is not None and update_stats:
                m = stats.momentum
                stats.mean[idx] = m * stats.mean[idx] + (1.0 - m) * mu
                stats.var[idx] = m * stats.var[idx] + (1.0 - m) * var
        else:
            mu = stats.mean[idx]
            var = stats.var[idx]
        inv_std = 1.0 / np.sqrt(var + cfg.bn_epsilon)
        a_hat = (a - mu) * inv_std
        hpre = layer.s * a_hat + layer.z
        if not np.isfinite(hpre).all():
            raise NumericError(f"non-finite activation in layer {idx}", layer=idx)
        y = _sigmoid(hpre)
        clip_mask = None
        if idx == n_layers - 1:
            y_clipped = np.clip(y, _CLIP, 1.0 - _CLIP)
            clip_mask = (y > _CLIP) & (y < 1.0 - _CLIP)
            out = y_clipped * (cfg.out_max_dbm - cfg.out_min_dbm) + cfg.out_min_dbm
        if cache is not None:
            cache.append(_LayerCache(h, a_hat, inv_std, y, clip_mask))
        h = y
    return out, cache


def backward(params: NetworkParams, cache, d_out: np.ndarray) -> Gradients:
    """Reverse-mode derivative of a scalar cost through a train-mode
    forward pass, given d(cost)/d(p_dbm).

    Backpropagates through the output rescale, sigmoids, the learned
    scale/shift, the batch statistics themselves (mean and variance are
    functions of the batch), and the weight products.
    """
    cfg = params.config
    scale = cfg.out_max_dbm - cfg.out_min_dbm
    d_out = np.asarray(d_out, dtype=float)
    grads: list[LayerParams] = []
    d_y = None
    for idx in reversed(range(len(params.layers))):
        layer = params.layers[idx]
        c = cache[idx]
        if idx == len(params.layers) - 1:
            d_y = d_out * scale * c.clip_mask
        d_h = d_y * c.y * (1.0 - c.y)
        d_s = (d_h * c.a_hat).sum(axis=0)
        d_z = d_h.sum(axis=0)
        d_ahat = d_h * layer.s
        d_a = c.inv_std * (
            d_ahat
            - d_ahat.mean(axis=0)
            - c.a_hat * (d_ahat * c.a_hat).mean(axis=0)
        )
        d_w = c.x_in.T @ d_a
        d_y = d_a @ layer.w.T
        grads.append(LayerParams(d_w, d_s, d_z))
    grads.reverse()
    return Gradients(tuple(grads))


def save_checkpoint(params: NetworkParams, stats: BatchNormStats, path) -> None:
    """Write parameters and running statistics to a binary checkpoint.

    Layout: fixed header (magic, format version, depth, width,
    input_size, output_size, bn_epsilon, out range), then per layer the
    arrays W, S, Z, running mean, running variance as little-endian
    float64, row-major.
    """
    cfg = params.config
    header = _HEADER.pack(
        _MAGIC,
        _FORMAT_VERSION,
        cfg.depth,
        cfg.width,
        cfg.input_size,
        cfg.output_size,
        cfg.bn_epsilon,
        cfg.out_min_dbm,
        cfg.out_max_dbm,
    )
    with open(path, "wb") as f:
        f.write(header)
        for idx, layer in enumerate(params.layers):
            for arr in (layer.w, layer.s, layer.z, stats.mean[idx], stats.var[idx]):
                f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointTruncatedError(
            f"checkpoint ended while reading {what} ({len(data)}/{n} bytes)"
        )
    return data


def load_checkpoint(path, expect_config: NetworkConfig | None = None):
    """Read a checkpoint back into (NetworkParams, BatchNormStats).

    If expect_config is given, its structural fields must match the
    stored header. Running-statistics momentum is not persisted and comes
    back at the default.
    """
    with open(path, "rb") as f:
        raw = f.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise CheckpointTruncatedError("checkpoint shorter than its header")
        magic, version, depth, width, input_size, output_size, bn_eps, out_min, out_max = (
            _HEADER.unpack(raw)
        )
        if magic != _MAGIC:
            raise CheckpointFormatError(f"bad magic bytes {magic!r}")
        if version != _FORMAT_VERSION:
            raise CheckpointVersionError(
                f"unsupported checkpoint version {version} (expected {_FORMAT_VERSION})"
            )
        config = NetworkConfig(
            width=width,
            depth=depth,
            output_size=output_size,
            input_size=input_size,
            bn_epsilon=bn_eps,
            out_min_dbm=out_min,
            out_max_dbm=out_max,
        )
        if expect_config is not None:
            expected = (
                expect_config.width,
                expect_config.depth,
                expect_config.input_size,
                expect_config.output_size,
            )
            stored = (width, depth, input_size, output_size)
            if expected != stored:
                raise CheckpointShapeError(
                    f"checkpoint layout (width, depth, in, out)={stored} does not "
                    f"match expected {expected}"
                )
        layers = []
        means = []
        variances = []
        for idx, (fan_in, fan_out) in enumerate(config.layer_sizes()):
            w = np.frombuffer(
                _read_exact(f, 8 * fan_in * fan_out, f"layer {idx} weights"), "<f8"
            ).reshape(fan_in, fan_out)
            vecs = []
            for what in ("scale", "shift", "running mean", "running variance"):
                vecs.append(
                    np.frombuffer(
                        _read_exact(f, 8 * fan_out, f"layer {idx} {what}"), "<f8"
                    )
                )
            layers.append(LayerParams(w.copy(), vecs[0].copy(), vecs[1].copy()))
            means.append(vecs[2].copy())
            variances.append(vecs[3].copy())
        if f.read(1) != b"":
            raise CheckpointFormatError("unexpected trailing data after parameters")
    params = NetworkParams(tuple(layers), config)
    stats = BatchNormStats(means, variances)
    return params, stats
