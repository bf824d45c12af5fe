"""Trainable hashing pipeline: MLP -> latent layer -> batch norm -> L2 norm.

Everything runs in float64. Forward passes return a cache that ``backward``
consumes; gradients are derived by hand, including the batch-statistics
terms of batch normalization and the Jacobian of L2 normalization.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .hamming import PackedCode, pack_codes, sign_binarize


class BatchMode(str, Enum):
    TRAIN = "train"
    INFER = "infer"


@dataclass
class EncoderParams:
    mlp_layers: list  # [(weight (out, in), bias (out,)), ...], each followed by ReLU
    latent_weight: np.ndarray  # (K, q), no bias
    bn_gamma: np.ndarray
    bn_beta: np.ndarray
    bn_running_mean: np.ndarray
    bn_running_var: np.ndarray
    bn_momentum: float = 0.1
    bn_epsilon: float = 1e-5
    batch_norm: bool = True
    l2_normalize: bool = True

    def __post_init__(self):
        dim = None
        for w, b in self.mlp_layers:
            if dim is not None and w.shape[1] != dim:
                raise ValueError("MLP layer shapes do not chain")
            if b.shape != (w.shape[0],):
                raise ValueError("MLP bias shape does not match its weight")
            dim = w.shape[0]
        if dim is not None and self.latent_weight.shape[1] != dim:
            raise ValueError("latent layer input does not match last MLP layer")
        k = self.bits
        for name in ("bn_gamma", "bn_beta", "bn_running_mean", "bn_running_var"):
            if getattr(self, name).shape != (k,):
                raise ValueError(f"{name} must have shape ({k},)")
        if np.any(self.bn_running_var < 0):
            raise ValueError("running variance must be non-negative")
        if not 0 < self.bn_momentum <= 1:
            raise ValueError("bn_momentum must lie in (0, 1]")

    @property
    def input_dim(self) -> int:
        if self.mlp_layers:
            return self.mlp_layers[0][0].shape[1]
        return self.latent_weight.shape[1]

    @property
    def hidden(self) -> list[int]:
        return [w.shape[0] for w, _ in self.mlp_layers]

    @property
    def bits(self) -> int:
        return self.latent_weight.shape[0]

    def named_arrays(self) -> dict[str, np.ndarray]:
        """Trainable arrays by name. The arrays are shared, not copied."""
        out = {}
        for i, (w, b) in enumerate(self.mlp_layers):
            out[f"mlp.{i}.weight"] = w
            out[f"mlp.{i}.bias"] = b
        out["latent.weight"] = self.latent_weight
        if self.batch_norm:
            out["bn.gamma"] = self.bn_gamma
            out["bn.beta"] = self.bn_beta
        return out

    def copy(self) -> "EncoderParams":
        return copy.deepcopy(self)


def _uniform_fan_in(rng, fan_out, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_encoder(input_dim: int, bits: int, hidden=(), seed: int = 0, *, batch_norm: bool = True,
                 l2_normalize: bool = True, bn_momentum: float = 0.1,
                 bn_epsilon: float = 1e-5) -> EncoderParams:
    """Kaiming-style uniform initialisation from a seeded generator."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0,))))
    layers = []
    dim = input_dim
    for width in hidden:
        layers.append((_uniform_fan_in(rng, width, dim), np.zeros(width)))
        dim = width
    return EncoderParams(
        mlp_layers=layers,
        latent_weight=_uniform_fan_in(rng, bits, dim),
        bn_gamma=np.ones(bits),
        bn_beta=np.zeros(bits),
        bn_running_mean=np.zeros(bits),
        bn_running_var=np.ones(bits),
        bn_momentum=bn_momentum,
        bn_epsilon=bn_epsilon,
        batch_norm=batch_norm,
        l2_normalize=l2_normalize,
    )


def _features(params: EncoderParams, x: np.ndarray, cache: dict | None = None) -> np.ndarray:
    h = x
    for i, (w, b) in enumerate(params.mlp_layers):
        if cache is not None:
            cache[f"mlp.{i}.in"] = h
        z = h @ w.T + b
        h = np.maximum(z, 0.0)
        if cache is not None:
            cache[f"mlp.{i}.mask"] = z > 0
    return h


def pre_bn(params: EncoderParams, x) -> np.ndarray:
    """Latent-layer activations (before batch norm) for a batch."""
    x = _as_batch(params, x)
    return _features(params, x) @ params.latent_weight.T


def _as_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(f"expected a (N, {params.input_dim}) batch, got shape {x.shape}")
    if x.shape[0] < 1:
        raise ValueError("empty batch")
    return x


def forward(params: EncoderParams, batch, mode: BatchMode = BatchMode.INFER):
    """Run the pipeline; returns ``(codes, cache)``.

    In train mode batch norm normalizes with the batch mean and biased
    variance and folds the batch mean and unbiased variance into the running
    statistics. Infer mode uses the running statistics and leaves them alone.
    """
    mode = BatchMode(mode)
    x = _as_batch(params, batch)
    n = x.shape[0]
    if mode is BatchMode.TRAIN and n < 2:
        raise ValueError("train mode needs at least two samples per batch")

    cache = {"params": params, "mode": mode, "input": x}
    f = _features(params, x, cache)
    cache["latent.in"] = f
    h = f @ params.latent_weight.T

    if params.batch_norm:
        if mode is BatchMode.TRAIN:
            mean = h.mean(axis=0)
            var = h.var(axis=0)
            m = params.bn_momentum
            params.bn_running_mean[:] = (1 - m) * params.bn_running_mean + m * mean
            params.bn_running_var[:] = (1 - m) * params.bn_running_var + m * var * n / (n - 1)
        else:
            mean, var = params.bn_running_mean, params.bn_running_var
        inv_std = 1.0 / np.sqrt(var + params.bn_epsilon)
        xhat = (h - mean) * inv_std
        y = params.bn_gamma * xhat + params.bn_beta
        cache["bn.xhat"] = xhat
        cache["bn.inv_std"] = inv_std
    else:
        y = h

    if params.l2_normalize:
        norms = np.linalg.norm(y, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("cannot L2-normalize a zero code vector")
        codes = y / norms
        cache["l2.norm"] = norms
    else:
        codes = y
    cache["codes"] = codes
    return codes, cache


def backward(cache: dict, grad_codes):
    """Gradients of the forward chain; returns ``(param_grads, grad_input)``.

    ``param_grads`` is keyed like :meth:`EncoderParams.named_arrays`.
    """
    if cache.get("mode") is not BatchMode.TRAIN:
        raise ValueError("backward needs the cache of a train-mode forward pass")
    params: EncoderParams = cache["params"]
    g = np.asarray(grad_codes, dtype=np.float64)
    if g.shape != cache["codes"].shape:
        raise ValueError(f"gradient shape {g.shape} does not match codes {cache['codes'].shape}")
    grads = {}

    if params.l2_normalize:
        u = cache["codes"]
        norms = np.maximum(cache["l2.norm"], 1e-12)
        g = (g - u * np.sum(u * g, axis=1, keepdims=True)) / norms

    if params.batch_norm:
        xhat, inv_std = cache["bn.xhat"], cache["bn.inv_std"]
        n = g.shape[0]
        grads["bn.gamma"] = np.sum(g * xhat, axis=0)
        grads["bn.beta"] = np.sum(g, axis=0)
        gx = g * params.bn_gamma
        g = (inv_std / n) * (n * gx - gx.sum(axis=0) - xhat * np.sum(gx * xhat, axis=0))

    grads["latent.weight"] = g.T @ cache["latent.in"]
    g = g @ params.latent_weight

    for i in reversed(range(len(params.mlp_layers))):
        w, _ = params.mlp_layers[i]
        g = g * cache[f"mlp.{i}.mask"]
        grads[f"mlp.{i}.weight"] = g.T @ cache[f"mlp.{i}.in"]
        grads[f"mlp.{i}.bias"] = g.sum(axis=0)
        g = g @ w
    return grads, g


def recalibrate_bn(params: EncoderParams, database) -> EncoderParams:
    """Copy of ``params`` whose running statistics are the database's own.

    The population variance is used: it is the exact statistic of the
    database rather than an estimate.
    """
    x = _as_batch(params, database)
    if x.shape[0] < 2:
        raise ValueError("recalibration needs at least two database rows")
    h = pre_bn(params, x)
    out = params.copy()
    out.bn_running_mean = h.mean(axis=0)
    out.bn_running_var = h.var(axis=0)
    return out


def encode(params: EncoderParams, batch) -> np.ndarray:
    """Continuous codes in infer mode."""
    return forward(params, batch, BatchMode.INFER)[0]


def encode_words(params: EncoderParams, batch) -> np.ndarray:
    """Packed binary codes as an (N, W) uint64 array."""
    return pack_codes(sign_binarize(encode(params, batch)))


def encode_binary(params: EncoderParams, batch) -> list[PackedCode]:
    bits = params.bits
    return [PackedCode(bits, w) for w in encode_words(params, batch)]
