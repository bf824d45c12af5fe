"""Deterministic mini-batch training with Adam, plus a toy dataset generator."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import encoder as enc
from .codebook import Codebook
from .encoder import BatchMode, EncoderParams
from .loss import LossConfig, linear_head_loss, loss_and_grad, smooth_labels

HEADS = ("orthogonal", "linear")


@dataclass
class LabeledDataset:
    descriptors: np.ndarray
    labels: list  # one sorted tuple of class indices per row
    classes: int

    def __post_init__(self):
        self.descriptors = np.asarray(self.descriptors, dtype=np.float64)
        self.labels = [tuple(sorted(set(int(i) for i in s))) for s in self.labels]
        if self.descriptors.ndim != 2 or len(self.labels) != self.descriptors.shape[0]:
            raise ValueError("descriptors and labels disagree in length")
        for s in self.labels:
            if not s or s[0] < 0 or s[-1] >= self.classes:
                raise ValueError(f"invalid label set {s} for {self.classes} classes")

    def __len__(self):
        return self.descriptors.shape[0]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(self.descriptors[idx], [self.labels[i] for i in idx], self.classes)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    loss: LossConfig = field(default_factory=lambda: LossConfig(0.2, "cosine"))
    hidden: list = field(default_factory=list)
    batch_norm: bool = True
    head: str = "orthogonal"
    bn_momentum: float = 0.1
    bn_epsilon: float = 1e-5

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 for batch norm")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss"] = self.loss.to_dict()
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "loss" in d:
            d["loss"] = LossConfig.from_dict(d["loss"])
        return cls(**d)


@dataclass
class TrainHistory:
    loss: list = field(default_factory=list)
    bit_balance: list = field(default_factory=list)  # mean |per-bit sign mean| per epoch
    seconds: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, applied in place to ``params``."""
    if set(params) != set(grads):
        raise ValueError("params and grads have different keys")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


def make_gaussian_clusters(classes: int, dim: int, per_class: int, spread: float = 1.0,
                           separation: float = 12.0, seed: int = 0,
                           multilabel: bool = False) -> LabeledDataset:
    """Isotropic Gaussian blobs around centres on a sphere of radius ``separation``.

    Rows are grouped by class. With ``multilabel`` each point is labelled with
    the two centres nearest to it.
    """
    if classes < 2 or dim < 1 or per_class < 1 or spread <= 0 or separation < 0:
        raise ValueError("invalid toy dataset parameters")
    rng = np.random.Generator(np.random.PCG64(seed))
    centers = rng.standard_normal((classes, dim))
    centers *= separation / np.linalg.norm(centers, axis=1, keepdims=True)
    owner = np.repeat(np.arange(classes), per_class)
    x = centers[owner] + spread * rng.standard_normal((classes * per_class, dim))
    if multilabel:
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :2]
        labels = [tuple(r) for r in nearest]
    else:
        labels = [(int(c),) for c in owner]
    return LabeledDataset(x, labels, classes)


def split_queries(data: LabeledDataset, fraction: float = 0.1, seed: int = 0):
    """Hold out ``fraction`` of each class (by first label) as queries.

    Returns ``(database, queries)``; both keep the original row order.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    first = np.array([s[0] for s in data.labels])
    held = np.zeros(len(data), dtype=bool)
    for c in range(data.classes):
        idx = np.flatnonzero(first == c)
        take = int(round(fraction * idx.size))
        held[rng.permutation(idx)[:take]] = True
    return data.subset(np.flatnonzero(~held)), data.subset(np.flatnonzero(held))


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1, epoch))))


def _head_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(2,))))


def init_params(cfg: TrainConfig, input_dim: int, bits: int) -> EncoderParams:
    return enc.init_encoder(input_dim, bits, cfg.hidden, cfg.seed, batch_norm=cfg.batch_norm,
                            l2_normalize=cfg.head == "orthogonal", bn_momentum=cfg.bn_momentum,
                            bn_epsilon=cfg.bn_epsilon)


def train(cfg: TrainConfig, data: LabeledDataset, cb: Codebook, log=None):
    """Train an encoder end to end; returns ``(params, history)``.

    With ``head="orthogonal"`` the codebook rows are the fixed classifier.
    ``head="linear"`` trains a plain softmax classifier on the raw codes
    instead (codebook used only for its bit count); that head is discarded
    after training since encoding never needs it.
    """
    if cb.classes != data.classes:
        raise ValueError(f"codebook has {cb.classes} classes, dataset has {data.classes}")
    n, d = data.descriptors.shape
    if n < 2:
        raise ValueError("need at least two training samples")
    params = init_params(cfg, d, cb.bits)
    targets = smooth_labels(data.labels, data.classes)
    loss_cfg = cfg.loss.for_codebook(cb)

    trainable = params.named_arrays()
    if cfg.head == "linear":
        rng = _head_rng(cfg.seed)
        bound = np.sqrt(1.0 / cb.bits)
        trainable["head.weight"] = rng.uniform(-bound, bound, size=(data.classes, cb.bits))
        trainable["head.bias"] = np.zeros(data.classes)

    state = AdamState()
    history = TrainHistory()
    bs = min(cfg.batch_size, n)
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        order = _epoch_rng(cfg.seed, epoch).permutation(n)
        losses, weights, sign_sum, seen = [], [], np.zeros(cb.bits), 0
        for lo in range(0, n, bs):
            idx = order[lo:lo + bs]
            if idx.size < 2:
                continue
            x, y = data.descriptors[idx], targets[idx]
            codes, cache = enc.forward(params, x, BatchMode.TRAIN)
            if cfg.head == "orthogonal":
                loss, g_codes = loss_and_grad(codes, cb, y, loss_cfg)
                grads, _ = enc.backward(cache, g_codes)
            else:
                loss, g_codes, g_w, g_b = linear_head_loss(
                    codes, trainable["head.weight"], trainable["head.bias"], y)
                grads, _ = enc.backward(cache, g_codes)
                grads["head.weight"], grads["head.bias"] = g_w, g_b
            adam_step(trainable, grads, state, cfg.learning_rate, cfg.adam_beta1,
                      cfg.adam_beta2, cfg.adam_epsilon)
            losses.append(loss)
            weights.append(idx.size)
            sign_sum += np.where(codes >= 0, 1.0, -1.0).sum(axis=0)
            seen += idx.size
        for name, arr in trainable.items():
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"parameter {name} became non-finite in epoch {epoch}")
        history.loss.append(float(np.average(losses, weights=weights)))
        history.bit_balance.append(float(np.mean(np.abs(sign_sum / seen))))
        history.seconds.append(time.perf_counter() - start)
        if log is not None:
            log(f"epoch {epoch + 1}/{cfg.epochs} loss {history.loss[-1]:.6f} "
                f"balance {history.bit_balance[-1]:.4f}")
    return params, history


def evaluate_loss(params: EncoderParams, data: LabeledDataset, cb: Codebook,
                  cfg: LossConfig = LossConfig()) -> float:
    """Loss of the orthogonal objective on a dataset in infer mode."""
    codes = enc.encode(params, data.descriptors)
    return loss_and_grad(codes, cb, smooth_labels(data.labels, data.classes), cfg)[0]
