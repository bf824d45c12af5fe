"""Scaled-cosine cross-entropy against a fixed binary codebook.

With unit-norm codes v and +-1 targets o_i (so ||o_i|| = sqrt(K)), the logit
<o_i, v> is sqrt(K) * cos(theta_i). Positive classes can be penalised with a
cosine margin, s * (cos(theta) - m), or an angular margin, s * cos(theta + m).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .codebook import Codebook

MARGIN_KINDS = ("none", "cosine", "angular")
UNIT_NORM_TOL = 1e-6
ANGULAR_CLAMP = 1e-7


@dataclass(frozen=True)
class LossConfig:
    margin: float = 0.0
    margin_kind: str = "none"
    scale: Optional[float] = None  # filled in from the codebook as sqrt(K)

    def __post_init__(self):
        if self.margin_kind not in MARGIN_KINDS:
            raise ValueError(f"margin_kind must be one of {MARGIN_KINDS}")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.margin_kind == "angular" and self.margin >= np.pi:
            raise ValueError("angular margin must be below pi")

    def for_codebook(self, cb: Codebook) -> "LossConfig":
        s = float(np.sqrt(cb.bits))
        if self.scale is not None and abs(self.scale - s) > 1e-12:
            raise ValueError(f"scale must be sqrt(K) = {s}, got {self.scale}")
        return LossConfig(self.margin, self.margin_kind, s)

    def to_dict(self) -> dict:
        return {"margin": self.margin, "margin_kind": self.margin_kind}

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        return cls(float(d.get("margin", 0.0)), str(d.get("margin_kind", "none")))


def logits(codes, cb: Codebook) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.float64)
    if codes.ndim != 2 or codes.shape[1] != cb.bits:
        raise ValueError(f"codes must be (N, {cb.bits}), got {codes.shape}")
    norms = np.linalg.norm(codes, axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
        raise ValueError("codes must have unit L2 norm")
    return codes @ cb.rows.T.astype(np.float64)


def smooth_labels(label_sets, classes: int) -> np.ndarray:
    """Soft targets with equal mass 1/|set| on each assigned class."""
    out = np.zeros((len(label_sets), classes))
    for n, labels in enumerate(label_sets):
        labels = sorted(set(int(i) for i in labels))
        if not labels:
            raise ValueError(f"sample {n} has an empty label set")
        if labels[0] < 0 or labels[-1] >= classes:
            raise ValueError(f"sample {n} has a class index outside [0, {classes})")
        out[n, labels] = 1.0 / len(labels)
    return out


def one_hot(labels, classes: int) -> np.ndarray:
    return smooth_labels([[i] for i in labels], classes)


def _margin_terms(logit_values, targets, cfg: LossConfig):
    """Margined logits and d(margined)/d(logit), element-wise."""
    z = np.asarray(logit_values, dtype=np.float64)
    out = z.copy()
    deriv = np.ones_like(z)
    if cfg.margin_kind == "none" or cfg.margin == 0.0:
        return out, deriv
    if cfg.scale is None:
        raise ValueError("LossConfig.scale is unset; use cfg.for_codebook(cb)")
    s, m = cfg.scale, cfg.margin
    pos = np.asarray(targets) > 0
    if cfg.margin_kind == "cosine":
        out[pos] = z[pos] - s * m
        return out, deriv
    cos = z[pos] / s
    if np.any(np.abs(cos) > 1.0 + UNIT_NORM_TOL):
        raise ValueError("cosine outside [-1, 1]; logits are not scaled cosines")
    cos = np.clip(cos, -1.0 + ANGULAR_CLAMP, 1.0 - ANGULAR_CLAMP)
    theta = np.arccos(cos)
    out[pos] = s * np.cos(theta + m)
    deriv[pos] = np.sin(theta + m) / np.sin(theta)
    return out, deriv


def apply_margin(logit_values, targets, cfg: LossConfig) -> np.ndarray:
    return _margin_terms(logit_values, targets, cfg)[0]


def _check_targets(targets):
    sums = targets.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-9) or np.any(targets < 0):
        raise ValueError("target rows must be non-negative and sum to 1")


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def ce_loss(margined_logits, targets):
    """Mean soft-target cross-entropy and its gradient w.r.t. the logits."""
    z = np.asarray(margined_logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if z.shape != y.shape:
        raise ValueError(f"logits {z.shape} and targets {y.shape} differ in shape")
    _check_targets(y)
    n = z.shape[0]
    logp = log_softmax(z)
    loss = -np.sum(y * logp) / n
    return float(loss), (np.exp(logp) - y) / n


def loss_and_grad(codes, cb: Codebook, targets, cfg: LossConfig = LossConfig()):
    """Loss and its gradient w.r.t. the unit-norm codes."""
    cfg = cfg.for_codebook(cb)
    targets = np.asarray(targets, dtype=np.float64)
    z = logits(codes, cb)
    if z.shape != targets.shape:
        raise ValueError(f"targets must be {z.shape}, got {targets.shape}")
    zm, dz = _margin_terms(z, targets, cfg)
    loss, g = ce_loss(zm, targets)
    return loss, (g * dz) @ cb.rows.astype(np.float64)


def linear_head_loss(codes, weight, bias, targets):
    """Cross-entropy through a learned linear classifier (the plain CE baseline).

    Returns ``(loss, grad_codes, grad_weight, grad_bias)``.
    """
    codes = np.asarray(codes, dtype=np.float64)
    loss, g = ce_loss(codes @ weight.T + bias, targets)
    return loss, g @ weight, g.T @ codes, g.sum(axis=0)
