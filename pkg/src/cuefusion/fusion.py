"""Fusion of per-cue distance matrices into one association cost.

Four methods are available: ``minimum``, ``weighted-sum``, ``kf-gating`` and
``hadamard``. Cues other than motion are optional; pass ``None`` (or disable
them in :class:`Cues`) to leave them out.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import FORBIDDEN
from .kalman import chi2_gate_threshold


class FusionMethod(str, Enum):
    MINIMUM = "minimum"
    WEIGHTED_SUM = "weighted-sum"
    KF_GATING = "kf-gating"
    HADAMARD = "hadamard"


@dataclass(frozen=True)
class Cues:
    motion: bool = True
    appearance: bool = True
    hiou: bool = True
    confidence: bool = True

    def __post_init__(self):
        if not self.motion:
            raise ValueError("the motion cue cannot be disabled")

    @classmethod
    def parse(cls, text: str) -> "Cues":
        names = {n.strip() for n in text.split(",") if n.strip()}
        aliases = {"mot": "motion", "app": "appearance", "conf": "confidence"}
        names = {aliases.get(n, n) for n in names}
        unknown = names - {"motion", "appearance", "hiou", "confidence"}
        if unknown:
            raise ValueError(f"unknown cues: {sorted(unknown)}")
        if "motion" not in names:
            raise ValueError("the motion cue cannot be disabled")
        return cls(
            motion=True,
            appearance="appearance" in names,
            hiou="hiou" in names,
            confidence="confidence" in names,
        )

    def label(self) -> str:
        parts = ["mot"]
        if self.appearance:
            parts.append("app")
        if self.hiou:
            parts.append("hiou")
        if self.confidence:
            parts.append("confidence")
        return ", ".join(parts)


@dataclass(frozen=True)
class FusionConfig:
    method: FusionMethod = FusionMethod.MINIMUM
    cues: Cues = field(default_factory=Cues)
    theta_iou: float = 0.5
    theta_emb: float = 0.25
    lambda1: float = 1.0
    lambda2: float = 0.1  # 0.2 on dance-style data
    lambda3: float = 0.1
    lambda4: float = 0.1
    lam: float = 0.98
    lambda_h: float = 0.2
    lambda_c: float = 0.2
    gate: float = field(default_factory=chi2_gate_threshold)

    def __post_init__(self):
        object.__setattr__(self, "method", FusionMethod(self.method))
        weights = (self.lambda1, self.lambda2, self.lambda3, self.lambda4,
                   self.lam, self.lambda_h, self.lambda_c)
        if not all(np.isfinite(w) and w >= 0 for w in weights):
            raise ValueError(f"fusion weights must be finite and non-negative: {weights}")


def _check_shapes(*mats):
    shapes = {m.shape for m in mats if m is not None}
    if len(shapes) > 1:
        raise ValueError(f"cost matrix shape mismatch: {sorted(shapes)}")


def gate_appearance(d_cos, d_iou, theta_emb: float = 0.25, theta_iou: float = 0.5) -> np.ndarray:
    d_cos = np.asarray(d_cos, dtype=float)
    d_iou = np.asarray(d_iou, dtype=float)
    _check_shapes(d_cos, d_iou)
    ok = (d_cos < theta_emb) & (d_iou < theta_iou)
    return np.where(ok, 0.5 * d_cos, 1.0)


def gate_weak(d_weak, d_iou, theta_iou: float = 0.5) -> np.ndarray:
    d_weak = np.asarray(d_weak, dtype=float)
    d_iou = np.asarray(d_iou, dtype=float)
    _check_shapes(d_weak, d_iou)
    return np.where(d_iou < theta_iou, d_weak, 1.0)


def _active(cfg: FusionConfig, d_cos, d_hiou, d_conf):
    cues = cfg.cues
    return (
        d_cos if cues.appearance else None,
        d_hiou if cues.hiou else None,
        d_conf if cues.confidence else None,
    )


def _arrays(*mats):
    return [None if m is None else np.asarray(m, dtype=float) for m in mats]


def fuse_minimum(d_iou, d_cos=None, d_hiou=None, d_conf=None,
                 cfg: FusionConfig = FusionConfig()) -> np.ndarray:
    d_iou, d_cos, d_hiou, d_conf = _arrays(d_iou, *_active(cfg, d_cos, d_hiou, d_conf))
    _check_shapes(d_iou, d_cos, d_hiou, d_conf)
    out = d_iou.copy()
    if d_cos is not None:
        out = np.minimum(out, gate_appearance(d_cos, d_iou, cfg.theta_emb, cfg.theta_iou))
    if d_hiou is not None:
        out = np.minimum(out, gate_weak(d_hiou, d_iou, cfg.theta_iou))
    if d_conf is not None:
        out = np.minimum(out, gate_weak(d_conf, d_iou, cfg.theta_iou))
    return out


def fuse_weighted_sum(d_iou, d_cos=None, d_hiou=None, d_conf=None,
                      cfg: FusionConfig = FusionConfig()) -> np.ndarray:
    """Weighted sum of the motion, gated appearance and raw weak costs.

    Only appearance is gated here; the weak cues are not IoU-masked.
    """
    d_iou, d_cos, d_hiou, d_conf = _arrays(d_iou, *_active(cfg, d_cos, d_hiou, d_conf))
    _check_shapes(d_iou, d_cos, d_hiou, d_conf)
    out = cfg.lambda1 * d_iou
    if d_cos is not None:
        out = out + cfg.lambda2 * gate_appearance(d_cos, d_iou, cfg.theta_emb, cfg.theta_iou)
    if d_hiou is not None:
        out = out + cfg.lambda3 * d_hiou
    if d_conf is not None:
        out = out + cfg.lambda4 * d_conf
    return out


def fuse_kf_gating(d_maha, d_cos=None, d_hiou=None, d_conf=None,
                   cfg: FusionConfig = FusionConfig(), gate: float | None = None) -> np.ndarray:
    """Blend of raw cue costs with squared Mahalanobis motion cost.

    Entries whose squared Mahalanobis distance exceeds ``gate`` become
    :data:`FORBIDDEN`. No appearance threshold or 0.5 factor is applied.
    """
    gate = cfg.gate if gate is None else gate
    d_maha, d_cos, d_hiou, d_conf = _arrays(d_maha, *_active(cfg, d_cos, d_hiou, d_conf))
    _check_shapes(d_maha, d_cos, d_hiou, d_conf)
    cue = np.zeros_like(d_maha)
    if d_cos is not None:
        cue = cue + d_cos
    if d_hiou is not None:
        cue = cue + cfg.lambda_h * d_hiou
    if d_conf is not None:
        cue = cue + cfg.lambda_c * d_conf
    out = cfg.lam * cue + (1.0 - cfg.lam) * d_maha
    return np.where(d_maha > gate, FORBIDDEN, out)


def fuse_hadamard(d_iou, d_cos=None, d_hiou=None, d_conf=None,
                  cfg: FusionConfig = FusionConfig()) -> np.ndarray:
    d_iou, d_cos, d_hiou, d_conf = _arrays(d_iou, *_active(cfg, d_cos, d_hiou, d_conf))
    _check_shapes(d_iou, d_cos, d_hiou, d_conf)
    out = d_iou.copy()
    if d_cos is not None:
        out = out * gate_appearance(d_cos, d_iou, cfg.theta_emb, cfg.theta_iou)
    if d_hiou is not None:
        out = out * gate_weak(d_hiou, d_iou, cfg.theta_iou)
    if d_conf is not None:
        out = out * gate_weak(d_conf, d_iou, cfg.theta_iou)
    return out


def fuse(cfg: FusionConfig, *, d_iou=None, d_maha=None, d_cos=None, d_hiou=None,
         d_conf=None) -> np.ndarray:
    """Dispatch on ``cfg.method``. KF gating reads ``d_maha``; the rest read ``d_iou``."""
    if cfg.method is FusionMethod.KF_GATING:
        return fuse_kf_gating(d_maha, d_cos, d_hiou, d_conf, cfg)
    fn = {
        FusionMethod.MINIMUM: fuse_minimum,
        FusionMethod.WEIGHTED_SUM: fuse_weighted_sum,
        FusionMethod.HADAMARD: fuse_hadamard,
    }[cfg.method]
    return fn(d_iou, d_cos, d_hiou, d_conf, cfg)
