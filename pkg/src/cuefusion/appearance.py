"""Per-track appearance embedding smoothing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import InvalidEmbeddingError


@dataclass(frozen=True)
class EmaConfig:
    alpha: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


def init_embedding(f) -> np.ndarray:
    f = np.array(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise InvalidEmbeddingError("non-finite embedding")
    return f


def ema_update(e_prev, f_new, cfg: EmaConfig = EmaConfig()) -> np.ndarray:
    """Exponential moving average ``alpha * e_prev + (1 - alpha) * f_new``.

    The result is not renormalized; cosine distance divides by norms anyway.
    """
    e_prev = np.asarray(e_prev, dtype=float)
    f_new = np.asarray(f_new, dtype=float)
    if e_prev.shape != f_new.shape:
        raise InvalidEmbeddingError(f"dimension mismatch {e_prev.shape} vs {f_new.shape}")
    # written as a step from f_new so that e_prev == f_new is an exact fixed point
    return f_new + cfg.alpha * (e_prev - f_new)
