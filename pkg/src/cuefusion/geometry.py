"""Box geometry and the pairwise costs that need no Kalman state.

Every distance here lives in a tracks x detections matrix whose rows are
tracks and whose columns are detections. Forbidden entries are marked with
:data:`FORBIDDEN` (positive infinity); the assignment solver never matches
through them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

FORBIDDEN = math.inf


class InvalidEmbeddingError(ValueError):
    """Raised when an embedding has zero norm or a mismatched dimension."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in corner form, pixels."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box coordinates {vals}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(f"box corners out of order {vals}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @classmethod
    def from_tlwh(cls, x: float, y: float, w: float, h: float) -> "BBox":
        return cls(x, y, x + w, y + h)

    @classmethod
    def from_xywh(cls, xc: float, yc: float, w: float, h: float) -> "BBox":
        """Build from center, width and height."""
        return cls(xc - w / 2.0, yc - h / 2.0, xc + w / 2.0, yc + h / 2.0)

    def to_tlwh(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.width, self.height)

    def to_xywh(self) -> tuple[float, float, float, float]:
        return (
            self.x1 + self.width / 2.0,
            self.y1 + self.height / 2.0,
            self.width,
            self.height,
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=float)


def tlwh_to_corners(tlwh):
    tlwh = np.asarray(tlwh, dtype=float)
    out = tlwh.copy()
    out[..., 2:] += tlwh[..., :2]
    return out


def corners_to_tlwh(boxes):
    boxes = np.asarray(boxes, dtype=float)
    out = boxes.copy()
    out[..., 2:] -= boxes[..., :2]
    return out


def xywh_to_corners(xywh):
    xywh = np.asarray(xywh, dtype=float)
    half = xywh[..., 2:4] / 2.0
    return np.concatenate([xywh[..., :2] - half, xywh[..., :2] + half], axis=-1)


def corners_to_xywh(boxes):
    boxes = np.asarray(boxes, dtype=float)
    wh = boxes[..., 2:4] - boxes[..., :2]
    return np.concatenate([boxes[..., :2] + wh / 2.0, wh], axis=-1)


# --- scalar costs -----------------------------------------------------------


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def hiou(a: BBox, b: BBox) -> float:
    """Overlap of the two vertical extents over their joint extent.

    Disjoint extents clamp to 0 instead of going negative.
    """
    num = min(a.y2, b.y2) - max(a.y1, b.y1)
    den = max(a.y2, b.y2) - min(a.y1, b.y1)
    if den <= 0.0:
        return 0.0
    return max(num, 0.0) / den


def iou_distance(a: BBox, b: BBox) -> float:
    return 1.0 - iou(a, b)


def hiou_distance(a: BBox, b: BBox) -> float:
    return 1.0 - hiou(a, b)


def confidence_distance(c_trk: float, c_det: float) -> float:
    # tracklet estimates may have drifted outside [0, 1] in the filter
    c_trk = min(max(c_trk, 0.0), 1.0)
    return abs(c_trk - c_det)


def cosine_distance(e, f) -> float:
    e = np.asarray(e, dtype=float)
    f = np.asarray(f, dtype=float)
    if e.shape != f.shape:
        raise InvalidEmbeddingError(f"dimension mismatch {e.shape} vs {f.shape}")
    ne = float(np.linalg.norm(e))
    nf = float(np.linalg.norm(f))
    if ne == 0.0 or nf == 0.0:
        raise InvalidEmbeddingError("zero-norm embedding")
    return 1.0 - float(np.dot(e, f)) / (ne * nf)


# --- matrix costs -----------------------------------------------------------


def _as_boxes(boxes) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        arr = boxes.astype(float, copy=False)
    else:
        boxes = list(boxes)
        if boxes and isinstance(boxes[0], BBox):
            arr = np.array([b.as_array() for b in boxes], dtype=float)
        else:
            arr = np.asarray(boxes, dtype=float)
    return arr.reshape(-1, 4)


def iou_matrix(a, b) -> np.ndarray:
    a = _as_boxes(a)
    b = _as_boxes(b)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.maximum(iw, 0.0) * np.maximum(ih, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def hiou_matrix(a, b) -> np.ndarray:
    a = _as_boxes(a)
    b = _as_boxes(b)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    num = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    den = np.maximum(a[:, None, 3], b[None, :, 3]) - np.minimum(a[:, None, 1], b[None, :, 1])
    out = np.zeros_like(num)
    np.divide(np.maximum(num, 0.0), den, out=out, where=den > 0.0)
    return out


def iou_distance_matrix(a, b) -> np.ndarray:
    return 1.0 - iou_matrix(a, b)


def hiou_distance_matrix(a, b) -> np.ndarray:
    return 1.0 - hiou_matrix(a, b)


def confidence_distance_matrix(c_trk, c_det) -> np.ndarray:
    c_trk = np.clip(np.asarray(c_trk, dtype=float).reshape(-1), 0.0, 1.0)
    c_det = np.asarray(c_det, dtype=float).reshape(-1)
    return np.abs(c_trk[:, None] - c_det[None, :])


def cosine_distance_matrix(e, f) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    f = np.asarray(f, dtype=float)
    if e.size == 0 or f.size == 0:
        return np.zeros((len(e), len(f)))
    if e.ndim != 2 or f.ndim != 2 or e.shape[1] != f.shape[1]:
        raise InvalidEmbeddingError(f"dimension mismatch {e.shape} vs {f.shape}")
    ne = np.linalg.norm(e, axis=1)
    nf = np.linalg.norm(f, axis=1)
    if np.any(ne == 0.0) or np.any(nf == 0.0):
        raise InvalidEmbeddingError("zero-norm embedding")
    return 1.0 - (e @ f.T) / (ne[:, None] * nf[None, :])


def build_cost_matrix(kind: str, tracks, dets) -> np.ndarray:
    """Pairwise distance matrix of one cue.

    ``tracks`` and ``dets`` are boxes for ``iou``/``hiou``, confidences for
    ``conf`` and embedding rows for ``cos``.
    """
    if kind == "iou":
        return iou_distance_matrix(tracks, dets)
    if kind == "hiou":
        return hiou_distance_matrix(tracks, dets)
    if kind == "conf":
        return confidence_distance_matrix(tracks, dets)
    if kind == "cos":
        return cosine_distance_matrix(tracks, dets)
    raise ValueError(f"unknown cost kind {kind!r}")


def boxes_array(boxes: Sequence[BBox]) -> np.ndarray:
    return _as_boxes(boxes)
