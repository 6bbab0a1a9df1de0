"""Per-frame tracking pipeline with two-stage cascaded association.

Stage 1 matches every live track against high-score detections with the
configured cue fusion; stage 2 matches what is left against low-score
detections on motion alone. Unmatched tracks go lost and are dropped after
``max_lost`` frames; unmatched high-score detections above ``init_score``
start new tracks.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kalman
from .appearance import EmaConfig, ema_update, init_embedding
from .assignment import solve
from .fusion import FusionConfig, FusionMethod, fuse
from .geometry import (
    FORBIDDEN,
    BBox,
    InvalidEmbeddingError,
    confidence_distance_matrix,
    cosine_distance_matrix,
    hiou_distance_matrix,
    iou_distance_matrix,
)
from .kalman import KFState, NoiseFactors, Preserve

logger = logging.getLogger(__name__)


class TrackStatus(str, Enum):
    ACTIVE = "active"
    LOST = "lost"


class SecondStageMetric(str, Enum):
    IOU = "iou"
    MAHALANOBIS = "mahalanobis"


@dataclass
class Detection:
    bbox: BBox
    score: float
    embedding: Optional[np.ndarray] = None
    frame: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score {self.score} outside [0, 1]")

    def measurement(self) -> np.ndarray:
        return np.array([*self.bbox.to_xywh(), self.score])


@dataclass
class Track:
    id: int
    state: KFState
    embedding: Optional[np.ndarray] = None
    status: TrackStatus = TrackStatus.ACTIVE
    frames_since_update: int = 0
    age: int = 0

    def box(self) -> np.ndarray:
        mean = self.state.mean.copy()
        mean[2:4] = np.maximum(mean[2:4], 0.0)
        return kalman.state_to_box(mean)

    @property
    def confidence(self) -> float:
        return min(max(float(self.state.mean[4]), 0.0), 1.0)


@dataclass(frozen=True)
class TrackerConfig:
    tau_high: float = 0.6
    tau_low: float = 0.1
    init_score: float = 0.7
    max_lost: int = 30
    reject_sim_stage1: float = 0.2
    reject_sim_stage2: float = 0.5
    second_stage_metric: SecondStageMetric = SecondStageMetric.IOU
    fusion: FusionConfig = field(default_factory=FusionConfig)
    noise: NoiseFactors = field(default_factory=NoiseFactors)
    preserve: Preserve = field(default_factory=Preserve)
    preserve_lost_only: bool = False
    stage2_active_only: bool = False
    nsa_enabled: bool = False
    cmc_enabled: bool = True
    ema: EmaConfig = field(default_factory=EmaConfig)

    def __post_init__(self):
        object.__setattr__(self, "second_stage_metric", SecondStageMetric(self.second_stage_metric))
        if not 0.0 <= self.tau_low < self.tau_high <= 1.0:
            raise ValueError(f"need 0 <= tau_low < tau_high <= 1, got {self.tau_low}, {self.tau_high}")
        if self.init_score < self.tau_high:
            raise ValueError("init_score must be at least tau_high")
        if self.max_lost < 0:
            raise ValueError("max_lost must be non-negative")


@dataclass
class FrameOutput:
    frame: int
    records: list[tuple[int, BBox, float]] = field(default_factory=list)


def _boxes(dets: Sequence[Detection]) -> np.ndarray:
    return np.array([d.bbox.as_array() for d in dets], dtype=float).reshape(-1, 4)


def _embeddings(dets: Sequence[Detection]) -> np.ndarray:
    missing = [i for i, d in enumerate(dets) if d.embedding is None]
    if missing:
        raise InvalidEmbeddingError(
            f"appearance cue enabled but detections {missing} have no embedding"
        )
    return np.array([d.embedding for d in dets], dtype=float)


class Tracker:
    """Online multi-object tracker; one instance per sequence."""

    def __init__(self, cfg: TrackerConfig = TrackerConfig()):
        self.cfg = cfg
        self.tracks: list[Track] = []
        self._next_id = 1

    # -- cost construction --------------------------------------------------

    def _maha_matrix(self, tracks: Sequence[Track], dets: Sequence[Detection]) -> np.ndarray:
        if not tracks or not dets:
            return np.zeros((len(tracks), len(dets)))
        z = np.array([d.measurement() for d in dets])
        return np.array([kalman.gating_distance(t.state, z, self.cfg.noise) for t in tracks])

    def _stage1_cost(self, tracks: Sequence[Track], dets: Sequence[Detection]) -> np.ndarray:
        fcfg = self.cfg.fusion
        cues = fcfg.cues
        track_boxes = np.array([t.box() for t in tracks]).reshape(-1, 4)
        det_boxes = _boxes(dets)
        d_iou = d_maha = d_cos = d_hiou = d_conf = None
        if fcfg.method is FusionMethod.KF_GATING:
            d_maha = self._maha_matrix(tracks, dets)
        else:
            d_iou = iou_distance_matrix(track_boxes, det_boxes)
        if cues.appearance:
            d_cos = np.ones((len(tracks), len(dets)))
            if dets:
                det_emb = _embeddings(dets)
                rows = [i for i, t in enumerate(tracks) if t.embedding is not None]
                if rows:
                    track_emb = np.array([tracks[i].embedding for i in rows])
                    d_cos[rows] = cosine_distance_matrix(track_emb, det_emb)
        if cues.hiou:
            d_hiou = hiou_distance_matrix(track_boxes, det_boxes)
        if cues.confidence:
            d_conf = confidence_distance_matrix(
                [t.confidence for t in tracks], [d.score for d in dets]
            )
        return fuse(fcfg, d_iou=d_iou, d_maha=d_maha, d_cos=d_cos, d_hiou=d_hiou, d_conf=d_conf)

    def _stage2_cost(self, tracks: Sequence[Track], dets: Sequence[Detection]):
        if self.cfg.second_stage_metric is SecondStageMetric.MAHALANOBIS:
            gate = self.cfg.fusion.gate
            d = self._maha_matrix(tracks, dets)
            return np.where(d > gate, FORBIDDEN, d), gate
        track_boxes = np.array([t.box() for t in tracks]).reshape(-1, 4)
        return iou_distance_matrix(track_boxes, _boxes(dets)), 1.0 - self.cfg.reject_sim_stage2

    # -- lifecycle ------------------------------------------------------------

    def _predict(self, warp) -> None:
        cfg = self.cfg
        none = Preserve(False, False, False)
        apply_warp = cfg.cmc_enabled and warp is not None
        for t in self.tracks:
            preserve = cfg.preserve
            if cfg.preserve_lost_only and t.status is TrackStatus.ACTIVE:
                preserve = none
            t.state = kalman.predict(t.state, cfg.noise, preserve)
            if apply_warp:
                t.state = kalman.apply_affine(t.state, warp)

    def _update(self, track: Track, det: Detection, with_embedding: bool) -> None:
        track.state = kalman.update(track.state, det.measurement(), self.cfg.noise, nsa=self.cfg.nsa_enabled)
        if with_embedding and det.embedding is not None:
            if track.embedding is None:
                track.embedding = init_embedding(det.embedding)
            else:
                track.embedding = ema_update(track.embedding, det.embedding, self.cfg.ema)
        track.status = TrackStatus.ACTIVE
        track.frames_since_update = 0

    def _spawn(self, det: Detection) -> Track:
        track = Track(
            id=self._next_id,
            state=kalman.initiate(det.measurement(), self.cfg.noise),
            embedding=None if det.embedding is None else init_embedding(det.embedding),
        )
        self._next_id += 1
        return track

    def process_frame(self, dets: Sequence[Detection], warp=None, frame: int = 0) -> FrameOutput:
        cfg = self.cfg
        dets = [d for d in dets if d.score >= cfg.tau_low]
        high = [d for d in dets if d.score >= cfg.tau_high]
        low = [d for d in dets if d.score < cfg.tau_high]

        was_active = {t.id for t in self.tracks if t.status is TrackStatus.ACTIVE}
        self._predict(warp)

        tracks = self.tracks
        matched: set[int] = set()

        # stage 1: all tracks vs high-score detections, fused cues
        reject1 = math.inf if cfg.fusion.method is FusionMethod.KF_GATING else 1.0 - cfg.reject_sim_stage1
        if tracks and high:
            res1 = solve(self._stage1_cost(tracks, high), reject1)
            for i, j in res1.matches:
                self._update(tracks[i], high[j], with_embedding=True)
                matched.add(i)
            unmatched_high = [high[j] for j in res1.unmatched_cols]
        else:
            if high and cfg.fusion.cues.appearance:
                _embeddings(high)
            unmatched_high = list(high)

        # stage 2: leftovers vs low-score detections, motion only
        remaining = [i for i in range(len(tracks)) if i not in matched]
        if cfg.stage2_active_only:
            remaining = [i for i in remaining if tracks[i].id in was_active]
        if remaining and low:
            pool = [tracks[i] for i in remaining]
            cost, reject2 = self._stage2_cost(pool, low)
            res2 = solve(cost, reject2)
            for r, j in res2.matches:
                self._update(pool[r], low[j], with_embedding=False)
                matched.add(remaining[r])

        survivors = []
        for i, t in enumerate(tracks):
            t.age += 1
            if i not in matched:
                t.status = TrackStatus.LOST
                t.frames_since_update += 1
                if t.frames_since_update > cfg.max_lost:
                    continue
            survivors.append(t)
        for d in unmatched_high:
            if d.score >= cfg.init_score:
                survivors.append(self._spawn(d))
        self.tracks = survivors

        out = FrameOutput(frame)
        for t in self.tracks:
            if t.status is TrackStatus.ACTIVE:
                x1, y1, x2, y2 = (float(v) for v in t.box())
                out.records.append((t.id, BBox(x1, y1, x2, y2), t.confidence))
        return out


def run_sequence(
    detections: Mapping[int, Sequence[Detection]],
    cfg: TrackerConfig = TrackerConfig(),
    warps: Optional[Mapping[int, np.ndarray]] = None,
    num_frames: Optional[int] = None,
) -> list[FrameOutput]:
    """Track a whole sequence of 0-based frames; missing frames count as empty."""
    warps = warps or {}
    last = max([*detections.keys(), *warps.keys()], default=-1)
    if num_frames is None:
        num_frames = last + 1
    tracker = Tracker(cfg)
    outputs = []
    for frame in range(num_frames):
        outputs.append(tracker.process_frame(detections.get(frame, ()), warps.get(frame), frame))
    logger.debug("tracked %d frames, %d ids issued", num_frames, tracker._next_id - 1)
    return outputs
