"""Synthetic sequences with known ground truth.

Used by the test suite and by ``scripts/make_synthetic_dataset.py``. Every
generator is deterministic for a given seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import BBox
from .mot_io import (
    GtRecord,
    write_detections,
    write_embeddings,
    write_ground_truth,
    write_warps,
)
from .tracker import Detection


@dataclass
class SyntheticSequence:
    name: str
    num_frames: int
    detections: dict[int, list[Detection]] = field(default_factory=dict)
    ground_truth: dict[int, list[GtRecord]] = field(default_factory=dict)
    warps: dict[int, np.ndarray] = field(default_factory=dict)

    def write(self, root) -> Path:
        """Write ``det.txt``, ``emb.txt``, ``gt.txt`` (and ``warps.txt``) under ``root/name``."""
        seq_dir = Path(root) / self.name
        seq_dir.mkdir(parents=True, exist_ok=True)
        write_detections(seq_dir / "det.txt", self.detections)
        if any(d.embedding is not None for ds in self.detections.values() for d in ds):
            write_embeddings(seq_dir / "emb.txt", self.detections)
        write_ground_truth(seq_dir / "gt.txt", self.ground_truth)
        if self.warps:
            write_warps(seq_dir / "warps.txt", self.warps)
        return seq_dir


def _embedding_bank(n: int, dim: int, rng: np.random.Generator, jitter: float) -> np.ndarray:
    """``n`` near-orthogonal unit vectors in ``dim`` dimensions."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    bank = q[:n] if n <= dim else rng.standard_normal((n, dim))
    bank = bank + jitter * rng.standard_normal(bank.shape)
    return bank / np.linalg.norm(bank, axis=1, keepdims=True)


def _add(seq: SyntheticSequence, frame: int, ident: int, box: BBox, score: float,
         emb: Optional[np.ndarray], tau_high: float) -> None:
    emb = emb if (emb is not None and score >= tau_high) else None
    seq.detections.setdefault(frame, []).append(Detection(box, score, emb, frame))
    seq.ground_truth.setdefault(frame, []).append(GtRecord(frame, ident, box))


def _shuffle(seq: SyntheticSequence, rng: np.random.Generator) -> None:
    for frame, dets in seq.detections.items():
        order = rng.permutation(len(dets))
        seq.detections[frame] = [dets[k] for k in order]


def linear_objects(num_objects: int = 10, num_frames: int = 200, seed: int = 0,
                   width: float = 40.0, height: float = 100.0, score: float = 0.9,
                   emb_dim: int = 32, jitter: float = 0.01, max_speed: float = 2.0,
                   tau_high: float = 0.6, name: str = "linear") -> SyntheticSequence:
    """Objects on separate horizontal lanes moving at constant velocity.

    Lanes are spaced wider than a box height, so boxes never overlap and the
    drift along y stays well inside the lane.
    """
    rng = np.random.default_rng(seed)
    seq = SyntheticSequence(name, num_frames)
    bank = _embedding_bank(num_objects, emb_dim, rng, jitter)
    lane = height * 1.4
    for k in range(num_objects):
        x0 = rng.uniform(200.0, 600.0)
        y0 = 60.0 + k * lane
        vx = rng.uniform(-max_speed, max_speed)
        vy = rng.uniform(-0.05, 0.05)
        for f in range(num_frames):
            x = x0 + vx * f
            y = y0 + vy * f
            _add(seq, f, k + 1, BBox(x, y, x + width, y + height), score, bank[k], tau_high)
    _shuffle(seq, rng)
    return seq


def single_object(num_frames: int = 100, seed: int = 0, score: float = 0.95) -> SyntheticSequence:
    return linear_objects(1, num_frames, seed=seed, score=score, name="single")


def crossing_with_occlusion(num_frames: int = 60, gap: int = 5, speed: float = 1.5,
                            separation: float = 8.0, seed: int = 0, score: float = 0.9,
                            emb_dim: int = 16, width: float = 40.0, height: float = 100.0,
                            tau_high: float = 0.6, name: str = "crossing") -> SyntheticSequence:
    """Two objects meet, vanish together for ``gap`` frames, then separate.

    At the last visible frame the box centres are ``2 * separation`` apart.
    During the occlusion the objects turn back, so each reappears where it
    vanished while a constant-velocity prediction carries each track towards
    the other object. Motion alone therefore tends to swap the identities and
    appearance has to keep them apart. Occluded frames have neither
    detections nor ground truth.
    """
    rng = np.random.default_rng(seed)
    seq = SyntheticSequence(name, num_frames)
    bank = _embedding_bank(2, emb_dim, rng, 0.0)
    centre = 500.0
    start = num_frames // 2 - gap // 2
    stop = start + gap  # first visible frame after the gap
    for ident, direction in ((1, 1.0), (2, -1.0)):
        for f in range(num_frames):
            if start <= f < stop:
                continue
            steps = (f - start + 1) if f < start else (stop - f)
            x = centre - direction * separation + direction * speed * steps
            box = BBox(x - width / 2, 200.0, x + width / 2, 200.0 + height)
            _add(seq, f, ident, box, score, bank[ident - 1], tau_high)
    _shuffle(seq, rng)
    return seq


def with_camera_motion(seq: SyntheticSequence, shift=(2.0, -1.0)) -> SyntheticSequence:
    """Translate the whole scene by a per-frame camera pan and record the warps."""
    dx, dy = shift
    out = SyntheticSequence(seq.name + "-cmc", seq.num_frames)
    for frame in range(seq.num_frames):
        ox, oy = dx * frame, dy * frame
        for d in seq.detections.get(frame, []):
            b = d.bbox
            out.detections.setdefault(frame, []).append(
                Detection(BBox(b.x1 + ox, b.y1 + oy, b.x2 + ox, b.y2 + oy), d.score, d.embedding, frame)
            )
        for g in seq.ground_truth.get(frame, []):
            b = g.bbox
            out.ground_truth.setdefault(frame, []).append(
                GtRecord(frame, g.identity, BBox(b.x1 + ox, b.y1 + oy, b.x2 + ox, b.y2 + oy))
            )
        if frame > 0:
            out.warps[frame] = np.array([[1.0, 0.0, dx], [0.0, 1.0, dy]])
    return out


def perturb(seq: SyntheticSequence, box_noise: float = 2.0, score_range=(0.2, 1.0),
            drop_rate: float = 0.05, seed: int = 0) -> SyntheticSequence:
    """Jitter boxes, redraw scores and drop a fraction of detections.

    Ground truth is copied unchanged. Detections whose new score falls below
    0.6 lose their embedding, as a detector pipeline would not extract one.
    """
    rng = np.random.default_rng(seed)
    out = SyntheticSequence(seq.name + "-noisy", seq.num_frames,
                            ground_truth={f: list(g) for f, g in seq.ground_truth.items()},
                            warps=dict(seq.warps))
    lo, hi = score_range
    for frame in sorted(seq.detections):
        kept = []
        for d in seq.detections[frame]:
            if rng.random() < drop_rate:
                continue
            dx1, dy1, dx2, dy2 = rng.normal(0.0, box_noise, 4)
            b = d.bbox
            x1, y1 = b.x1 + dx1, b.y1 + dy1
            x2, y2 = max(b.x2 + dx2, x1 + 1.0), max(b.y2 + dy2, y1 + 1.0)
            score = float(rng.uniform(lo, hi))
            emb = d.embedding if score >= 0.6 else None
            kept.append(Detection(BBox(x1, y1, x2, y2), score, emb, frame))
        out.detections[frame] = kept
    return out
