"""Readers and writers for MOT-style text files.

Frames are 1-based on disk and 0-based everywhere else; the shift happens
only in this module. Formats:

* detections  ``frame,-1,x,y,w,h,score[,...]``
* embeddings  first line ``D=<dim>``, then ``frame,det_index,v1 v2 ... vD``
* warps       ``frame a11 a12 a13 a21 a22 a23``
* results     ``frame,id,x,y,w,h,score,-1,-1,-1``
* ground truth ``frame,id,x,y,w,h,consider,class,visibility``
"""
from __future__ import annotations

import os
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .geometry import BBox
from .tracker import Detection, FrameOutput


class FormatError(ValueError):
    """A line in an input file does not follow its format."""

    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True)
class SequenceMeta:
    name: str
    frame_count: int
    fps: float = 30.0
    width: int = 1920
    height: int = 1080

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError("frame_count must be at least 1")


@dataclass(frozen=True)
class GtRecord:
    frame: int
    identity: int
    bbox: BBox
    consider: bool = True
    class_id: int = 1
    visibility: float = 1.0


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line:
                yield lineno, line


def _floats(path, lineno, fields, what):
    try:
        return [float(f) for f in fields]
    except ValueError:
        raise FormatError(path, lineno, f"non-numeric {what}") from None


def _frame(path, lineno, text) -> int:
    try:
        value = float(text)
    except ValueError:
        raise FormatError(path, lineno, f"bad frame index {text!r}") from None
    if value != int(value) or value < 1:
        raise FormatError(path, lineno, f"frame index must be a positive integer, got {text!r}")
    return int(value) - 1


def load_detections(path) -> dict[int, list[Detection]]:
    out: dict[int, list[Detection]] = {}
    for lineno, line in _lines(path):
        fields = [f.strip() for f in line.split(",")]
        if len(fields) < 7:
            raise FormatError(path, lineno, f"expected at least 7 fields, got {len(fields)}")
        frame = _frame(path, lineno, fields[0])
        x, y, w, h, score = _floats(path, lineno, fields[2:7], "box or score")
        if score < 0:
            continue
        if w < 0 or h < 0:
            raise FormatError(path, lineno, "negative box size")
        try:
            det = Detection(BBox.from_tlwh(x, y, w, h), min(score, 1.0), frame=frame)
        except ValueError as exc:
            raise FormatError(path, lineno, str(exc)) from None
        out.setdefault(frame, []).append(det)
    return out


def high_indices(dets: Mapping[int, Sequence[Detection]], tau_high: float) -> dict[int, list[int]]:
    """Indices of detections per frame that are expected to carry an embedding."""
    return {f: [i for i, d in enumerate(ds) if d.score >= tau_high] for f, ds in dets.items()}


def load_embeddings(path, expected: Optional[Mapping[int, Sequence[int]]] = None) -> dict[tuple[int, int], np.ndarray]:
    """Read an embedding file into ``{(frame, det_index): vector}``.

    ``expected`` maps each frame to the detection indices that must have a
    record; any surplus, shortfall or stray index is an error naming the frame.
    A missing file with nothing expected yields an empty store.
    """
    if path is None or not os.path.exists(path):
        if expected and any(expected.values()):
            raise FileNotFoundError(f"embedding file {path} not found")
        return {}
    store: dict[tuple[int, int], np.ndarray] = {}
    dim = None
    for lineno, line in _lines(path):
        if dim is None:
            if not line.startswith("D="):
                raise FormatError(path, lineno, "missing 'D=<dim>' header")
            try:
                dim = int(line[2:])
            except ValueError:
                raise FormatError(path, lineno, "bad dimension header") from None
            if dim < 1:
                raise FormatError(path, lineno, "dimension must be positive")
            continue
        parts = line.split(",", 2)
        if len(parts) != 3:
            raise FormatError(path, lineno, "expected 'frame,det_index,values'")
        frame = _frame(path, lineno, parts[0])
        try:
            idx = int(parts[1])
        except ValueError:
            raise FormatError(path, lineno, "bad detection index") from None
        vec = np.array(_floats(path, lineno, parts[2].split(), "embedding value"))
        if len(vec) != dim:
            raise FormatError(path, lineno, f"frame {frame + 1}: expected {dim} values, got {len(vec)}")
        if not np.all(np.isfinite(vec)):
            raise FormatError(path, lineno, f"frame {frame + 1}: non-finite embedding")
        if (frame, idx) in store:
            raise FormatError(path, lineno, f"frame {frame + 1}: duplicate record for detection {idx}")
        store[(frame, idx)] = vec
    if expected is not None:
        got: dict[int, set[int]] = defaultdict(set)
        for frame, idx in store:
            got[frame].add(idx)
        for frame in sorted(set(got) | set(expected)):
            want = set(expected.get(frame, ()))
            if got.get(frame, set()) != want:
                raise ValueError(
                    f"{path}: frame {frame + 1}: embedding records for detections "
                    f"{sorted(got.get(frame, set()))}, expected {sorted(want)}"
                )
    return store


def attach_embeddings(dets: Mapping[int, Sequence[Detection]], store: Mapping[tuple[int, int], np.ndarray]) -> dict[int, list[Detection]]:
    return {
        f: [replace(d, embedding=store.get((f, i))) for i, d in enumerate(ds)]
        for f, ds in dets.items()
    }


def load_warps(path) -> dict[int, np.ndarray]:
    """Per-frame 2x3 warps; frames absent from the file (or a missing file) mean identity."""
    if path is None or not os.path.exists(path):
        return {}
    out = {}
    for lineno, line in _lines(path):
        fields = line.split()
        if len(fields) != 7:
            raise FormatError(path, lineno, f"expected 7 fields, got {len(fields)}")
        frame = _frame(path, lineno, fields[0])
        warp = np.array(_floats(path, lineno, fields[1:], "warp entry")).reshape(2, 3)
        if not np.all(np.isfinite(warp)) or abs(np.linalg.det(warp[:, :2])) < 1e-12:
            raise FormatError(path, lineno, "warp must be finite and invertible")
        out[frame] = warp
    return out


def identity_warp() -> np.ndarray:
    return np.eye(2, 3)


def format_result_line(frame: int, track_id: int, bbox: BBox, score: float) -> str:
    x, y, w, h = bbox.to_tlwh()
    return f"{frame + 1},{track_id},{x:.2f},{y:.2f},{w:.2f},{h:.2f},{score:.4f},-1,-1,-1"


def write_results(path, outputs: Iterable[FrameOutput]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        format_result_line(o.frame, tid, box, score)
        for o in outputs
        for tid, box, score in o.records
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(line + "\n" for line in lines))


def load_results(path) -> dict[int, list[tuple[int, BBox, float]]]:
    out: dict[int, list[tuple[int, BBox, float]]] = {}
    for lineno, line in _lines(path):
        fields = line.split(",")
        if len(fields) < 7:
            raise FormatError(path, lineno, f"expected at least 7 fields, got {len(fields)}")
        frame = _frame(path, lineno, fields[0])
        try:
            tid = int(float(fields[1]))
        except ValueError:
            raise FormatError(path, lineno, "bad track id") from None
        x, y, w, h, score = _floats(path, lineno, fields[2:7], "box or score")
        try:
            box = BBox.from_tlwh(x, y, w, h)
        except ValueError as exc:
            raise FormatError(path, lineno, str(exc)) from None
        out.setdefault(frame, []).append((tid, box, score))
    return out


def load_ground_truth(path) -> dict[int, list[GtRecord]]:
    out: dict[int, list[GtRecord]] = {}
    for lineno, line in _lines(path):
        fields = line.split(",")
        if len(fields) < 6:
            raise FormatError(path, lineno, f"expected at least 6 fields, got {len(fields)}")
        frame = _frame(path, lineno, fields[0])
        vals = _floats(path, lineno, fields[1:], "ground-truth field")
        identity = int(vals[0])
        if identity < 1:
            raise FormatError(path, lineno, f"identity must be positive, got {identity}")
        x, y, w, h = vals[1:5]
        consider = bool(vals[5]) if len(vals) > 5 else True
        class_id = int(vals[6]) if len(vals) > 6 else 1
        visibility = vals[7] if len(vals) > 7 else 1.0
        if not 0.0 <= visibility <= 1.0:
            raise FormatError(path, lineno, f"visibility {visibility} outside [0, 1]")
        if not consider:
            continue
        try:
            box = BBox.from_tlwh(x, y, w, h)
        except ValueError as exc:
            raise FormatError(path, lineno, str(exc)) from None
        out.setdefault(frame, []).append(GtRecord(frame, identity, box, consider, class_id, visibility))
    return out


def write_detections(path, dets: Mapping[int, Sequence[Detection]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for frame in sorted(dets):
            for d in dets[frame]:
                x, y, w, h = (float(v) for v in d.bbox.to_tlwh())
                fh.write(f"{frame + 1},-1,{x!r},{y!r},{w!r},{h!r},{float(d.score)!r},-1,-1,-1\n")


def write_embeddings(path, dets: Mapping[int, Sequence[Detection]]) -> None:
    """Write every detection that carries an embedding."""
    dims = {len(d.embedding) for ds in dets.values() for d in ds if d.embedding is not None}
    if len(dims) > 1:
        raise ValueError(f"inconsistent embedding dimensions {sorted(dims)}")
    dim = dims.pop() if dims else 1
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"D={dim}\n")
        for frame in sorted(dets):
            for i, d in enumerate(dets[frame]):
                if d.embedding is not None:
                    vals = " ".join(repr(float(v)) for v in d.embedding)
                    fh.write(f"{frame + 1},{i},{vals}\n")


def write_warps(path, warps: Mapping[int, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for frame in sorted(warps):
            vals = " ".join(repr(float(v)) for v in np.asarray(warps[frame]).reshape(-1))
            fh.write(f"{frame + 1} {vals}\n")


def write_ground_truth(path, gt: Mapping[int, Sequence[GtRecord]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for frame in sorted(gt):
            for r in gt[frame]:
                x, y, w, h = (float(v) for v in r.bbox.to_tlwh())
                fh.write(
                    f"{frame + 1},{r.identity},{x!r},{y!r},{w!r},{h!r},"
                    f"{int(r.consider)},{r.class_id},{float(r.visibility)!r}\n"
                )
