"""Batch tracking, evaluation and fusion-method sweeps over sequence directories.

A dataset directory holds one sub-directory per sequence::

    <data>/<seq>/det.txt      detections (required)
    <data>/<seq>/emb.txt      embeddings (required when the appearance cue is on)
    <data>/<seq>/warps.txt    camera warps (optional)
    <data>/<seq>/gt.txt       ground truth (needed for evaluation)

The MOT-challenge nesting ``det/det.txt`` and ``gt/gt.txt`` is accepted too.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from . import metrics
from .config import to_settings
from .fusion import Cues, FusionMethod
from .mot_io import (
    attach_embeddings,
    high_indices,
    load_detections,
    load_embeddings,
    load_ground_truth,
    load_results,
    load_warps,
    write_results,
)
from .tracker import FrameOutput, SecondStageMetric, TrackerConfig, run_sequence

logger = logging.getLogger(__name__)

WORKERS_ENV = "CUEFUSION_WORKERS"

CUE_ROWS = (
    Cues(appearance=False, hiou=False, confidence=False),
    Cues(appearance=True, hiou=False, confidence=False),
    Cues(appearance=True, hiou=True, confidence=False),
    Cues(appearance=True, hiou=True, confidence=True),
)
METHODS = (FusionMethod.MINIMUM, FusionMethod.WEIGHTED_SUM, FusionMethod.KF_GATING, FusionMethod.HADAMARD)
METHOD_TITLES = {
    FusionMethod.MINIMUM: "Minimum",
    FusionMethod.WEIGHTED_SUM: "Weighted-sum",
    FusionMethod.KF_GATING: "KF-gating",
    FusionMethod.HADAMARD: "Hadamard",
}


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class SequenceFiles:
    name: str
    dets: Path
    embeddings: Optional[Path] = None
    warps: Optional[Path] = None
    gt: Optional[Path] = None


def _first(*paths: Path) -> Optional[Path]:
    for p in paths:
        if p.is_file():
            return p
    return None


def sequence_files(seq_dir) -> SequenceFiles:
    d = Path(seq_dir)
    dets = _first(d / "det.txt", d / "det" / "det.txt")
    if dets is None:
        raise PipelineError(f"sequence {d.name}: no det.txt in {d}")
    return SequenceFiles(
        name=d.name,
        dets=dets,
        embeddings=_first(d / "emb.txt", d / "det" / "emb.txt"),
        warps=_first(d / "warps.txt", d / "cmc" / "warps.txt"),
        gt=_first(d / "gt.txt", d / "gt" / "gt.txt"),
    )


def discover_sequences(data_dir) -> list[SequenceFiles]:
    root = Path(data_dir)
    if not root.is_dir():
        raise PipelineError(f"dataset directory {root} does not exist")
    seqs = [sequence_files(p) for p in sorted(root.iterdir())
            if p.is_dir() and _first(p / "det.txt", p / "det" / "det.txt")]
    if not seqs:
        raise PipelineError(f"no sequences found under {root}")
    return seqs


def sequence_name_for(det_path) -> str:
    p = Path(det_path)
    if p.name == "det.txt":
        parent = p.parent
        return parent.parent.name if parent.name == "det" else parent.name
    return p.stem


def track_files(seq: SequenceFiles, cfg: TrackerConfig) -> list[FrameOutput]:
    dets = load_detections(seq.dets)
    if cfg.fusion.cues.appearance:
        if seq.embeddings is None or not Path(seq.embeddings).is_file():
            raise PipelineError(f"sequence {seq.name}: appearance cue enabled but no embeddings file")
        store = load_embeddings(seq.embeddings, high_indices(dets, cfg.tau_high))
        dets = attach_embeddings(dets, store)
    warps = load_warps(seq.warps) if seq.warps is not None else {}
    return run_sequence(dets, cfg, warps)


def track_to_file(seq: SequenceFiles, cfg: TrackerConfig, out_dir) -> Path:
    out = Path(out_dir) / f"{seq.name}.txt"
    write_results(out, track_files(seq, cfg))
    return out


def _frame_range(frames) -> tuple[int, int]:
    return (min(frames), max(frames)) if frames else (0, -1)


def evaluate_files(name: str, result_path, gt_path, iou_threshold: float = 0.5) -> metrics.SequenceReport:
    """Score one result file; result frames outside the ground-truth range are dropped with a warning."""
    preds = load_results(result_path)
    gt = load_ground_truth(gt_path)
    lo, hi = _frame_range(list(gt))
    outside = [f for f in preds if f < lo or f > hi]
    if outside:
        warnings.warn(
            f"{name}: result frames {min(outside) + 1}..{max(outside) + 1} fall outside the "
            f"ground-truth range {lo + 1}..{hi + 1}; evaluating on the overlap",
            stacklevel=2,
        )
        preds = {f: r for f, r in preds.items() if lo <= f <= hi}
    return metrics.evaluate(name, metrics.as_frames(gt), metrics.as_frames(preds), iou_threshold)


# --- sweeps -------------------------------------------------------------------


@dataclass(frozen=True)
class Combo:
    method: FusionMethod
    cues: Cues
    second_stage: SecondStageMetric = SecondStageMetric.IOU

    @property
    def key(self) -> str:
        cue_part = self.cues.label().replace(", ", "-")
        return f"{self.method.value}__{cue_part}__{self.second_stage.value}"

    def config(self, base: TrackerConfig) -> TrackerConfig:
        return replace(
            base,
            second_stage_metric=self.second_stage,
            fusion=replace(base.fusion, method=self.method, cues=self.cues),
        )


def plan_sweep(methods: Sequence[FusionMethod] = METHODS,
               second_stages: Sequence[SecondStageMetric] = (SecondStageMetric.IOU,),
               cue_rows: Sequence[Cues] = CUE_ROWS) -> list[Combo]:
    """Method x cue-row combinations; a Mahalanobis second stage only reruns KF-gating rows."""
    combos = []
    for stage in second_stages:
        stage = SecondStageMetric(stage)
        for method in methods:
            method = FusionMethod(method)
            if stage is SecondStageMetric.MAHALANOBIS and method is not FusionMethod.KF_GATING:
                continue
            combos.extend(Combo(method, cues, stage) for cues in cue_rows)
    return combos


@dataclass
class ComboResult:
    combo: Combo
    mota: Optional[float] = None
    idf1: Optional[float] = None
    error: Optional[str] = None
    cached: bool = False
    per_sequence: list = field(default_factory=list)


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def combo_digest(combo: Combo, cfg: TrackerConfig, seqs: Sequence[SequenceFiles]) -> str:
    inputs = []
    for s in seqs:
        entry = {"name": s.name, "dets": _file_digest(s.dets)}
        if cfg.fusion.cues.appearance and s.embeddings is not None:
            entry["emb"] = _file_digest(s.embeddings)
        if s.warps is not None:
            entry["warps"] = _file_digest(s.warps)
        inputs.append(entry)
    payload = json.dumps({"config": to_settings(cfg), "inputs": inputs}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def run_combo(combo: Combo, base: TrackerConfig, seqs: Sequence[SequenceFiles], out_root) -> ComboResult:
    cfg = combo.config(base)
    out_dir = Path(out_root) / combo.key
    digest = combo_digest(combo, cfg, seqs)
    stamp = out_dir / ".digest"
    result = ComboResult(combo)
    try:
        fresh = stamp.is_file() and stamp.read_text() == digest and all(
            (out_dir / f"{s.name}.txt").is_file() for s in seqs
        )
        if not fresh:
            out_dir.mkdir(parents=True, exist_ok=True)
            for s in seqs:
                track_to_file(s, cfg, out_dir)
            stamp.write_text(digest)
        result.cached = fresh
        reports = []
        for s in seqs:
            if s.gt is None:
                raise PipelineError(f"sequence {s.name}: no ground truth")
            reports.append(evaluate_files(s.name, out_dir / f"{s.name}.txt", s.gt))
        total = metrics.aggregate(reports)
        result.mota = total.mota.mota
        result.idf1 = total.ident.idf1
        result.per_sequence = [r.row() for r in reports]
    except Exception as exc:  # reported per cell; the sweep carries on
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(combos: Sequence[Combo], base: TrackerConfig, seqs: Sequence[SequenceFiles],
              out_root, workers: Optional[int] = None) -> list[ComboResult]:
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(combos) <= 1:
        return [run_combo(c, base, seqs, out_root) for c in combos]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_combo, c, base, seqs, out_root) for c in combos]
        return [f.result() for f in futures]


def _cell(value: Optional[float]) -> str:
    return "-" if value is None else f"{100.0 * value:.3f}"


def _block_rows(results: Sequence[ComboResult]):
    for r in results:
        label = r.combo.cues.label()
        if label == "mot":
            label = "mot (mahalanobis)" if r.combo.method is FusionMethod.KF_GATING else "mot (iou)"
        yield label, _cell(r.mota), _cell(r.idf1)


def _render(blocks: Sequence[tuple[str, Sequence[ComboResult]]], title: str) -> str:
    rows: list[tuple[str, str, str]] = []
    for heading, results in blocks:
        rows.append((heading, "MOTA", "IDF1"))
        rows.extend(_block_rows(results))
    w0 = max(len(r[0]) for r in rows)
    w1 = max(len(r[1]) for r in rows)
    w2 = max(len(r[2]) for r in rows)
    rule = "-" * (w0 + w1 + w2 + 6)
    lines = [title, rule]
    for heading, results in blocks:
        lines.append(f"{heading.ljust(w0)}  {'MOTA'.rjust(w1)}  {'IDF1'.rjust(w2)}")
        for label, mota, idf in _block_rows(results):
            lines.append(f"{label.ljust(w0)}  {mota.rjust(w1)}  {idf.rjust(w2)}")
        lines.append(rule)
    return "\n".join(lines) + "\n"


def method_table(results: Sequence[ComboResult]) -> str:
    """Rows of cue sets grouped by fusion method, IoU second stage."""
    blocks = []
    for method in METHODS:
        rows = [r for r in results if r.combo.method is method
                and r.combo.second_stage is SecondStageMetric.IOU]
        if rows:
            blocks.append((METHOD_TITLES[method], rows))
    return _render(blocks, "Fusion methods (second association: IoU)")


def second_stage_table(results: Sequence[ComboResult]) -> str:
    """KF-gating rows with IoU versus Mahalanobis in the second association."""
    blocks = []
    for stage, title in ((SecondStageMetric.IOU, "IoU"), (SecondStageMetric.MAHALANOBIS, "Mahalanobis")):
        rows = [r for r in results if r.combo.method is FusionMethod.KF_GATING
                and r.combo.second_stage is stage]
        if rows:
            blocks.append((title, rows))
    return _render(blocks, "KF-gating: second association metric")


def results_csv(results: Sequence[ComboResult]) -> str:
    lines = ["method,cues,second_stage,MOTA,IDF1"]
    for r in results:
        cues = r.combo.cues.label().replace(", ", "+")
        mota = "" if r.mota is None else f"{100.0 * r.mota:.3f}"
        idf = "" if r.idf1 is None else f"{100.0 * r.idf1:.3f}"
        lines.append(f"{r.combo.method.value},{cues},{r.combo.second_stage.value},{mota},{idf}")
    return "\n".join(lines) + "\n"
