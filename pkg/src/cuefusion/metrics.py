"""CLEAR-MOT (MOTA, FP, FN, ID switches) and identity (IDF1) evaluation.

Both metrics take ground truth and predictions as ``{frame: [(id, box), ...]}``
where ``box`` is a :class:`~cuefusion.geometry.BBox` or any corner-form
4-sequence. A prediction covers a ground-truth box when their IoU is at least
the match threshold.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .assignment import solve
from .geometry import FORBIDDEN, BBox, iou_matrix


@dataclass
class MotaReport:
    fp: int
    fn: int
    idsw: int
    gt_total: int
    matches: int = 0

    @property
    def mota(self) -> Optional[float]:
        """``None`` when there is no ground truth to normalize by."""
        if self.gt_total == 0:
            return None
        return 1.0 - (self.fp + self.fn + self.idsw) / self.gt_total


@dataclass
class Idf1Report:
    idtp: int
    idfp: int
    idfn: int

    @property
    def idf1(self) -> float:
        den = 2 * self.idtp + self.idfp + self.idfn
        return 2 * self.idtp / den if den else 0.0

    @property
    def idp(self) -> float:
        den = self.idtp + self.idfp
        return self.idtp / den if den else 0.0

    @property
    def idr(self) -> float:
        den = self.idtp + self.idfn
        return self.idtp / den if den else 0.0


Frames = Mapping[int, Sequence[tuple]]


def _split(records: Sequence[tuple]):
    ids = [int(r[0]) for r in records]
    boxes = np.array(
        [r[1].as_array() if isinstance(r[1], BBox) else np.asarray(r[1], dtype=float) for r in records],
        dtype=float,
    ).reshape(-1, 4)
    return ids, boxes


def as_frames(records: Mapping[int, Iterable]) -> dict[int, list[tuple[int, BBox]]]:
    """Normalize ground-truth records or result tuples to ``(id, box)`` pairs."""
    out = {}
    for frame, recs in records.items():
        rows = []
        for r in recs:
            if hasattr(r, "identity"):
                rows.append((r.identity, r.bbox))
            else:
                rows.append((r[0], r[1]))
        out[frame] = rows
    return out


def clear_mot(gt: Frames, preds: Frames, iou_threshold: float = 0.5) -> MotaReport:
    """Accumulate CLEAR-MOT events frame by frame.

    Correspondences from earlier frames are kept while they still overlap
    enough; the remaining objects are matched by minimum IoU distance. A
    switch is counted when a ground-truth id is matched to a different
    prediction id than at its last match.
    """
    fp = fn = idsw = total = nmatch = 0
    last_match: dict[int, int] = {}
    for frame in sorted(set(gt) | set(preds)):
        g_ids, g_boxes = _split(gt.get(frame, ()))
        p_ids, p_boxes = _split(preds.get(frame, ()))
        total += len(g_ids)
        sim = iou_matrix(g_boxes, p_boxes)
        valid = sim >= iou_threshold
        matched_g: set[int] = set()
        matched_p: set[int] = set()
        pairs = []
        p_index = {pid: j for j, pid in enumerate(p_ids)}
        for i, gid in enumerate(g_ids):
            pid = last_match.get(gid)
            j = p_index.get(pid) if pid is not None else None
            if j is not None and j not in matched_p and valid[i, j]:
                pairs.append((i, j))
                matched_g.add(i)
                matched_p.add(j)
        rest_g = [i for i in range(len(g_ids)) if i not in matched_g]
        rest_p = [j for j in range(len(p_ids)) if j not in matched_p]
        if rest_g and rest_p:
            sub = 1.0 - sim[np.ix_(rest_g, rest_p)]
            sub = np.where(valid[np.ix_(rest_g, rest_p)], sub, FORBIDDEN)
            for a, b in solve(sub).matches:
                i, j = rest_g[a], rest_p[b]
                pairs.append((i, j))
                matched_g.add(i)
                matched_p.add(j)
                prev = last_match.get(g_ids[i])
                if prev is not None and prev != p_ids[j]:
                    idsw += 1
        for i, j in pairs:
            last_match[g_ids[i]] = p_ids[j]
        nmatch += len(pairs)
        fn += len(g_ids) - len(matched_g)
        fp += len(p_ids) - len(matched_p)
    return MotaReport(fp=fp, fn=fn, idsw=idsw, gt_total=total, matches=nmatch)


def idf1(gt: Frames, preds: Frames, iou_threshold: float = 0.5) -> Idf1Report:
    """Identity scores under the best one-to-one gt/prediction id correspondence."""
    gt_ids = sorted({int(r[0]) for recs in gt.values() for r in recs})
    pr_ids = sorted({int(r[0]) for recs in preds.values() for r in recs})
    g_pos = {g: k for k, g in enumerate(gt_ids)}
    p_pos = {p: k for k, p in enumerate(pr_ids)}
    overlap = np.zeros((len(gt_ids), len(pr_ids)), dtype=np.int64)
    n_gt = n_pred = 0
    for frame in set(gt) | set(preds):
        g_ids, g_boxes = _split(gt.get(frame, ()))
        p_ids, p_boxes = _split(preds.get(frame, ()))
        n_gt += len(g_ids)
        n_pred += len(p_ids)
        if not g_ids or not p_ids:
            continue
        hit = iou_matrix(g_boxes, p_boxes) >= iou_threshold
        for i, j in zip(*np.nonzero(hit)):
            overlap[g_pos[g_ids[i]], p_pos[p_ids[j]]] += 1
    idtp = 0
    if overlap.size:
        res = solve(float(overlap.max()) - overlap)
        idtp = int(sum(overlap[i, j] for i, j in res.matches))
    return Idf1Report(idtp=idtp, idfp=n_pred - idtp, idfn=n_gt - idtp)


@dataclass
class SequenceReport:
    name: str
    mota: MotaReport
    ident: Idf1Report

    def row(self) -> list:
        m = self.mota.mota
        return [
            self.name,
            "nan" if m is None else f"{m:.6f}",
            f"{self.ident.idf1:.6f}",
            self.mota.fp, self.mota.fn, self.mota.idsw,
            self.ident.idtp, self.ident.idfp, self.ident.idfn,
        ]


REPORT_COLUMNS = ["sequence", "MOTA", "IDF1", "FP", "FN", "IDSW", "IDTP", "IDFP", "IDFN"]


def evaluate(name: str, gt: Frames, preds: Frames, iou_threshold: float = 0.5) -> SequenceReport:
    return SequenceReport(name, clear_mot(gt, preds, iou_threshold), idf1(gt, preds, iou_threshold))


def aggregate(reports: Sequence[SequenceReport], name: str = "OVERALL") -> SequenceReport:
    """Sum counts across sequences, then recompute the ratios."""
    m = MotaReport(
        fp=sum(r.mota.fp for r in reports),
        fn=sum(r.mota.fn for r in reports),
        idsw=sum(r.mota.idsw for r in reports),
        gt_total=sum(r.mota.gt_total for r in reports),
        matches=sum(r.mota.matches for r in reports),
    )
    i = Idf1Report(
        idtp=sum(r.ident.idtp for r in reports),
        idfp=sum(r.ident.idfp for r in reports),
        idfn=sum(r.ident.idfn for r in reports),
    )
    return SequenceReport(name, m, i)


def format_report(reports: Sequence[SequenceReport]) -> str:
    """Plain-text table with one line per sequence."""
    rows = [REPORT_COLUMNS] + [[str(v) for v in r.row()] for r in reports]
    widths = [max(len(row[k]) for row in rows) for k in range(len(REPORT_COLUMNS))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in rows)


def report_csv(reports: Sequence[SequenceReport]) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    lines += [",".join(str(v) for v in r.row()) for r in reports]
    return "\n".join(lines) + "\n"
