"""Track detection files, evaluate results and sweep fusion methods.

Subcommands are ``track``, ``eval`` and ``sweep``.

Configuration precedence is defaults < ``--config`` file < flags. The worker
pool size for ``sweep`` comes from the ``CUEFUSION_WORKERS`` environment
variable (default 1).
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import metrics
from .config import KEYS, build_config, read_config_file
from .fusion import FusionMethod
from .pipeline import (
    METHODS,
    PipelineError,
    SequenceFiles,
    discover_sequences,
    evaluate_files,
    method_table,
    plan_sweep,
    results_csv,
    run_sweep,
    second_stage_table,
    sequence_files,
    sequence_name_for,
    track_to_file,
)
from .tracker import SecondStageMetric

logger = logging.getLogger("cuefusion")

# flags that map onto config keys, beyond the ones declared explicitly below
_NUMERIC_FLAGS = [
    "tau-high", "tau-low", "init-score", "max-lost", "reject-sim-stage1", "reject-sim-stage2",
    "theta-iou", "theta-emb", "lambda1", "lambda2", "lambda3", "lambda4", "lambda",
    "lambda-h", "lambda-c", "gate", "alpha", "std-position", "std-velocity", "std-measurement",
]
_BOOL_FLAGS = [
    "nsa", "cmc", "preserve-width", "preserve-height", "preserve-confidence",
    "preserve-lost-only", "stage2-active-only",
]


def _add_config_flags(p: argparse.ArgumentParser, *, method_flags: bool = True) -> None:
    p.add_argument("--config", help="flat key = value config file")
    if method_flags:
        p.add_argument("--fusion", choices=[m.value for m in FusionMethod])
        p.add_argument("--cues", help="comma list of motion,appearance,hiou,confidence")
        p.add_argument("--second-stage", choices=[m.value for m in SecondStageMetric])
    for name in _NUMERIC_FLAGS:
        p.add_argument(f"--{name}", dest=name.replace("-", "_"))
    for name in _BOOL_FLAGS:
        p.add_argument(f"--{name}", dest=name.replace("-", "_"), action=argparse.BooleanOptionalAction)


def _config_from_args(args, *, method_flags: bool = True):
    file_layer = read_config_file(args.config) if args.config else {}
    flags = {}
    for key in KEYS:
        if not method_flags and key in {"fusion", "cues", "second_stage"}:
            continue
        value = getattr(args, key, None)
        if value is not None:
            flags[key] = value
    return build_config(file_layer, flags)


def _sequences_for_track(args) -> list[SequenceFiles]:
    if args.data:
        return discover_sequences(args.data)
    if not args.dets:
        raise PipelineError("either --dets or --data is required")
    dets = Path(args.dets)
    if not dets.is_file():
        raise PipelineError(f"sequence {sequence_name_for(dets)}: detections file {dets} not found")
    return [SequenceFiles(
        name=sequence_name_for(dets),
        dets=dets,
        embeddings=Path(args.embeddings) if args.embeddings else None,
        warps=Path(args.warps) if args.warps else None,
        gt=Path(args.gt) if getattr(args, "gt", None) else None,
    )]


def cmd_track(args) -> int:
    cfg = _config_from_args(args)
    for seq in _sequences_for_track(args):
        path = track_to_file(seq, cfg, args.out)
        print(f"{seq.name}: wrote {path}")
    return 0


def _gt_for(name: str, gt_arg: Path, single: bool) -> Path:
    if gt_arg.is_file():
        if not single:
            raise PipelineError("--gt is a single file but several result files were given")
        return gt_arg
    seq = sequence_files(gt_arg / name) if (gt_arg / name / "det.txt").is_file() else None
    candidates = [gt_arg / name / "gt.txt", gt_arg / name / "gt" / "gt.txt", gt_arg / f"{name}.txt"]
    if seq is not None and seq.gt is not None:
        return seq.gt
    for c in candidates:
        if c.is_file():
            return c
    raise PipelineError(f"sequence {name}: no ground truth under {gt_arg}")


def cmd_eval(args) -> int:
    results = Path(args.results)
    if results.is_file():
        files = [results]
    elif results.is_dir():
        files = sorted(p for p in results.glob("*.txt"))
    else:
        files = []
    if not files:
        raise PipelineError(f"no result files in {results}")
    gt_arg = Path(args.gt)
    reports = []
    for f in files:
        gt_path = _gt_for(f.stem, gt_arg, single=len(files) == 1)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            reports.append(evaluate_files(f.stem, f, gt_path, args.iou_threshold))
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    reports.append(metrics.aggregate(reports))
    print(metrics.format_report(reports))
    report_path = Path(args.report) if args.report else (results if results.is_dir() else results.parent) / "eval.csv"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(metrics.report_csv(reports))
    print(f"report written to {report_path}")
    return 0


def cmd_sweep(args) -> int:
    base = _config_from_args(args, method_flags=False)
    seqs = discover_sequences(args.data)
    methods = [FusionMethod(m) for m in args.methods.split(",")] if args.methods else list(METHODS)
    stages = [SecondStageMetric.IOU]
    if args.second_stage == SecondStageMetric.MAHALANOBIS.value:
        stages.append(SecondStageMetric.MAHALANOBIS)
    combos = plan_sweep(methods, stages)
    out = Path(args.out)
    results = run_sweep(combos, base, seqs, out)
    out.mkdir(parents=True, exist_ok=True)
    table = method_table(results)
    (out / "sweep_table.txt").write_text(table)
    (out / "sweep_table.csv").write_text(results_csv(results))
    print(table)
    if SecondStageMetric.MAHALANOBIS in stages:
        table4 = second_stage_table(results)
        (out / "second_stage_table.txt").write_text(table4)
        print(table4)
    failed = [r for r in results if r.error]
    for r in failed:
        print(f"error: {r.combo.key}: {r.error}", file=sys.stderr)
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cuefusion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track one sequence or every sequence of a dataset")
    p.add_argument("--dets", help="detections file of a single sequence")
    p.add_argument("--embeddings")
    p.add_argument("--warps")
    p.add_argument("--data", help="dataset directory, one sub-directory per sequence")
    p.add_argument("--out", required=True, help="output directory for <seq>.txt result files")
    _add_config_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="MOTA/IDF1 of result files against ground truth")
    p.add_argument("--results", required=True, help="result file or directory of <seq>.txt files")
    p.add_argument("--gt", required=True, help="ground-truth file or dataset directory")
    p.add_argument("--report", help="CSV report path (default <results>/eval.csv)")
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="fusion method x cue set comparison tables")
    p.add_argument("--data", required=True, help="dataset directory with det/emb/gt files")
    p.add_argument("--out", required=True)
    p.add_argument("--methods", help="comma list of fusion methods (default: all four)")
    p.add_argument("--second-stage", choices=[m.value for m in SecondStageMetric], default="iou",
                   help="'mahalanobis' adds the KF-gating second-association comparison")
    _add_config_flags(p, method_flags=False)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PipelineError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
