#!/usr/bin/env python3
"""Run the full method x cue comparison and the second-association comparison.

Point ``--data`` at a directory with one sub-directory per sequence holding
``det/det.txt``, ``det/emb.txt`` and ``gt/gt.txt`` (or the flat ``det.txt``,
``emb.txt``, ``gt.txt``). Without ``--data`` a synthetic dataset is generated
first so the protocol can be exercised end to end.

    python3 scripts/run_table_reproduction.py --data /path/to/val --out runs/tables
    CUEFUSION_WORKERS=4 python3 scripts/run_table_reproduction.py --out runs/synthetic

Extra arguments after ``--`` are passed to ``cuefusion sweep`` unchanged, for
example ``-- --lambda2 0.2`` for dance-style data.
"""
import argparse
import subprocess
import sys
from pathlib import Path

from cuefusion.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", help="dataset directory (default: generate a synthetic one)")
    ap.add_argument("--out", default="runs/tables")
    ap.add_argument("extra", nargs=argparse.REMAINDER)
    args = ap.parse_args()
    out = Path(args.out)
    data = args.data
    if data is None:
        data = out / "synthetic_data"
        subprocess.run(
            [sys.executable, str(Path(__file__).with_name("make_synthetic_dataset.py")), "--out", str(data)],
            check=True,
        )
    extra = [a for a in args.extra if a != "--"]
    return cli_main(["sweep", "--data", str(data), "--out", str(out), "--second-stage", "mahalanobis", *extra])


if __name__ == "__main__":
    sys.exit(main())
