"""Run every shipped scenario through the CLI.

Usage: python scripts/run_case_studies.py [OUT_DIR] [--threads N]
"""

import argparse
import sys
import time
from pathlib import Path

from tclagg.cli import main

ROOT = Path(__file__).resolve().parent.parent

# (config, commands)
PLAN = [
    ("homogeneous_small_noise", ["simulate", "abstract", "bounds"]),
    ("homogeneous_large_noise", ["compare", "bounds"]),
    ("heterogeneous_averaging", ["compare"]),
    ("heterogeneous_clustering", ["compare", "bounds"]),
    ("track_onestep", ["track"]),
    ("track_smpc", ["track"]),
]


def run(out_dir: Path, threads: int) -> int:
    status = 0
    for name, commands in PLAN:
        cfg = ROOT / "configs" / f"{name}.yaml"
        for cmd in commands:
            t0 = time.perf_counter()
            dest = out_dir / name / cmd
            rc = main([cmd, "--config", str(cfg), "--out", str(dest), "--threads", str(threads)])
            print(f"{name:28s} {cmd:9s} rc={rc} {time.perf_counter() - t0:6.1f}s -> {dest}")
            status = status or rc
    return status


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="runs")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    sys.exit(run(Path(args.out), args.threads))
