#!/usr/bin/env python3
"""Build a stub-adapter fixture project and run every condition through ``vpkit ablate``.

    python3 scripts/run_fixture_ablation.py WORK_DIR [--seed 0]

The printed table comes from the CLI; WORK_DIR/config.json can be edited to
swap the stubs for real model commands.
"""
import argparse
import subprocess
import sys
from pathlib import Path

from vpkit.synthetic import build_fixture_project

STUB = Path(__file__).resolve().parent / "stub_adapter.py"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("work", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--speakers", type=int, default=12, help="speakers per gender")
    args = ap.parse_args()

    args.work.mkdir(parents=True, exist_ok=True)
    cfg = build_fixture_project(args.work, [sys.executable, str(STUB)], args.seed, args.speakers)
    cmd = [sys.executable, "-m", "vpkit", "ablate", "--config", str(cfg)]
    sys.exit(subprocess.call(cmd))


if __name__ == "__main__":
    main()
