#!/usr/bin/env python3
"""Regenerate the CSV artifacts behind every shipped figure scenario.

    python3 scripts/reproduce_figures.py [--out out] [--seed N]

Each scenario lands in <out>/<name>/. Plotting is left to whatever tool you
like; the CSVs carry a one-line comment header naming scenario, hash and seed.
"""

import argparse
import sys
import time
from pathlib import Path

from dfc.cli import main as dfc

ROOT = Path(__file__).resolve().parents[1]

JOBS = [
    ("topology", "fig7-8"),
    ("calc", "fig4"),
    ("calc", "fig5"),
    ("calc", "fig6"),
    ("calc", "fig7-8"),
    ("calc", "fig7_p8_1"),
    ("calc", "fig7_p8_2"),
    ("diagnose", "fig9"),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "out"))
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()

    failures = 0
    for cmd, name in JOBS:
        argv = [cmd, "--scenario", str(ROOT / "scenarios" / f"{name}.json"),
                "--out", str(Path(args.out) / name)]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        print(f"== dfc {cmd} {name}")
        t0 = time.perf_counter()
        code = dfc(argv)
        print(f"   exit {code} in {time.perf_counter() - t0:.2f}s")
        failures += code != 0
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
