"""Run every built-in scenario preset and write its outputs under one directory.

usage: python3 scripts/run_presets.py [OUT_DIR] [--only fig3ab fig4cd ...]
"""

import argparse
import time
from pathlib import Path

from transmon_bh.scenarios import PRESETS, preset, run_scenario


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("out", nargs="?", type=Path, default=Path("runs"))
    parser.add_argument("--only", nargs="*", choices=PRESETS, default=list(PRESETS))
    args = parser.parse_args()

    for name in args.only:
        start = time.perf_counter()
        result = run_scenario(preset(name), args.out / name)
        line = f"{name:8s} dim={result.metadata['basis_dimension']:6d}"
        if result.report is not None:
            line += f"  max dev={result.report.worst_deviation:.4f}"
            first = result.report.labels[0]
            line += (f"  f[{first}] full/eff={result.report.frequency_full_MHz[first]:.5f}"
                     f"/{result.report.frequency_effective_MHz[first]:.5f} MHz")
        print(f"{line}  ({time.perf_counter() - start:.1f} s)")


if __name__ == "__main__":
    main()
