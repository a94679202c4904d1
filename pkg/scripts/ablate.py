"""Mixing-ratio ablation on an 8-puzzle scramble pool (thin wrapper over the CLI).

    python3 scripts/ablate.py --p-list 0 0.3 0.6 0.9 1 --out-dir runs/ablate
"""

import sys

from gvi_planner.cli import main

if __name__ == "__main__":
    sys.exit(main(["ablate", *sys.argv[1:]]))
