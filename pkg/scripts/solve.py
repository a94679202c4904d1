"""Run the curriculum on a level corpus and validate the resulting plans.

    python3 scripts/solve.py levels/microban.xsb --out-dir runs/microban --max-iterations 50
"""

import sys
from pathlib import Path

from gvi_planner.cli import EXIT_OK, build_parser, main


def run(argv):
    code = main(["solve", *argv])
    if code != EXIT_OK:
        return code
    args = build_parser().parse_args(["solve", *argv])
    out = Path(args.out_dir or "runs/latest")
    extra = ["--domain", args.domain] if args.domain else []
    return main(["validate", str(out / "plans.txt"), *args.paths, *extra])


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
