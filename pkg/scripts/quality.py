"""8-puzzle plan-quality harness: learner with GVI (p=0.6) against the no-GVI baseline (p=0).

    python3 scripts/quality.py --k-max 30 --boards-per-k 50 --out-dir runs/quality
"""

import argparse
from pathlib import Path

from gvi_planner.config import recipe
from gvi_planner.experiments import cmd_quality


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k-max", type=int, default=30)
    ap.add_argument("--boards-per-k", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--p", type=float, nargs="+", default=[0.6, 0.0])
    ap.add_argument("--out-dir", default="runs/quality")
    args = ap.parse_args()
    print("p      solved%   " + "  ".join(f"+{t:<6}" for t in recipe("quality").thresholds))
    for p in args.p:
        cfg = recipe("quality").override(
            seed=args.seed, k_max=args.k_max, boards_per_k=args.boards_per_k, p=p,
            out_dir=str(Path(args.out_dir) / f"p{p:g}"),
        )
        res = cmd_quality(cfg)
        cells = "  ".join(f"{100 * v:6.2f}%" for v in res.solved_pct)
        print(f"{p:<6g} {100 * res.solved_fraction:7.2f}%  {cells}   (excluded {len(res.excluded)})")


if __name__ == "__main__":
    main()
