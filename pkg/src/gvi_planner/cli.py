"""Command-line entry point: ``gvi-planner <command> [options]``.

Exit codes: 0 success, 1 usage or parse error, 2 validation failure,
3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Sequence

from .config import ConfigError, RunConfig, recipe
from .domains import DomainError
from .experiments import (
    UsageError,
    cmd_ablate,
    cmd_grid_demo,
    cmd_oracle,
    cmd_quality,
    cmd_solve,
    cmd_validate,
    load_instances,
)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2, 3

DEFAULT_RECIPE = {
    "solve": "sokoban",
    "grid-demo": "grid-demo",
    "quality": "quality",
    "ablate": "ablate",
    "validate": "sokoban",
    "oracle": "quality",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or YAML config file (fields override the recipe)")
    p.add_argument("--recipe", help="named base recipe")
    p.add_argument("--domain", choices=["grid", "npuzzle", "sokoban"])
    p.add_argument("--seed", type=int)
    p.add_argument("--engine", choices=["bfs", "mcts"])
    p.add_argument("--backend", choices=["tabular", "net"])
    p.add_argument("--p", type=float, help="fraction of each training batch drawn from GVI labels")
    p.add_argument("--budget", type=int, help="node expansions per search run")
    p.add_argument("--runs", type=int, help="restarts per search")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int, help="search worker processes (default: available cores)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gvi-planner", description="Learn search heuristics from failed and successful searches.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run the curriculum on a set of instances")
    _common(p)
    p.add_argument("paths", nargs="+", help="level files or directories")

    p = sub.add_parser("grid-demo", help="tabular grid-world learning demo")
    _common(p)
    p.add_argument("--no-frames", action="store_true", help="skip per-iteration value/expansion dumps")

    p = sub.add_parser("quality", help="plan length versus oracle optimum on 8-puzzle scrambles")
    _common(p)
    p.add_argument("--k-max", type=int)
    p.add_argument("--boards-per-k", type=int)

    p = sub.add_parser("ablate", help="compare mixing ratios p on matched seeds")
    _common(p)
    p.add_argument("--p-list", type=float, nargs="+")
    p.add_argument("--k-max", type=int)
    p.add_argument("--boards-per-k", type=int)

    p = sub.add_parser("validate", help="replay a plans file against its instances")
    _common(p)
    p.add_argument("plans", help="plans file: one '<id>\\t<plan>' per line")
    p.add_argument("paths", nargs="+", help="level files or directories")

    p = sub.add_parser("oracle", help="optimal plan lengths for small instances")
    _common(p)
    p.add_argument("--time-limit", type=float, default=60.0)
    p.add_argument("paths", nargs="+", help="instance files")
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    cfg = recipe(args.recipe or DEFAULT_RECIPE[args.command])
    if args.config:
        loaded = RunConfig.load(args.config)
        cfg = cfg.override(**{k: v for k, v in loaded.to_dict().items() if v != getattr(RunConfig(), k)})
    flags = {
        "domain": args.domain,
        "seed": args.seed,
        "engine": args.engine,
        "backend": args.backend,
        "p": args.p,
        "budget": args.budget,
        "runs": args.runs,
        "max_iterations": args.max_iterations,
        "out_dir": args.out_dir,
        "workers": args.workers,
        "k_max": getattr(args, "k_max", None),
        "boards_per_k": getattr(args, "boards_per_k", None),
        "p_list": getattr(args, "p_list", None),
    }
    if args.workers is None and args.command == "solve":
        flags["workers"] = os.cpu_count() or 1
    cfg = cfg.override(**flags)
    cfg.validate()
    return cfg


def run(args: argparse.Namespace) -> int:
    cfg = make_config(args)
    cmd = args.command
    if cmd == "solve":
        res = cmd_solve(cfg, args.paths)
        for err in res.errors:
            print(f"parse error: {err}", file=sys.stderr)
        s = res.summary
        print(f"solved {s.solved_count}/{len(res.pool)} in {s.iterations} iterations")
        for iid, n in res.push_counts().items():
            print(f"  {iid}: {n}")
        if res.out_dir:
            print(f"run directory: {res.out_dir}")
        return EXIT_OK
    if cmd == "grid-demo":
        res = cmd_grid_demo(cfg, frames=not args.no_frames)
        print(f"first solve: {res.first_solve}")
        print(f"post-solve re-solves: {sum(res.post_solve)}/{len(res.post_solve)} (stable: {res.stable})")
        print(f"iteration-1 expansion connected: {res.iteration1_connected}")
        return EXIT_OK
    if cmd == "quality":
        res = cmd_quality(cfg)
        print(f"solved {100 * res.solved_fraction:.2f}% of {res.n_instances} (oracle excluded: {len(res.excluded)})")
        for row in res.rows():
            print(f"  +{row['threshold']}: {row['solved_pct']}%")
        return EXIT_OK
    if cmd == "ablate":
        res = cmd_ablate(cfg)
        print("p      solved  iterations  plan_samples  gvi_samples")
        for r in res.rows:
            print(f"{r.p:<6g} {r.solved:>4}/{r.total:<4} {r.iterations:>6}  {r.plan_samples:>12}  {r.gvi_samples:>11}")
        print(f"best solved count at an interior p: {res.best_is_interior}")
        return EXIT_OK
    if cmd == "validate":
        rep = cmd_validate(args.plans, cfg, args.paths)
        for iid, reason in rep.failures:
            print(f"INVALID {iid}: {reason}")
        print(f"{rep.checked - len(rep.failures)}/{rep.checked} plans valid")
        return EXIT_OK if rep.ok else EXIT_INVALID
    if cmd == "oracle":
        instances, errors = load_instances(args.paths, cfg.domain)
        if errors or not instances:
            raise UsageError("could not load instances: " + "; ".join(errors or ["none found"]))
        rep = cmd_oracle(instances, args.time_limit)
        for r in rep.results:
            print(f"{r.instance_id}\t{r.optimal}\t{r.solver}")
        for iid, reason in rep.excluded:
            print(f"{iid}\tEXCLUDED\t{reason}")
        return EXIT_OK
    raise UsageError(f"unknown command {cmd!r}")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    try:
        return run(args)
    except (UsageError, ConfigError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
