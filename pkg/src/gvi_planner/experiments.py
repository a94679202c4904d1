"""Experiment drivers behind the command-line interface.

Each ``cmd_*`` function takes a :class:`RunConfig`, does its work, writes
its artifacts under ``cfg.out_dir`` (when one is given) and returns a
result object the CLI and the tests inspect.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import RunConfig
from .curriculum import (
    METRIC_FIELDS,
    IterationReport,
    RunSummary,
    TaskPool,
    run_iteration,
    run_until_stall,
    solved_within,
)
from .domains import (
    DomainError,
    GridInstance,
    Instance,
    InvalidPlan,
    corner_grid,
    goal_puzzle,
    load_levels,
    parse_puzzle_file,
    scramble,
)
from .estimator import ReplayBuffer, make_estimator, save_checkpoint
from .oracle import OracleError, oracle_optimal
from .search import OPEN

log = logging.getLogger(__name__)

LEVEL_SUFFIXES = (".xsb", ".sok", ".txt")


class UsageError(ValueError):
    """Bad inputs: nothing to load, unreadable files, wrong domain."""


# ------------------------------------------------------------------ loading


def _expand(paths: Iterable[str | Path], suffixes: Sequence[str]) -> list[Path]:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(f for f in p.iterdir() if f.suffix.lower() in suffixes))
        elif p.exists():
            files.append(p)
        else:
            raise UsageError(f"{p}: no such file or directory")
    return files


def _load_file(path: Path, domain: str) -> list[Instance]:
    if domain == "sokoban":
        return list(load_levels(path))
    text = path.read_text()
    if domain == "npuzzle":
        return list(parse_puzzle_file(text, prefix=f"{path.stem}-"))
    data = json.loads(text)
    entries = data if isinstance(data, list) else [data]
    return [GridInstance.from_config(e) for e in entries]


def load_instances(paths: Iterable[str | Path], domain: str) -> tuple[list[Instance], list[str]]:
    """Instances from every readable file plus one error message per bad file."""
    suffixes = LEVEL_SUFFIXES if domain == "sokoban" else (".txt", ".json")
    instances, errors = [], []
    for f in _expand(paths, suffixes):
        try:
            instances.extend(_load_file(f, domain))
        except (DomainError, ValueError, KeyError, TypeError) as exc:
            errors.append(f"{f}: {exc}")
            log.error("%s: %s", f, exc)
    seen = set()
    for inst in instances:
        if inst.id in seen:
            raise UsageError(f"duplicate instance id {inst.id!r}")
        seen.add(inst.id)
    return instances, errors


def scramble_suite(cfg: RunConfig, side: int = 3) -> list[Instance]:
    """``boards_per_k`` scrambles for every k in 1..k_max, seeded from the scrambler substream."""
    rng = np.random.default_rng([cfg.seed, 2])
    base = goal_puzzle(side)
    out = []
    for k in range(1, cfg.k_max + 1):
        for j in range(cfg.boards_per_k):
            inst = scramble(base, k, int(rng.integers(2**31)))
            out.append(inst.with_start(inst.start, f"k{k:02d}-{j:03d}"))
    return out


def build_estimator(cfg: RunConfig, instances: Sequence[Instance]):
    if cfg.backend == "tabular":
        return make_estimator("tabular", init_range=cfg.init_range, lr=cfg.learning_rate, seed=cfg.seed)
    shapes = [inst.encoding_shape() for inst in instances]
    shape = tuple(max(dims) for dims in zip(*shapes))
    return make_estimator(
        "net",
        shape,
        hidden=cfg.hidden,
        lr=cfg.learning_rate,
        seed=cfg.seed,
        optimizer=cfg.optimizer,
        momentum=cfg.momentum,
    )


# ---------------------------------------------------------------- run files


class RunWriter:
    """Run directory: config snapshot, metrics, timings, plans, checkpoints."""

    def __init__(self, out_dir: str | Path | None, cfg: RunConfig):
        self.root = Path(out_dir) if out_dir else None
        self.cfg = cfg
        self._metrics = self._timing = None
        if self.root is None:
            return
        self.root.mkdir(parents=True, exist_ok=True)
        cfg.save(self.root / "config.json")
        self._metrics = open(self.root / "metrics.csv", "w", newline="")
        self._metrics_csv = csv.DictWriter(self._metrics, fieldnames=METRIC_FIELDS, lineterminator="\n")
        self._metrics_csv.writeheader()
        self._timing = open(self.root / "timing.csv", "w", newline="")
        self._timing.write("iteration,wall_time_s\n")

    def report(self, rep: IterationReport, est=None, rng=None) -> None:
        if self.root is None:
            return
        self._metrics_csv.writerow(rep.row())
        self._metrics.flush()
        self._timing.write(f"{rep.iteration},{rep.wall_time:.6f}\n")
        self._timing.flush()
        every = self.cfg.checkpoint_every
        if est is not None and every and rep.iteration % every == 0:
            ckpt = self.root / "checkpoints"
            ckpt.mkdir(exist_ok=True)
            state = rng.bit_generator.state if rng is not None else None
            save_checkpoint(est, ckpt / f"iter_{rep.iteration:04d}.npz", state)

    def plans(self, pool: TaskPool) -> None:
        if self.root is None:
            return
        write_plans(self.root / "plans.txt", pool)

    def write(self, name: str, text: str) -> Path | None:
        if self.root is None:
            return None
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        return path

    def close(self) -> None:
        for fh in (self._metrics, self._timing):
            if fh is not None:
                fh.close()


def write_plans(path: str | Path, pool: TaskPool) -> None:
    lines = []
    for rec in pool.records:
        if rec.solved:
            lines.append(f"{rec.instance.id}\t{rec.instance.plan_to_string(rec.best_plan.actions)}")
    Path(path).write_text("".join(line + "\n" for line in lines))


def _curriculum(cfg: RunConfig, instances: Sequence[Instance], writer: RunWriter, callback=None) -> tuple[RunSummary, TaskPool]:
    pool = TaskPool(instances)
    est = build_estimator(cfg, instances)
    rng = np.random.default_rng([cfg.seed, 1])

    def on_report(rep):
        writer.report(rep, est, rng)
        if callback is not None:
            callback(rep)

    summary = run_until_stall(pool, est, cfg, ReplayBuffer(cfg.buffer_capacity), rng, on_report)
    writer.plans(pool)
    return summary, pool


# -------------------------------------------------------------------- solve


@dataclass
class SolveResult:
    summary: RunSummary
    pool: TaskPool
    errors: list
    out_dir: Path | None

    def push_counts(self) -> dict:
        """Plan length per solved instance (pushes for Sokoban, moves otherwise)."""
        return {iid: plan.length for iid, plan in self.summary.solved.items()}


def cmd_solve(cfg: RunConfig, paths: Sequence[str | Path]) -> SolveResult:
    instances, errors = load_instances(paths, cfg.domain)
    if not instances:
        raise UsageError("no instances loaded" + (": " + "; ".join(errors) if errors else ""))
    writer = RunWriter(cfg.out_dir, cfg)
    try:
        summary, pool = _curriculum(cfg, instances, writer)
    finally:
        writer.close()
    return SolveResult(summary, pool, errors, writer.root)


# ---------------------------------------------------------------- grid demo


def value_table(est, inst: GridInstance) -> np.ndarray:
    """Estimator values indexed ``[row, col]``; walls are NaN."""
    out = np.full((inst.height, inst.width), np.nan)
    for r, c in inst.cells():
        out[r, c] = est.evaluate((r, c), inst)
    return out


def expanded_cells(graph) -> set:
    return {s for s, st in zip(graph.states, graph.status) if st != OPEN}


def is_connected(cells: set, start) -> bool:
    """True if ``cells`` is one 4-connected region containing ``start``."""
    if start not in cells:
        return False
    seen = {start}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        for nb in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if nb in cells and nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return len(seen) == len(cells)


def _matrix_text(rows) -> str:
    return "".join(" ".join(row) + "\n" for row in rows)


@dataclass
class GridDemoResult:
    first_solve: int | None
    post_solve: list = field(default_factory=list)
    iteration1_connected: bool = False
    reports: list = field(default_factory=list, repr=False)
    out_dir: Path | None = None

    @property
    def stable(self) -> bool:
        """Every logged iteration after the first solve re-solved."""
        return self.first_solve is not None and bool(self.post_solve) and all(self.post_solve)


def cmd_grid_demo(cfg: RunConfig, instance: GridInstance | None = None, frames: bool = True) -> GridDemoResult:
    """Single-instance grid curriculum with per-iteration value and expansion dumps.

    Runs until the first solve (at most ``grid_iterations``) and then
    ``grid_post_solve`` more iterations, never more than ``max_iterations``
    in total. Frames are row-major text
    matrices with row 0 first (the bottom row of the board).
    """
    if cfg.backend != "tabular":
        raise UsageError("grid-demo needs the tabular backend")
    inst = instance or corner_grid(cfg.grid_size)
    writer = RunWriter(cfg.out_dir, cfg)
    pool = TaskPool([inst])
    est = build_estimator(cfg, [inst])
    buffers = ReplayBuffer(cfg.buffer_capacity)
    rng = np.random.default_rng([cfg.seed, 1])
    result = GridDemoResult(None, out_dir=writer.root)
    try:
        it = 0
        while True:
            it += 1
            rep = run_iteration(pool, est, buffers, cfg, rng, iteration=it)
            writer.report(rep, est, rng)
            cells = set()
            for out in rep.outcomes:
                for g in out.graphs:
                    cells |= expanded_cells(g)
            if it == 1:
                result.iteration1_connected = is_connected(cells, inst.start)
            if frames and writer.root is not None:
                vals = value_table(est, inst)
                writer.write(
                    f"frames/values_{it:04d}.txt",
                    _matrix_text([[("nan" if math.isnan(v) else f"{v:.4f}") for v in row] for row in vals]),
                )
                mask = [["1" if (r, c) in cells else "0" for c in range(inst.width)] for r in range(inst.height)]
                writer.write(f"frames/expanded_{it:04d}.txt", _matrix_text(mask))
            rep.outcomes = []
            result.reports.append(rep)
            if result.first_solve is None:
                if rep.solved_this_iteration:
                    result.first_solve = it
                elif it >= cfg.grid_iterations:
                    break
            else:
                result.post_solve.append(bool(rep.solved_this_iteration))
                if len(result.post_solve) >= cfg.grid_post_solve:
                    break
            if it >= cfg.max_iterations:
                break
        writer.plans(pool)
        writer.write(
            "grid_summary.json",
            json.dumps(
                {
                    "first_solve": result.first_solve,
                    "post_solve": result.post_solve,
                    "stable": result.stable,
                    "iteration1_connected": result.iteration1_connected,
                },
                indent=2,
            )
            + "\n",
        )
    finally:
        writer.close()
    return result


# ------------------------------------------------------------------ oracle


@dataclass
class OracleReport:
    results: list
    excluded: list

    def optimal(self) -> dict:
        return {r.instance_id: r.optimal for r in self.results}


def cmd_oracle(instances: Sequence[Instance], time_limit: float | None = 60.0) -> OracleReport:
    results, excluded = [], []
    for inst in instances:
        try:
            results.append(oracle_optimal(inst, time_limit=time_limit))
        except OracleError as exc:
            excluded.append((inst.id, str(exc)))
    return OracleReport(results, excluded)


# ----------------------------------------------------------------- quality


@dataclass
class QualityResult:
    thresholds: list
    solved_pct: list
    solved_fraction: float
    n_instances: int
    excluded: list
    summary: RunSummary = field(repr=False, default=None)

    def rows(self) -> list[dict]:
        return [{"threshold": t, "solved_pct": f"{100 * v:.2f}"} for t, v in zip(self.thresholds, self.solved_pct)]


def cmd_quality(cfg: RunConfig, instances: Sequence[Instance] | None = None, oracle_time_limit: float = 60.0) -> QualityResult:
    """Solved percentage within +t of the optimum for each threshold t.

    The learner's search is never pruned by depth; instances whose oracle
    fails are excluded from the pool and counted.
    """
    if cfg.domain != "npuzzle":
        raise UsageError("quality needs the npuzzle domain")
    instances = list(instances) if instances is not None else scramble_suite(cfg)
    oracle = cmd_oracle(instances, oracle_time_limit)
    optimal = oracle.optimal()
    kept = [inst for inst in instances if inst.id in optimal]
    if not kept:
        raise UsageError("no instance has an oracle optimum")
    writer = RunWriter(cfg.out_dir, cfg)
    try:
        summary, _ = _curriculum(cfg, kept, writer)
        thresholds = sorted(cfg.thresholds)
        pct = [solved_within(summary.solved, optimal, t) for t in thresholds]
        result = QualityResult(thresholds, pct, summary.solved_count / len(kept), len(kept), oracle.excluded, summary)
        lines = ["threshold,solved_pct\n"] + [f"{r['threshold']},{r['solved_pct']}\n" for r in result.rows()]
        writer.write("quality.csv", "".join(lines))
        writer.write("oracle.csv", "instance,optimal,solver\n" + "".join(
            f"{r.instance_id},{r.optimal},{r.solver}\n" for r in oracle.results
        ))
    finally:
        writer.close()
    return result


# ------------------------------------------------------------------ ablation


@dataclass
class AblationRow:
    p: float
    solved: int
    total: int
    iterations: int
    plan_samples: int
    gvi_samples: int


@dataclass
class AblationResult:
    rows: list

    @property
    def best_is_interior(self) -> bool:
        """Whether some p strictly inside (0, 1) has the top solved count."""
        if not self.rows:
            return False
        best = max(r.solved for r in self.rows)
        return any(0.0 < r.p < 1.0 and r.solved == best for r in self.rows)


def cmd_ablate(cfg: RunConfig, instances: Sequence[Instance] | None = None) -> AblationResult:
    """Matched-seed curricula, one per mixing ratio in ``cfg.p_list``."""
    if len(cfg.p_list) < 2:
        raise UsageError("ablation needs at least two values of p")
    instances = list(instances) if instances is not None else scramble_suite(cfg)
    rows = []
    base = Path(cfg.out_dir) if cfg.out_dir else None
    for p in cfg.p_list:
        sub = cfg.override(p=p, out_dir=str(base / f"p{p:g}") if base else "")
        writer = RunWriter(sub.out_dir, sub)
        try:
            summary, _ = _curriculum(sub, instances, writer)
        finally:
            writer.close()
        rows.append(
            AblationRow(
                p,
                summary.solved_count,
                len(instances),
                summary.iterations,
                sum(r.plan_samples for r in summary.reports),
                sum(r.gvi_samples for r in summary.reports),
            )
        )
    result = AblationResult(rows)
    if base is not None:
        lines = ["p,solved,total,iterations,plan_samples,gvi_samples\n"]
        lines += [f"{r.p:g},{r.solved},{r.total},{r.iterations},{r.plan_samples},{r.gvi_samples}\n" for r in rows]
        (base / "ablation.csv").write_text("".join(lines))
    return result


# ------------------------------------------------------------------ validate


@dataclass
class ValidationReport:
    checked: int
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def read_plans(path: str | Path) -> list[tuple[str, str]]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        iid, sep, plan = line.partition("\t")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected '<id>\\t<plan>'")
        out.append((iid.strip(), plan.strip()))
    return out


def validate_plans(entries: Sequence[tuple[str, str]], instances: Sequence[Instance]) -> ValidationReport:
    by_id = {inst.id: inst for inst in instances}
    failures = []
    for iid, text in entries:
        inst = by_id.get(iid)
        if inst is None:
            failures.append((iid, "unknown instance"))
            continue
        try:
            final = inst.replay_string(text)
        except InvalidPlan as exc:
            failures.append((iid, str(exc)))
            continue
        if not inst.is_goal(final):
            failures.append((iid, "plan ends off-goal"))
    return ValidationReport(len(entries), failures)


def cmd_validate(plans_path: str | Path, cfg: RunConfig, paths: Sequence[str | Path]) -> ValidationReport:
    instances, errors = load_instances(paths, cfg.domain)
    if errors or not instances:
        raise UsageError("could not load instances: " + "; ".join(errors or ["none found"]))
    return validate_plans(read_plans(plans_path), instances)
