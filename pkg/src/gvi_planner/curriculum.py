"""The outer learning loop: sample instances, search, label, train, reweight."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import RunConfig
from .domains import Instance, InvalidPlan, Plan, replay
from .estimator import ReplayBuffer, TrainReport, sample_mixed_batch
from .gvi import gvi_labels, plan_to_samples, to_training_samples
from .search import SearchOutcome, restart_loop

log = logging.getLogger(__name__)

WEIGHT_DECAY = 0.5
WEIGHT_FLOOR = 0.05
WEIGHT_RESET = 1.0


@dataclass
class TaskRecord:
    instance: Instance
    weight: float = 1.0
    solved: bool = False
    best_plan: Plan | None = None
    attempts: int = 0
    last_result: dict | None = None


class TaskPool:
    def __init__(self, instances: Sequence[Instance]):
        ids = [inst.id for inst in instances]
        if len(set(ids)) != len(ids):
            raise ValueError("instance ids in a pool must be unique")
        self.records = [TaskRecord(inst) for inst in instances]
        self.by_id = {r.instance.id: r for r in self.records}

    def __len__(self):
        return len(self.records)

    @property
    def solved_ids(self) -> list[str]:
        return [r.instance.id for r in self.records if r.solved]

    def best_plans(self) -> dict[str, Plan]:
        return {r.instance.id: r.best_plan for r in self.records if r.solved}


def sample_instances(pool: TaskPool, batch: int, rng: np.random.Generator) -> list[Instance]:
    """Weighted sampling without replacement (successive draws proportional to weight).

    Uses exponential-race keys ``-log(u) / w``: the smallest key is drawn
    first with probability proportional to its weight, and so on.
    """
    if len(pool) == 0:
        raise ValueError("cannot sample from an empty pool")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    w = np.array([r.weight for r in pool.records], dtype=float)
    keys = -np.log(1.0 - rng.random(len(w))) / w
    order = np.argsort(keys, kind="stable")[: min(batch, len(w))]
    return [pool.records[i].instance for i in order]


def update_pool(pool: TaskPool, results: Sequence[SearchOutcome]) -> list[str]:
    """Apply weight/solution updates; returns ids solved for the first time."""
    newly = []
    for res in results:
        rec = pool.by_id[res.instance_id]
        rec.attempts += 1
        rec.last_result = res.record()
        if res.solved:
            if res.plan is None:
                raise InvalidPlan(f"{res.instance_id}: solved outcome without a plan")
            replay(rec.instance, res.plan)
            if not rec.solved:
                newly.append(res.instance_id)
            rec.solved = True
            if rec.best_plan is None or res.plan.length < rec.best_plan.length:
                rec.best_plan = res.plan
            rec.weight = max(rec.weight * WEIGHT_DECAY, WEIGHT_FLOOR)
        else:
            rec.weight = WEIGHT_RESET
    return newly


@dataclass
class IterationReport:
    iteration: int
    attempted: list
    newly_solved: list
    solved_total: int
    solved_this_iteration: int = 0
    expanded: int = 0
    generated: int = 0
    unique_states: int = 0
    duplicate_hits: int = 0
    plan_samples: int = 0
    gvi_samples: int = 0
    buffer_plan: int = 0
    buffer_gvi: int = 0
    train: TrainReport | None = None
    param_digest: str = ""
    wall_time: float = 0.0
    outcomes: list = field(default_factory=list, repr=False)

    @property
    def unique_ratio(self) -> float:
        return self.unique_states / self.expanded if self.expanded else 0.0

    def row(self) -> dict:
        """Deterministic metrics row (no timing)."""
        t = self.train
        return {
            "iteration": self.iteration,
            "attempted": len(self.attempted),
            "solved_this_iteration": self.solved_this_iteration,
            "newly_solved": len(self.newly_solved),
            "solved_total": self.solved_total,
            "expanded": self.expanded,
            "generated": self.generated,
            "unique_states": self.unique_states,
            "duplicate_hits": self.duplicate_hits,
            "unique_ratio": f"{self.unique_ratio:.6f}",
            "plan_samples": self.plan_samples,
            "gvi_samples": self.gvi_samples,
            "buffer_plan": self.buffer_plan,
            "buffer_gvi": self.buffer_gvi,
            "train_samples_plan": t.n_plan if t else 0,
            "train_samples_gvi": t.n_gvi if t else 0,
            "loss_before": f"{t.loss_before:.6g}" if t else "",
            "loss_after": f"{t.loss_after:.6g}" if t else "",
            "param_digest": self.param_digest,
        }


METRIC_FIELDS = list(IterationReport(0, [], [], 0).row())


def _move_cap(cfg: RunConfig, rec: TaskRecord) -> int:
    if cfg.move_cap:
        return cfg.move_cap
    best = rec.best_plan.length if rec.best_plan is not None else 0
    return max(500, 2 * best)


def _search_one(args):
    inst, est, cfg, move_cap, seed = args
    return restart_loop(
        inst,
        est,
        cfg.search_budget,
        runs=cfg.runs,
        engine=cfg.engine,
        weight=cfg.weight,
        sims_per_move=cfg.sims_per_move,
        move_cap=move_cap,
        restart_noise=cfg.restart_noise,
        seed=seed,
    )


def collect_samples(outcome: SearchOutcome, inst: Instance, cfg: RunConfig):
    samples = []
    for graph in outcome.graphs:
        labels = gvi_labels(graph, freeze_open_labels=cfg.freeze_open_labels)
        samples.extend(to_training_samples(labels, budget_hint=cfg.dead_end_hint, inst=inst))
    plan_samples = []
    if outcome.solved:
        plan_samples = plan_to_samples(outcome.plan, replay(inst, outcome.plan), inst)
    return plan_samples, samples


def run_iteration(
    pool: TaskPool,
    est,
    buffers: ReplayBuffer,
    cfg: RunConfig,
    rng: np.random.Generator,
    iteration: int = 1,
    executor: ProcessPoolExecutor | None = None,
) -> IterationReport:
    t0 = time.perf_counter()
    batch = sample_instances(pool, cfg.instance_batch, rng)
    tasks = [
        (inst, est, cfg, _move_cap(cfg, pool.by_id[inst.id]), [cfg.seed, iteration, i])
        for i, inst in enumerate(batch)
    ]
    if executor is not None and len(tasks) > 1:
        outcomes = list(executor.map(_search_one, tasks))
    else:
        outcomes = [_search_one(t) for t in tasks]

    plan_n = gvi_n = 0
    for inst, out in zip(batch, outcomes):
        plan_s, gvi_s = collect_samples(out, inst, cfg)
        buffers.add(plan_s)
        buffers.add(gvi_s)
        plan_n += len(plan_s)
        gvi_n += len(gvi_s)

    train = None
    for _ in range(cfg.train_steps):
        mb = sample_mixed_batch(buffers, cfg.train_batch, cfg.p, rng)
        if not mb:
            break
        rep = est.fit_batch(mb)
        if train is None:
            train = TrainReport(0, rep.loss_before, rep.loss_after)
        train.batch_size += rep.batch_size
        train.n_plan += rep.n_plan
        train.n_gvi += rep.n_gvi
        train.loss_after = rep.loss_after

    newly = update_pool(pool, outcomes)
    report = IterationReport(
        iteration=iteration,
        attempted=[inst.id for inst in batch],
        newly_solved=newly,
        solved_total=len(pool.solved_ids),
        solved_this_iteration=sum(o.solved for o in outcomes),
        expanded=sum(o.expanded for o in outcomes),
        generated=sum(o.generated for o in outcomes),
        unique_states=sum(o.unique_states for o in outcomes),
        duplicate_hits=sum(o.duplicate_hits for o in outcomes),
        plan_samples=plan_n,
        gvi_samples=gvi_n,
        buffer_plan=len(buffers.plan),
        buffer_gvi=len(buffers.gvi),
        train=train,
        param_digest=est.parameter_digest(),
        outcomes=outcomes,
    )
    report.wall_time = time.perf_counter() - t0
    return report


@dataclass
class RunSummary:
    iterations: int
    solved: dict
    reports: list
    stalled: bool

    @property
    def solved_count(self) -> int:
        return len(self.solved)


def run_until_stall(
    pool: TaskPool,
    est,
    cfg: RunConfig,
    buffers: ReplayBuffer | None = None,
    rng: np.random.Generator | None = None,
    callback: Callable[[IterationReport], None] | None = None,
) -> RunSummary:
    """Iterate until ``cfg.stall_window`` consecutive iterations add no new solve."""
    buffers = buffers if buffers is not None else ReplayBuffer(cfg.buffer_capacity)
    rng = rng if rng is not None else np.random.default_rng([cfg.seed, 1])
    executor = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    reports = []
    quiet = 0
    stalled = False
    try:
        for it in range(1, cfg.max_iterations + 1):
            rep = run_iteration(pool, est, buffers, cfg, rng, iteration=it, executor=executor)
            reports.append(rep)
            log.info(
                "iter %d solved %d/%d (+%d) expanded %d",
                it, rep.solved_total, len(pool), len(rep.newly_solved), rep.expanded,
            )
            if callback is not None:
                callback(rep)
            rep.outcomes = []
            quiet = 0 if rep.newly_solved else quiet + 1
            if quiet >= cfg.stall_window:
                stalled = True
                break
    finally:
        if executor is not None:
            executor.shutdown()
    for rec in pool.records:
        if rec.solved:
            replay(rec.instance, rec.best_plan)
    return RunSummary(len(reports), pool.best_plans(), reports, stalled)


def solved_within(best: dict, optimal: dict, slack: int) -> float:
    """Fraction of instances in ``optimal`` whose best plan is within ``slack`` of optimum."""
    if not optimal:
        return math.nan
    ok = sum(1 for iid, opt in optimal.items() if iid in best and best[iid].length <= opt + slack)
    return ok / len(optimal)
