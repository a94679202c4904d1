import numpy as np
import pytest

from gvi_planner.config import RunConfig, recipe
from gvi_planner.curriculum import (
    METRIC_FIELDS,
    TaskPool,
    run_iteration,
    run_until_stall,
    sample_instances,
    update_pool,
)
from gvi_planner.domains import InvalidPlan, Plan, corner_grid, goal_puzzle, scramble
from gvi_planner.estimator import ReplayBuffer, TabularEstimator
from gvi_planner.experiments import build_estimator, cmd_grid_demo
from gvi_planner.search import SearchOutcome, SearchGraph

# chi-square critical value, 9 degrees of freedom, upper tail 0.001
CHI2_9_001 = 27.877


def _outcome(inst, plan=None):
    return SearchOutcome(inst.id, "bfs", plan is not None, plan, SearchGraph())


def _tab_cfg(**kw):
    base = dict(domain="npuzzle", backend="tabular", budget=50, instance_batch=4, train_steps=2, train_batch=64)
    base.update(kw)
    return RunConfig(**base)


# --- sampler --------------------------------------------------------------------


def test_uniform_weights_sample_uniformly():
    pool = TaskPool([goal_puzzle(3, id=f"p{i}") for i in range(10)])
    rng = np.random.default_rng(0)
    counts = np.zeros(10)
    ids = [r.instance.id for r in pool.records]
    for _ in range(100_000):
        counts[ids.index(sample_instances(pool, 1, rng)[0].id)] += 1
    expected = 10_000
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < CHI2_9_001


def test_low_weight_drawn_first_rarely():
    pool = TaskPool([goal_puzzle(3, id="low"), goal_puzzle(3, id="high")])
    pool.records[0].weight = 0.05
    rng = np.random.default_rng(1)
    n = 100_000
    first_low = sum(sample_instances(pool, 2, rng)[0].id == "low" for _ in range(n))
    assert abs(first_low / n - 0.05 / 1.05) < 0.003


def test_full_batch_is_permutation():
    pool = TaskPool([goal_puzzle(3, id=f"p{i}") for i in range(6)])
    out = sample_instances(pool, 6, np.random.default_rng(2))
    assert sorted(i.id for i in out) == sorted(r.instance.id for r in pool.records)
    assert len(sample_instances(pool, 50, np.random.default_rng(2))) == 6


def test_sampler_errors():
    with pytest.raises(ValueError):
        sample_instances(TaskPool([]), 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_instances(TaskPool([goal_puzzle(3)]), 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        TaskPool([goal_puzzle(3), goal_puzzle(3)])


# --- pool updates -----------------------------------------------------------------


def test_weight_rules_and_best_plan():
    g = corner_grid(3)
    pool = TaskPool([g])
    rec = pool.records[0]
    short = Plan(g.id, ("U", "U", "R", "R"))
    long = Plan(g.id, ("U", "R", "U", "R", "L", "R"))
    assert update_pool(pool, [_outcome(g, short)]) == [g.id]
    assert rec.weight == 0.5 and rec.best_plan == short
    assert update_pool(pool, [_outcome(g, long)]) == []
    assert rec.best_plan == short and rec.weight == 0.25
    for _ in range(10):
        update_pool(pool, [_outcome(g, short)])
    assert rec.weight == 0.05
    update_pool(pool, [_outcome(g)])
    assert rec.weight == 1.0 and rec.solved


def test_invalid_plan_is_rejected():
    g = corner_grid(3)
    pool = TaskPool([g])
    with pytest.raises(InvalidPlan):
        update_pool(pool, [_outcome(g, Plan(g.id, ("U",)))])
    bad = _outcome(g)
    bad.solved = True
    with pytest.raises(InvalidPlan):
        update_pool(pool, [bad])


# --- iterations -------------------------------------------------------------------


def test_trivial_instance_solved_in_first_iteration():
    inst = scramble(goal_puzzle(3), 1, 0)
    pool = TaskPool([inst])
    buf = ReplayBuffer(1000)
    cfg = _tab_cfg()
    # near-zero values leave the goal child first in line
    rep = run_iteration(pool, TabularEstimator(0.01), buf, cfg, np.random.default_rng(0))
    assert rep.newly_solved == [inst.id] and len(buf.plan) > 0
    assert set(rep.newly_solved) <= set(rep.attempted)
    assert list(rep.row()) == METRIC_FIELDS


def test_failed_iteration_still_trains():
    inst = scramble(goal_puzzle(3), 30, 3)
    pool = TaskPool([inst])
    buf = ReplayBuffer(1000)
    est = TabularEstimator(30.0)
    cfg = _tab_cfg(budget=5)
    before = est.parameter_digest()
    rep = run_iteration(pool, est, buf, cfg, np.random.default_rng(0))
    assert rep.solved_total == 0 and len(buf.plan) == 0 and len(buf.gvi) > 0
    assert rep.train is not None and est.parameter_digest() != before


def test_iterations_deterministic():
    insts = [scramble(goal_puzzle(3), k, k) for k in range(1, 12)]

    def go():
        cfg = _tab_cfg(seed=4, max_iterations=6)
        pool = TaskPool(insts)
        s = run_until_stall(pool, build_estimator(cfg, insts), cfg)
        return [r.row() for r in s.reports]

    assert go() == go()


def test_net_backend_iteration():
    insts = [scramble(goal_puzzle(3), k, k) for k in range(1, 6)]
    cfg = _tab_cfg(backend="net", train_steps=3)
    est = build_estimator(cfg, insts)
    before = est.parameter_digest()
    rep = run_iteration(TaskPool(insts), est, ReplayBuffer(1000), cfg, np.random.default_rng(0))
    assert rep.train is not None and est.parameter_digest() != before


# --- termination ------------------------------------------------------------------


def test_all_solved_at_once_stops_at_eleven():
    insts = [scramble(goal_puzzle(3), 1, s) for s in range(3)]
    cfg = _tab_cfg()
    s = run_until_stall(TaskPool(insts), TabularEstimator(0.01), cfg)
    assert s.reports[0].solved_total == 3
    assert s.iterations == 11 and s.stalled and s.solved_count == 3


def test_unsolvable_pool_stops_after_ten():
    insts = [scramble(goal_puzzle(3), 40, s) for s in range(2)]
    cfg = _tab_cfg(budget=2)
    s = run_until_stall(TaskPool(insts), TabularEstimator(30.0), cfg)
    assert s.iterations == 10 and s.solved_count == 0


def test_iteration_cap():
    insts = [scramble(goal_puzzle(3), 40, s) for s in range(2)]
    s = run_until_stall(TaskPool(insts), TabularEstimator(30.0), _tab_cfg(budget=2, max_iterations=3))
    assert s.iterations == 3 and not s.stalled


def test_monotone_solved_set_and_plan_lengths():
    insts = [scramble(goal_puzzle(3), k, 100 + k) for k in range(2, 25)]
    cfg = _tab_cfg(budget=60, instance_batch=6, max_iterations=25)
    pool = TaskPool(insts)
    solved, lengths = set(), {}

    def check(rep):
        now = set(pool.solved_ids)
        assert solved <= now
        solved.update(now)
        for rec in pool.records:
            if rec.best_plan is not None:
                assert rec.best_plan.length <= lengths.get(rec.instance.id, 10**9)
                lengths[rec.instance.id] = rec.best_plan.length

    run_until_stall(pool, TabularEstimator(20.0), cfg, callback=check)
    assert solved


def test_pure_gvi_changes_parameters_without_solves():
    insts = [scramble(goal_puzzle(3), 40, s) for s in range(3)]
    cfg = _tab_cfg(backend="net", budget=3, p=1.0, max_iterations=4)
    est = build_estimator(cfg, insts)
    digests = [est.parameter_digest()]
    run_until_stall(TaskPool(insts), est, cfg, callback=lambda r: digests.append(r.param_digest))
    assert len(set(digests)) == len(digests)


def test_grid_demo_ends_solved(tmp_path):
    cfg = recipe("grid-demo").override(seed=1, out_dir=str(tmp_path))
    res = cmd_grid_demo(cfg, frames=False)
    assert res.first_solve is not None and res.first_solve <= cfg.grid_iterations
    assert res.reports[-1].solved_total == 1
