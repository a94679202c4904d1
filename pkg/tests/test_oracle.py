import random

import pytest

from gvi_planner.domains import GridInstance, PuzzleInstance, corner_grid, goal_puzzle, scramble
from gvi_planner.oracle import (
    BFS,
    IDA,
    OracleError,
    bfs_optimal,
    ida_optimal,
    oracle_optimal,
    puzzle_distance_table,
)
from oracles import bfs_distance


def test_goal_instance_is_zero():
    assert oracle_optimal(goal_puzzle(3)).optimal == 0
    assert ida_optimal(goal_puzzle(3)).optimal == 0
    assert bfs_optimal(goal_puzzle(3)).optimal == 0


def test_table_covers_every_solvable_state():
    table = puzzle_distance_table(3)
    assert len(table) == 181_440  # 9! / 2


def test_hardest_instances_need_31_moves():
    table = puzzle_distance_table(3)
    top = max(table.values())
    hardest = [s for s, d in table.items() if d == top]
    assert top == 31 and len(hardest) == 2
    # forward search from each start is independent of the backward table
    for s in hardest:
        assert bfs_optimal(PuzzleInstance("h", 3, s)).optimal == 31
        res = ida_optimal(PuzzleInstance("h", 3, s))
        assert res.optimal == 31 and res.solver == IDA


def test_open_grid_corner_to_corner():
    res = oracle_optimal(corner_grid(50))
    assert res.optimal == 98 and res.solver == BFS


def test_grid_with_wall_detour():
    walls = frozenset((1, c) for c in range(4))
    g = GridInstance("w", 3, 5, (0, 0), (2, 0), walls)
    assert oracle_optimal(g).optimal == 2 + 4 + 4


def test_solvers_agree_on_random_scrambles():
    rng = random.Random(3)
    for _ in range(30):
        inst = scramble(goal_puzzle(3), rng.randint(0, 30), rng.randrange(10**6))
        want = puzzle_distance_table(3)[inst.start]
        assert ida_optimal(inst).optimal == want
        assert bfs_distance(inst) == want


def test_k1_scramble_is_zero_or_one():
    for seed in range(20):
        assert oracle_optimal(scramble(goal_puzzle(3), 1, seed)).optimal in (0, 1)


def test_caps_raise():
    inst = scramble(goal_puzzle(3), 40, 1)
    with pytest.raises(OracleError):
        bfs_optimal(inst, max_states=100)
    with pytest.raises(OracleError):
        ida_optimal(inst, max_nodes=10)
    with pytest.raises(OracleError):
        puzzle_distance_table(4)
    with pytest.raises(OracleError):
        bfs_optimal(GridInstance("cut", 1, 3, (0, 0), (0, 2), frozenset({(0, 1)})))


def test_fifteen_puzzle_uses_ida():
    inst = scramble(goal_puzzle(4), 12, 5)
    res = oracle_optimal(inst, time_limit=30)
    assert res.solver == IDA and res.optimal == bfs_distance(inst)
