"""Exact optimal plan lengths for small instances (8-puzzle, grids)."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

from .domains import GridInstance, Instance, PuzzleInstance

BFS, IDA = "bfs", "ida-manhattan"


class OracleError(RuntimeError):
    """Raised when an oracle exceeds its state or time cap."""


@dataclass(frozen=True)
class OracleResult:
    instance_id: str
    optimal: int
    solver: str


def bfs_optimal(inst: Instance, max_states: int = 2_000_000, time_limit: float | None = None) -> OracleResult:
    """Breadth-first search from the start; complete and exact on unit costs."""
    t0 = time.perf_counter()
    if inst.is_goal(inst.start):
        return OracleResult(inst.id, 0, BFS)
    depth = {inst.start: 0}
    queue = deque([inst.start])
    while queue:
        s = queue.popleft()
        d = depth[s]
        for _, nxt in inst.successors(s):
            if nxt in depth:
                continue
            if inst.is_goal(nxt):
                return OracleResult(inst.id, d + 1, BFS)
            depth[nxt] = d + 1
            if len(depth) > max_states:
                raise OracleError(f"{inst.id}: state cap {max_states} exceeded")
            queue.append(nxt)
        if time_limit is not None and time.perf_counter() - t0 > time_limit:
            raise OracleError(f"{inst.id}: time limit {time_limit}s exceeded")
    raise OracleError(f"{inst.id}: goal unreachable")


def ida_optimal(inst: PuzzleInstance, max_nodes: int = 50_000_000, time_limit: float | None = None) -> OracleResult:
    """Iterative deepening with the Manhattan-distance bound."""
    t0 = time.perf_counter()
    nodes = 0
    path = [inst.start]

    def dfs(g: int, bound: int, prev) -> int | None:
        nonlocal nodes
        s = path[-1]
        f = g + inst.manhattan(s)
        if f > bound:
            return f
        if inst.is_goal(s):
            return None
        nodes += 1
        if nodes > max_nodes:
            raise OracleError(f"{inst.id}: node cap {max_nodes} exceeded")
        if time_limit is not None and nodes % 4096 == 0 and time.perf_counter() - t0 > time_limit:
            raise OracleError(f"{inst.id}: time limit {time_limit}s exceeded")
        best = None
        for _, nxt in inst.successors(s):
            if nxt == prev:
                continue
            path.append(nxt)
            t = dfs(g + 1, bound, s)
            if t is None:
                return None
            path.pop()
            best = t if best is None else min(best, t)
        return best if best is not None else 10**9

    bound = inst.manhattan(inst.start)
    while True:
        t = dfs(0, bound, None)
        if t is None:
            return OracleResult(inst.id, len(path) - 1, IDA)
        if t >= 10**9:
            raise OracleError(f"{inst.id}: goal unreachable")
        bound = t


@lru_cache(maxsize=4)
def puzzle_distance_table(side: int = 3) -> dict:
    """Distance to the goal for every solvable configuration (exhaustive BFS)."""
    if side > 3:
        raise OracleError("exhaustive tables are only feasible up to the 8-puzzle")
    inst = PuzzleInstance("table", side, tuple(range(side * side)))
    goal = inst.goal_state()
    dist = {goal: 0}
    queue = deque([goal])
    while queue:
        s = queue.popleft()
        d = dist[s] + 1
        for _, nxt in inst.successors(s):
            if nxt not in dist:
                dist[nxt] = d
                queue.append(nxt)
    return dist


def oracle_optimal(inst: Instance, time_limit: float | None = None) -> OracleResult:
    if isinstance(inst, PuzzleInstance):
        if inst.side <= 3:
            return OracleResult(inst.id, puzzle_distance_table(inst.side)[inst.start], BFS)
        return ida_optimal(inst, time_limit=time_limit)
    if isinstance(inst, GridInstance):
        return bfs_optimal(inst, time_limit=time_limit)
    raise OracleError(f"no oracle for domain {inst.domain!r}")
