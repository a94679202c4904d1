"""Independent reference implementations used only by the tests.

They are deliberately written differently from the package code (dense
Bellman-Ford instead of a heap, plain flood fills, exhaustive BFS) so an
agreement is evidence rather than a tautology.
"""

from __future__ import annotations

import math
import random
from collections import deque

from gvi_planner.search import CLOSED, GOAL, OPEN, SearchGraph


def bellman_ford_labels(graph: SearchGraph) -> dict:
    """Min-plus relaxation over reversed unit edges until nothing changes.

    Returns ``{node_id: d}`` for every node outside the open set (goals
    leave the open set even when they were never expanded).
    """
    n = len(graph)
    d = []
    for u in range(n):
        if graph.goal[u]:
            d.append(0.0)
        elif graph.status[u] == OPEN:
            d.append(float(graph.h[u]))
        else:
            d.append(math.inf)
    for _ in range(n + 1):
        changed = False
        for u in range(n):
            for v in graph.succ[u]:
                if d[v] + 1.0 < d[u]:
                    d[u] = d[v] + 1.0
                    changed = True
        if not changed:
            break
    return {u: d[u] for u in range(n) if graph.goal[u] or graph.status[u] != OPEN}


def random_graph(rng: random.Random, max_nodes: int = 200, p_goal: float = 0.05) -> SearchGraph:
    """A well-formed search graph: only closed nodes carry out-edges."""
    n = rng.randint(1, max_nodes)
    g = SearchGraph(graph_id="fuzz")
    n_closed = rng.randint(1, n)
    for i in range(n):
        is_goal = rng.random() < p_goal
        h = rng.uniform(0.0, 50.0)
        if rng.random() < 0.2:
            h = float(rng.randint(0, 50))  # integer potentials create ties
        g.add_node(("s", i), h, 0, is_goal=is_goal)
        if i < n_closed:
            g.status[i] = GOAL if (is_goal and rng.random() < 0.5) else CLOSED
    max_out = rng.randint(0, 5)
    for u in range(n_closed):
        if g.status[u] == GOAL:
            continue
        for _ in range(rng.randint(0, max_out)):
            g.add_edge(u, rng.randrange(n))
    # shuffle which ids are closed so open nodes are not always the tail
    return relabel(g, rng.sample(range(n), n))


def relabel(graph: SearchGraph, perm: list) -> SearchGraph:
    """Copy of ``graph`` where old node ``u`` becomes ``perm[u]``."""
    n = len(graph)
    inv = [0] * n
    for old, new in enumerate(perm):
        inv[new] = old
    out = SearchGraph(graph_id=graph.graph_id)
    for new in range(n):
        old = inv[new]
        out.add_node(graph.states[old], graph.h[old], graph.g[old], is_goal=graph.goal[old])
        out.status[new] = graph.status[old]
    for old, outs in enumerate(graph.succ):
        for v in outs:
            out.add_edge(perm[old], perm[v])
    return out


def flood_fill(floor: set, start, blocked: set) -> set:
    seen = {start}
    todo = [start]
    while todo:
        r, c = todo.pop()
        for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if nb in floor and nb not in blocked and nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return seen


def bfs_distance(inst, start=None, limit: int = 1_000_000):
    """Shortest unit-cost distance from ``start`` to any goal, or None."""
    start = inst.start if start is None else start
    if inst.is_goal(start):
        return 0
    dist = {start: 0}
    q = deque([start])
    while q and len(dist) < limit:
        s = q.popleft()
        for _, t in inst.successors(s):
            if t not in dist:
                dist[t] = dist[s] + 1
                if inst.is_goal(t):
                    return dist[t]
                q.append(t)
    return None
