"""Estimator-guided graph search that records the search graph.

Two engines are provided: weighted best-first search (``f = g + w*h``) and
UCT-style Monte Carlo tree search with ``r(s) = -log h(s)`` leaf rewards.
Both return a :class:`SearchOutcome` whose graph is the input to graph value
iteration.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np

from .domains import Instance, Plan, State

OPEN, CLOSED, GOAL = "open", "closed", "goal"
LEAF_EPS = 1e-3


class SearchError(RuntimeError):
    pass


class Evaluator(Protocol):
    def evaluate_batch(self, states: Sequence[State], inst: Instance) -> np.ndarray: ...


class EvalCache:
    """Per-instance cache of estimator outputs (the transposition table).

    Outputs are clamped at zero so graph value iteration always sees
    nonnegative open-node potentials.
    """

    def __init__(self, est: Evaluator, inst: Instance):
        self.est = est
        self.inst = inst
        self.table: dict[State, float] = {}
        self.calls = 0

    def __len__(self):
        return len(self.table)

    def __contains__(self, state):
        return state in self.table

    def get(self, states: Sequence[State]) -> list[float]:
        table = self.table
        missing = [s for s in dict.fromkeys(states) if s not in table]
        if missing:
            self.calls += 1
            values = np.asarray(self.est.evaluate_batch(missing, self.inst), dtype=float)
            if values.shape != (len(missing),) or not np.all(np.isfinite(values)):
                raise SearchError("estimator returned malformed output")
            for s, v in zip(missing, values):
                table[s] = max(float(v), 0.0)
        return [table[s] for s in states]


@dataclass
class SearchGraph:
    """Nodes and expansion edges recorded by one search run."""

    states: list = field(default_factory=list)
    h: list = field(default_factory=list)
    g: list = field(default_factory=list)
    parent: list = field(default_factory=list)
    parent_action: list = field(default_factory=list)
    status: list = field(default_factory=list)
    goal: list = field(default_factory=list)
    succ: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    graph_id: str = ""

    def __len__(self):
        return len(self.states)

    def add_node(self, state, h, g=0, parent=None, action=None, is_goal=False) -> int:
        if state in self.index:
            raise SearchError(f"duplicate state {state!r} in search graph")
        nid = len(self.states)
        self.states.append(state)
        self.h.append(float(h))
        self.g.append(g)
        self.parent.append(parent)
        self.parent_action.append(action)
        self.status.append(OPEN)
        self.goal.append(bool(is_goal))
        self.succ.append([])
        self.index[state] = nid
        return nid

    def add_edge(self, u: int, v: int) -> bool:
        if v in self.succ[u]:
            return False
        self.succ[u].append(v)
        return True

    @property
    def open_set(self) -> list[int]:
        return [i for i, s in enumerate(self.status) if s == OPEN]

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self.succ)

    def predecessors(self) -> list[list[int]]:
        pred: list[list[int]] = [[] for _ in self.states]
        for u, outs in enumerate(self.succ):
            for v in outs:
                pred[v].append(u)
        return pred

    def check(self) -> None:
        """Raise :class:`SearchError` unless the graph is well formed."""
        if len(self.index) != len(self.states):
            raise SearchError("dedup index out of sync with nodes")
        for s, i in self.index.items():
            if self.states[i] != s:
                raise SearchError("dedup index points at the wrong node")
        n = len(self.states)
        for u, outs in enumerate(self.succ):
            if outs and self.status[u] == OPEN:
                raise SearchError(f"open node {u} has outgoing edges")
            if len(set(outs)) != len(outs):
                raise SearchError(f"node {u} has duplicate edges")
            for v in outs:
                if not 0 <= v < n:
                    raise SearchError(f"edge {u}->{v} leaves the graph")
        for i, h in enumerate(self.h):
            if not (h >= 0 and math.isfinite(h)):
                raise SearchError(f"node {i} has invalid potential {h}")
            if self.status[i] == GOAL and not self.goal[i]:
                raise SearchError(f"node {i} marked goal but is not a goal state")

    def dump(self) -> str:
        """Line-oriented debug dump: nodes then edges."""
        from .domains import state_digest

        lines = [f"# graph {self.graph_id} nodes={len(self)} edges={self.n_edges}"]
        for i, s in enumerate(self.states):
            lines.append(f"n {i} {state_digest(s).hex()} {self.status[i]} {self.h[i]!r}")
        for u, outs in enumerate(self.succ):
            for v in outs:
                lines.append(f"e {u} {v}")
        return "\n".join(lines) + "\n"


@dataclass
class SearchOutcome:
    instance_id: str
    engine: str
    solved: bool
    plan: Plan | None
    graph: SearchGraph
    expanded: int = 0
    generated: int = 0
    unique_states: int = 0
    duplicate_hits: int = 0
    wall_time: float = 0.0
    graphs: list = field(default_factory=list)
    runs: int = 1

    def record(self) -> dict[str, Any]:
        return {
            "instance_id": self.instance_id,
            "engine": self.engine,
            "solved": self.solved,
            "plan_len": self.plan.length if self.plan is not None else -1,
            "expanded": self.expanded,
            "generated": self.generated,
            "unique_states": self.unique_states,
            "duplicate_hits": self.duplicate_hits,
            "wall_time_ms": round(self.wall_time * 1000.0, 3),
        }


def evaluate_f(g: float, h: float, weight: float = 2.0) -> float:
    return g + weight * h


def _plan_from(graph: SearchGraph, node: int, inst: Instance) -> Plan:
    actions = []
    while graph.parent[node] is not None:
        actions.append(graph.parent_action[node])
        node = graph.parent[node]
    return Plan(inst.id, tuple(reversed(actions)))


def bfs_run(
    inst: Instance,
    est: Evaluator | EvalCache,
    budget_S: int,
    weight: float = 2.0,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> SearchOutcome:
    """Budgeted weighted best-first graph search with reopening.

    Ties on ``f`` go to the smaller ``h``, then to the earlier insertion.
    ``noise`` multiplies the ordering heuristic by ``1 + noise*U(-1, 1)``;
    the recorded potentials stay unperturbed.
    """
    if budget_S < 1:
        raise ValueError("budget_S must be >= 1")
    t0 = time.perf_counter()
    cache = est if isinstance(est, EvalCache) else EvalCache(est, inst)
    perturb = {}

    def order_h(state, h):
        if noise <= 0.0:
            return h
        if state not in perturb:
            perturb[state] = 1.0 + noise * (2.0 * rng.random() - 1.0)
        return h * perturb[state]

    graph = SearchGraph(graph_id=f"{inst.id}/bfs")
    (h0,) = cache.get([inst.start])
    root = graph.add_node(inst.start, h0, 0, is_goal=inst.is_goal(inst.start))
    seq = 0
    heap = [(evaluate_f(0, order_h(inst.start, h0), weight), order_h(inst.start, h0), seq, root, 0)]
    expanded = generated = dup = 0
    solved_at = None
    while heap and expanded < budget_S:
        _, _, _, u, g_push = heapq.heappop(heap)
        if g_push != graph.g[u]:
            continue
        expanded += 1
        if graph.goal[u]:
            graph.status[u] = GOAL
            solved_at = u
            break
        graph.status[u] = CLOSED
        succ = inst.successors(graph.states[u])
        new_states = [s for _, s in succ if s not in graph.index]
        values = dict(zip(new_states, cache.get(new_states))) if new_states else {}
        g_new = graph.g[u] + 1
        for action, s in succ:
            v = graph.index.get(s)
            if v is None:
                h = values[s]
                v = graph.add_node(s, h, g_new, u, action, inst.is_goal(s))
            else:
                dup += 1
                if g_new >= graph.g[v]:
                    if graph.add_edge(u, v):
                        generated += 1
                    continue
                graph.g[v] = g_new
                graph.parent[v] = u
                graph.parent_action[v] = action
            if graph.add_edge(u, v):
                generated += 1
            seq += 1
            oh = order_h(s, graph.h[v])
            heapq.heappush(heap, (evaluate_f(g_new, oh, weight), oh, seq, v, g_new))
    plan = _plan_from(graph, solved_at, inst) if solved_at is not None else None
    return SearchOutcome(
        inst.id,
        "bfs",
        solved_at is not None,
        plan,
        graph,
        expanded=expanded,
        generated=generated,
        unique_states=len(graph),
        duplicate_hits=dup,
        wall_time=time.perf_counter() - t0,
        graphs=[graph],
    )


# ----------------------------------------------------------------------- MCTS


def leaf_reward(h: float, eps: float = LEAF_EPS) -> float:
    return -math.log(max(h, eps))


class MctsNode:
    __slots__ = ("state", "actions", "child_states", "children", "N", "Q", "expanded", "terminal")

    def __init__(self, state):
        self.state = state
        self.actions: list = []
        self.child_states: list = []
        self.children: list = []
        self.N: list[int] = []
        self.Q: list[float] = []
        self.expanded = False
        self.terminal = False


def ucb_select(node: MctsNode) -> int:
    """Index of the action maximizing ``Q + sqrt(2 ln sum N / N)``.

    Unvisited actions score +inf and are taken in enumeration order.
    """
    if not node.actions:
        raise SearchError("ucb_select on a node without actions")
    total = sum(node.N)
    log_total = math.log(total) if total > 0 else 0.0
    best, best_u = 0, -math.inf
    for i, (n, q) in enumerate(zip(node.N, node.Q)):
        if n == 0:
            return i
        u = q + math.sqrt(2.0 * log_total / n)
        if u > best_u:
            best, best_u = i, u
    return best


def mcts_run(
    inst: Instance,
    est: Evaluator | EvalCache,
    sims_per_move: int = 100,
    move_cap: int = 500,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> SearchOutcome:
    """Play one episode, committing the most-visited action after each batch of simulations.

    Every node visit inside a simulation counts as an expansion; unique
    states are the states evaluated through the transposition table.
    """
    if sims_per_move < 1:
        raise ValueError("sims_per_move must be >= 1")
    t0 = time.perf_counter()
    cache = est if isinstance(est, EvalCache) else EvalCache(est, inst)
    perturb = {}
    visited: set = set()

    def reward(state):
        visited.add(state)
        if inst.is_goal(state):
            return leaf_reward(0.0)
        (h,) = cache.get([state])
        if noise > 0.0:
            if state not in perturb:
                perturb[state] = 1.0 + noise * (2.0 * rng.random() - 1.0)
            h *= perturb[state]
        return leaf_reward(h)

    expanded_states: dict[State, list] = {}
    depth: dict[State, int] = {inst.start: 0}
    first_parent: dict[State, tuple] = {}

    def expand(node: MctsNode):
        node.expanded = True
        if inst.is_goal(node.state):
            node.terminal = True
            return
        succ = inst.successors(node.state)
        node.actions = [a for a, _ in succ]
        node.child_states = [s for _, s in succ]
        node.children = [None] * len(succ)
        node.N = [0] * len(succ)
        node.Q = [0.0] * len(succ)
        if not succ:
            node.terminal = True
        if node.state not in expanded_states:
            expanded_states[node.state] = node.child_states
            d = depth[node.state] + 1
            for a, s in succ:
                if s not in depth:
                    depth[s] = d
                    first_parent[s] = (node.state, a)

    root = MctsNode(inst.start)
    visits = 0
    plan_actions: list = []
    solved = inst.is_goal(inst.start)
    moves = 0
    while not solved and moves < move_cap:
        if not root.expanded:
            expand(root)
        visited.add(root.state)
        if root.terminal:
            break
        for _ in range(sims_per_move):
            node = root
            path = []
            visits += 1
            while True:
                if not node.expanded:
                    expand(node)
                    r = reward(node.state)
                    break
                if node.terminal:
                    r = reward(node.state)
                    break
                i = ucb_select(node)
                path.append((node, i))
                child = node.children[i]
                if child is None:
                    child = MctsNode(node.child_states[i])
                    node.children[i] = child
                    visits += 1
                    r = reward(child.state)
                    break
                node = child
                visits += 1
            for n, i in path:
                n.N[i] += 1
                n.Q[i] += (r - n.Q[i]) / n.N[i]
        best = max(range(len(root.actions)), key=lambda i: (root.N[i], root.Q[i], -i))
        plan_actions.append(root.actions[best])
        nxt = root.children[best] or MctsNode(root.child_states[best])
        root = nxt
        moves += 1
        solved = inst.is_goal(root.state)

    graph = _mcts_graph(inst, cache, expanded_states, depth, first_parent)
    plan = Plan(inst.id, tuple(plan_actions)) if solved else None
    return SearchOutcome(
        inst.id,
        "mcts",
        solved,
        plan,
        graph,
        expanded=visits,
        generated=graph.n_edges,
        unique_states=len(visited),
        duplicate_hits=visits - len(visited),
        wall_time=time.perf_counter() - t0,
        graphs=[graph],
    )


def _mcts_graph(inst, cache: EvalCache, expanded_states, depth, first_parent) -> SearchGraph:
    """Union of all simulated nodes; never-expanded states form the open set."""
    order = [inst.start]
    seen = {inst.start}
    for s, kids in expanded_states.items():
        if s not in seen:
            seen.add(s)
            order.append(s)
        for k in kids:
            if k not in seen:
                seen.add(k)
                order.append(k)
    # potentials of generated-but-never-visited children bypass the visit counters
    hvals = dict(zip(order, _peek(cache, order)))
    graph = SearchGraph(graph_id=f"{inst.id}/mcts")
    for s in order:
        parent = first_parent.get(s)
        graph.add_node(s, hvals[s], depth.get(s, 0), None, parent[1] if parent else None, inst.is_goal(s))
    for s, kids in expanded_states.items():
        u = graph.index[s]
        graph.status[u] = GOAL if inst.is_goal(s) else CLOSED
        for k in kids:
            graph.add_edge(u, graph.index[k])
    for s, (p, _) in first_parent.items():
        graph.parent[graph.index[s]] = graph.index[p]
    return graph


def _peek(cache: EvalCache, states):
    missing = [s for s in states if s not in cache.table]
    extra = {}
    if missing:
        values = np.asarray(cache.est.evaluate_batch(missing, cache.inst), dtype=float)
        extra = {s: max(float(v), 0.0) for s, v in zip(missing, values)}
    return [cache.table[s] if s in cache.table else extra[s] for s in states]


# ------------------------------------------------------------------- restarts


def restart_loop(
    inst: Instance,
    est: Evaluator,
    budget_S: int,
    runs: int = 1,
    engine: str = "bfs",
    weight: float = 2.0,
    sims_per_move: int = 100,
    move_cap: int = 500,
    restart_noise: float = 0.1,
    seed: int = 0,
) -> SearchOutcome:
    """Up to ``runs`` independent attempts; stops at the first solve.

    All attempts share one estimator cache. Attempts after the first
    perturb node ordering with their own rng substream so they differ. The
    returned outcome carries every recorded graph and summed counters.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    cache = EvalCache(est, inst)
    graphs, total = [], dict(expanded=0, generated=0, unique_states=0, duplicate_hits=0)
    wall = 0.0
    outcome = None
    base_seed = list(seed) if isinstance(seed, (list, tuple)) else [seed]
    for r in range(runs):
        rng = np.random.default_rng([*base_seed, r])
        noise = restart_noise if r > 0 else 0.0
        if engine == "bfs":
            outcome = bfs_run(inst, cache, budget_S, weight, noise=noise, rng=rng)
        elif engine == "mcts":
            outcome = mcts_run(inst, cache, sims_per_move, move_cap, noise=noise, rng=rng)
        else:
            raise ValueError(f"unknown engine {engine!r}")
        outcome.graph.graph_id = f"{inst.id}/{engine}/{r}"
        graphs.append(outcome.graph)
        for k in total:
            total[k] += getattr(outcome, k)
        wall += outcome.wall_time
        if outcome.solved:
            break
    outcome.graphs = graphs
    outcome.runs = len(graphs)
    for k, v in total.items():
        setattr(outcome, k, v)
    outcome.wall_time = wall
    return outcome
