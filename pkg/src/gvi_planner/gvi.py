"""Graph value iteration: distance labels for the closed part of a search graph.

Goal nodes are sources at 0, open (frontier) nodes are sources at their
recorded estimator value, closed nodes start at infinity. A multi-source
Dijkstra pass over reversed edges with unit costs then gives every closed
node ``1 + min`` over its successors.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .domains import Instance, State
from .search import OPEN, SearchError, SearchGraph

DEAD_END = math.inf

PLAN, GVI = "plan", "gvi"


@dataclass(frozen=True)
class GviLabel:
    state: State
    d: float
    source_graph_id: str = ""
    node_id: int = -1

    @property
    def dead_end(self) -> bool:
        return math.isinf(self.d)


@dataclass(frozen=True)
class TrainingSample:
    state: State
    target: float
    source: str
    inst: Instance | None = None


def gvi_labels(graph: SearchGraph, freeze_open_labels: bool = False) -> list[GviLabel]:
    """Labels for every node outside the open set, in node-id order.

    Closed nodes that reach neither a goal nor an open node keep an
    infinite label (``DEAD_END``). Ties in extraction go to the smaller node
    id. With ``freeze_open_labels`` open nodes are never lowered; since
    open nodes have no outgoing edges this only matters for malformed input.
    """
    n = len(graph)
    if len(graph.succ) != n or len(graph.h) != n or len(graph.status) != n:
        raise SearchError("malformed search graph: ragged node tables")
    d = [math.inf] * n
    is_open = [False] * n
    heap = []
    for u in range(n):
        if graph.goal[u]:
            d[u] = 0.0
        elif graph.status[u] == OPEN:
            h = graph.h[u]
            if not (h >= 0 and math.isfinite(h)):
                raise SearchError(f"malformed search graph: open node {u} has potential {h}")
            d[u] = float(h)
            is_open[u] = True
        else:
            continue
        heap.append((d[u], u))
    heapq.heapify(heap)
    pred = [[] for _ in range(n)]
    for u, outs in enumerate(graph.succ):
        if outs and is_open[u]:
            raise SearchError(f"malformed search graph: open node {u} has outgoing edges")
        for v in outs:
            if not 0 <= v < n:
                raise SearchError(f"malformed search graph: edge {u}->{v}")
            pred[v].append(u)
    done = [False] * n
    while heap:
        dv, v = heapq.heappop(heap)
        if done[v] or dv > d[v]:
            continue
        done[v] = True
        nd = dv + 1.0
        for w in pred[v]:
            if freeze_open_labels and is_open[w]:
                continue
            if nd < d[w]:
                d[w] = nd
                heapq.heappush(heap, (nd, w))
    gid = graph.graph_id
    return [GviLabel(graph.states[u], d[u], gid, u) for u in range(n) if not is_open[u]]


def dump_labels(graph: SearchGraph, labels: Sequence[GviLabel] | None = None) -> str:
    """Graph dump followed by one ``d <node_id> <state hash> <status> <label>`` line per label."""
    from .domains import state_digest

    labels = gvi_labels(graph) if labels is None else labels
    lines = [graph.dump().rstrip("\n")]
    for lb in labels:
        u = lb.node_id
        lines.append(f"d {u} {state_digest(lb.state).hex()} {graph.status[u]} {lb.d!r}")
    return "\n".join(lines) + "\n"


def dead_end_cap(labels: Iterable[GviLabel], budget_hint: float = 0.0, factor: float = 2.0) -> float:
    finite = [lb.d for lb in labels if not lb.dead_end]
    return max(factor * max(finite, default=0.0), factor * budget_hint)


def to_training_samples(
    labels: Sequence[GviLabel],
    budget_hint: float = 0.0,
    factor: float = 2.0,
    inst: Instance | None = None,
) -> list[TrainingSample]:
    """Finite labels pass through; dead ends get ``max(2*max finite, 2*budget_hint)``.

    If that cap is zero (nothing finite, no hint) the dead-end labels are
    dropped rather than turned into attractive zero targets.
    """
    cap = dead_end_cap(labels, budget_hint, factor)
    out = []
    for lb in labels:
        if lb.dead_end:
            if cap <= 0.0:
                continue
            out.append(TrainingSample(lb.state, cap, GVI, inst))
        else:
            out.append(TrainingSample(lb.state, lb.d, GVI, inst))
    return out


def plan_to_samples(plan, states: Sequence[State], inst: Instance | None = None) -> list[TrainingSample]:
    """State ``i`` of an ``n``-step plan gets target ``n - i``."""
    n = plan.length
    if len(states) != n + 1:
        raise ValueError(f"plan of length {n} needs {n + 1} states, got {len(states)}")
    return [TrainingSample(s, float(n - i), PLAN, inst) for i, s in enumerate(states)]
