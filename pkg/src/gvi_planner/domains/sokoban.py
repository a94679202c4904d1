"""Sokoban with push-level actions.

Cells are flat indices ``row * width + col`` with row 0 at the top. A state
is ``(player, *boxes)`` where ``boxes`` is sorted and ``player`` is the
smallest cell of the player's reachable region, so states that differ only
by non-pushing walks compare equal.
"""

from __future__ import annotations

import hashlib
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np

from .base import DomainError, Instance, InvalidPlan, State

DELTAS = {"U": (-1, 0), "D": (1, 0), "L": (0, -1), "R": (0, 1)}
_ORDER = ("U", "D", "L", "R")


class Push(NamedTuple):
    box: int
    direction: str


@dataclass(frozen=True, eq=True)
class SokobanInstance(Instance):
    """Static level data plus a start state.

    ``floor`` holds every cell the player could ever stand on; everything
    else inside the bounding box is wall.
    """

    id: str
    height: int
    width: int
    floor: frozenset
    goals: frozenset
    start_player: int
    start_boxes: tuple
    start: State = field(init=False, compare=False)

    domain = "sokoban"

    def __post_init__(self):
        object.__setattr__(self, "floor", frozenset(self.floor))
        object.__setattr__(self, "goals", frozenset(self.goals))
        object.__setattr__(self, "start_boxes", tuple(sorted(self.start_boxes)))
        if len(self.start_boxes) != len(self.goals):
            raise DomainError(
                f"{self.id}: {len(self.start_boxes)} boxes but {len(self.goals)} goals"
            )
        if not self.goals <= self.floor or not set(self.start_boxes) <= self.floor:
            raise DomainError(f"{self.id}: box or goal outside the playable area")
        if self.start_player not in self.floor or self.start_player in self.start_boxes:
            raise DomainError(f"{self.id}: player must stand on a free floor cell")
        nbrs: dict[int, tuple] = {}
        W = self.width
        for cell in self.floor:
            r, c = divmod(cell, W)
            lst = []
            for d in _ORDER:
                dr, dc = DELTAS[d]
                nr, nc = r + dr, c + dc
                if 0 <= nr < self.height and 0 <= nc < W and nr * W + nc in self.floor:
                    lst.append((d, nr * W + nc))
            nbrs[cell] = tuple(lst)
        object.__setattr__(self, "_nbrs", nbrs)
        layout = f"{self.height}x{self.width}|{sorted(self.floor)}|{sorted(self.goals)}"
        object.__setattr__(self, "layout_key", hashlib.blake2b(layout.encode(), digest_size=8).hexdigest())
        start = self.make_state(self.start_player, self.start_boxes)
        object.__setattr__(self, "start", start)

    # geometry helpers
    def cell(self, r: int, c: int) -> int:
        return r * self.width + c

    def rc(self, cell: int) -> tuple[int, int]:
        return divmod(cell, self.width)

    def neighbor(self, cell: int, d: str) -> int | None:
        r, c = divmod(cell, self.width)
        dr, dc = DELTAS[d]
        nr, nc = r + dr, c + dc
        if 0 <= nr < self.height and 0 <= nc < self.width:
            nxt = nr * self.width + nc
            if nxt in self.floor:
                return nxt
        return None

    def reachable(self, player: int, boxes) -> set:
        """Flood fill of the cells the player can walk to without pushing."""
        nbrs = self._nbrs
        seen = {player}
        stack = [player]
        while stack:
            cur = stack.pop()
            for _, nxt in nbrs[cur]:
                if nxt not in seen and nxt not in boxes:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def make_state(self, player: int, boxes) -> State:
        boxes = tuple(sorted(boxes))
        return (min(self.reachable(player, frozenset(boxes))),) + boxes

    def canonical(self, state: State) -> State:
        return self.make_state(state[0], state[1:])

    def value_key(self, state: State):
        return (self.layout_key, state)

    def check_state(self, state: State) -> None:
        boxes = state[1:]
        if (
            len(boxes) != len(self.goals)
            or len(set(boxes)) != len(boxes)
            or not set(boxes) <= self.floor
            or state[0] not in self.floor
            or state[0] in boxes
        ):
            raise DomainError(f"malformed sokoban state {state!r}")

    # transitions
    def successors(self, state):
        player, boxes = state[0], state[1:]
        if player not in self._nbrs or player in boxes:
            raise DomainError(f"malformed sokoban state {state!r}")
        box_set = frozenset(boxes)
        reach = self.reachable(player, box_set)
        nbrs = self._nbrs
        out = []
        for box in boxes:
            if box not in nbrs:
                raise DomainError(f"malformed sokoban state {state!r}")
            adj = dict(nbrs[box])
            for d in _ORDER:
                behind = adj.get(_OPPOSITE[d])
                dest = adj.get(d)
                if behind is None or dest is None or dest in box_set or behind not in reach:
                    continue
                new_boxes = (box_set - {box}) | {dest}
                out.append((Push(box, d), self.make_state(box, new_boxes)))
        return out

    def predecessors(self, state):
        """Backward pulls: ``Push(y, d)`` applied in the returned state gives ``state``."""
        player, boxes = state[0], state[1:]
        box_set = frozenset(boxes)
        reach = self.reachable(player, box_set)
        out = []
        for box in boxes:
            for d in _ORDER:
                y = self.neighbor(box, _OPPOSITE[d])
                if y is None or y not in reach:
                    continue
                z = self.neighbor(y, _OPPOSITE[d])
                if z is None or z in box_set:
                    continue
                new_boxes = (box_set - {box}) | {y}
                out.append((Push(y, d), self.make_state(z, new_boxes)))
        out.sort(key=lambda p: (p[0].box, _ORDER.index(p[0].direction)))
        return out

    def apply(self, state, action):
        if not isinstance(action, Push):
            raise InvalidPlan(f"{self.id}: {action!r} is not a push")
        for a, nxt in self.successors(state):
            if a == action:
                return nxt
        raise InvalidPlan(f"{self.id}: push {action!r} not applicable")

    def is_goal(self, state) -> bool:
        goals = self.goals
        return all(b in goals for b in state[1:])

    def goal_state(self, rng: random.Random | None = None):
        boxes = frozenset(self.goals)
        free = sorted(self.floor - boxes)
        if not free:
            raise DomainError(f"{self.id}: no free cell for the player")
        if rng is not None:
            player = free[rng.randrange(len(free))]
        else:
            player = self.start_player if self.start_player not in boxes else free[0]
        return self.make_state(player, boxes)

    def with_start(self, start, new_id):
        return SokobanInstance(
            new_id, self.height, self.width, self.floor, self.goals, start[0], tuple(start[1:])
        )

    # encoding
    def encoding_shape(self):
        return (4, self.height, self.width)

    def encode(self, state, shape=None):
        """Four binary planes (walls, boxes, goals, reachable), zero padded."""
        H, W = (shape[1], shape[2]) if shape else (self.height, self.width)
        if H < self.height or W < self.width:
            raise DomainError(f"encoding {H}x{W} smaller than level {self.height}x{self.width}")
        x = np.zeros((4, H, W))
        x[0, : self.height, : self.width] = 1.0
        w = self.width
        for cell in self.floor:
            x[0, cell // w, cell % w] = 0.0
        for b in state[1:]:
            x[1, b // w, b % w] = 1.0
        for g in self.goals:
            x[2, g // w, g % w] = 1.0
        for cell in self.reachable(state[0], frozenset(state[1:])):
            x[3, cell // w, cell % w] = 1.0
        return x.ravel()

    # move strings
    def walk(self, src: int, dst: int, boxes) -> str:
        """Shortest walk between two cells avoiding boxes; ties broken U<D<L<R."""
        if src == dst:
            return ""
        prev = {src: None}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            for d, nxt in self._nbrs[cur]:
                if nxt in prev or nxt in boxes:
                    continue
                prev[nxt] = (cur, d)
                if nxt == dst:
                    path = []
                    while prev[nxt] is not None:
                        nxt, step = prev[nxt]
                        path.append(step.lower())
                    return "".join(reversed(path))
                queue.append(nxt)
        raise InvalidPlan(f"{self.id}: cell {dst} unreachable from {src}")

    def plan_to_string(self, actions: Sequence[Push]) -> str:
        """LURD rendering: lowercase walks, uppercase pushes."""
        player = self.start_player
        boxes = set(self.start_boxes)
        parts = []
        for push in actions:
            behind = self.neighbor(push.box, _OPPOSITE[push.direction])
            dest = self.neighbor(push.box, push.direction)
            if behind is None or dest is None or push.box not in boxes or dest in boxes:
                raise InvalidPlan(f"{self.id}: push {push!r} not applicable")
            parts.append(self.walk(player, behind, boxes))
            parts.append(push.direction)
            boxes.discard(push.box)
            boxes.add(dest)
            player = push.box
        return "".join(parts)

    def replay_string(self, text: str) -> State:
        player = self.start_player
        boxes = set(self.start_boxes)
        for i, ch in enumerate(text.strip()):
            d = ch.upper()
            if d not in DELTAS:
                raise InvalidPlan(f"{self.id}: bad move character {ch!r} at {i}")
            nxt = self.neighbor(player, d)
            if nxt is None:
                raise InvalidPlan(f"{self.id}: move {i} ({ch}) walks into a wall")
            if nxt in boxes:
                beyond = self.neighbor(nxt, d)
                if ch.islower() or beyond is None or beyond in boxes:
                    raise InvalidPlan(f"{self.id}: move {i} ({ch}) is not a legal push")
                boxes.discard(nxt)
                boxes.add(beyond)
            elif ch.isupper():
                raise InvalidPlan(f"{self.id}: move {i} ({ch}) is marked as a push but pushes nothing")
            player = nxt
        return self.make_state(player, boxes)

    def push_count(self, moves: str) -> int:
        return sum(ch.isupper() for ch in moves)

    def to_config(self) -> dict[str, Any]:
        from .xsb import render_xsb

        return {"id": self.id, "xsb": render_xsb(self)}


_OPPOSITE = {"U": "D", "D": "U", "L": "R", "R": "L"}
