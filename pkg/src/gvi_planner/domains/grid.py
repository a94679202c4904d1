"""Four-connected grid world.

Row 0 is the bottom row, so ``U`` increases the row index. The default
50x50 instance goes from the bottom-left corner (0, 0) to the top-right
corner (49, 49).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .base import DomainError, Instance, State

_MOVES = (("U", 1, 0), ("D", -1, 0), ("L", 0, -1), ("R", 0, 1))


@dataclass(frozen=True, eq=True)
class GridInstance(Instance):
    id: str
    height: int
    width: int
    start: State
    goal: State
    walls: frozenset = field(default_factory=frozenset)

    domain = "grid"

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise DomainError("grid dimensions must be positive")
        object.__setattr__(self, "start", tuple(self.start))
        object.__setattr__(self, "goal", tuple(self.goal))
        object.__setattr__(self, "walls", frozenset(tuple(w) for w in self.walls))
        self.check_state(self.start)
        self.check_state(self.goal)

    def _free(self, r: int, c: int) -> bool:
        return 0 <= r < self.height and 0 <= c < self.width and (r, c) not in self.walls

    def check_state(self, state: State) -> None:
        if len(state) != 2 or not self._free(*state):
            raise DomainError(f"malformed grid state {state!r}")

    def successors(self, state):
        r, c = state
        if not self._free(r, c):
            raise DomainError(f"malformed grid state {state!r}")
        out = []
        for name, dr, dc in _MOVES:
            if self._free(r + dr, c + dc):
                out.append((name, (r + dr, c + dc)))
        return out

    def predecessors(self, state):
        # moves are invertible: U undoes D, L undoes R
        inverse = {"U": "D", "D": "U", "L": "R", "R": "L"}
        return [(inverse[a], s) for a, s in self.successors(state)]

    def is_goal(self, state) -> bool:
        return tuple(state) == self.goal

    def goal_state(self, rng=None):
        return self.goal

    def encoding_shape(self):
        return (self.height * self.width,)

    def encode(self, state, shape=None):
        size = shape[0] if shape else self.height * self.width
        if size < self.height * self.width:
            raise DomainError(f"encoding size {size} smaller than {self.height}x{self.width} board")
        x = np.zeros(size)
        x[state[0] * self.width + state[1]] = 1.0
        return x

    def with_start(self, start, new_id):
        return GridInstance(new_id, self.height, self.width, tuple(start), self.goal, self.walls)

    def cells(self):
        for r in range(self.height):
            for c in range(self.width):
                if (r, c) not in self.walls:
                    yield (r, c)

    def to_config(self) -> dict[str, Any]:
        cfg = {
            "id": self.id,
            "height": self.height,
            "width": self.width,
            "start": list(self.start),
            "goal": list(self.goal),
        }
        if self.walls:
            cfg["walls"] = sorted(list(w) for w in self.walls)
        return cfg

    @classmethod
    def from_config(cls, cfg: dict[str, Any]) -> "GridInstance":
        return cls(
            id=cfg.get("id", "grid"),
            height=int(cfg["height"]),
            width=int(cfg["width"]),
            start=tuple(cfg["start"]),
            goal=tuple(cfg["goal"]),
            walls=frozenset(tuple(w) for w in cfg.get("walls", ())),
        )


def corner_grid(size: int = 50, id: str = "grid50") -> GridInstance:
    return GridInstance(id, size, size, (0, 0), (size - 1, size - 1))
