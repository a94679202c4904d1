"""Sliding-tile N-puzzle on a ``side x side`` board.

States are row-major permutations of ``0..N`` with 0 for the blank. The
goal is the identity permutation (blank in the top-left corner). Actions
name the direction the blank moves; row 0 is the top row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

import numpy as np

from .base import DomainError, Instance, State

_MOVES = (("U", -1, 0), ("D", 1, 0), ("L", 0, -1), ("R", 0, 1))
_INVERSE = {"U": "D", "D": "U", "L": "R", "R": "L"}


def permutation_parity(perm: Iterable[int]) -> int:
    """Parity (0 even, 1 odd) of a permutation via cycle decomposition."""
    perm = list(perm)
    seen = [False] * len(perm)
    parity = 0
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        parity ^= (length - 1) & 1
    return parity


def is_solvable(state: State, side: int) -> bool:
    """Each blank move is one transposition and one step of blank distance."""
    pos = state.index(0)
    blank_dist = pos // side + pos % side
    return permutation_parity(state) == blank_dist % 2


@dataclass(frozen=True, eq=True)
class PuzzleInstance(Instance):
    id: str
    side: int
    start: State

    domain = "npuzzle"

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(int(v) for v in self.start))
        self.check_state(self.start)
        if not is_solvable(self.start, self.side):
            raise DomainError(f"{self.id}: permutation is not solvable")

    @property
    def n_cells(self) -> int:
        return self.side * self.side

    def check_state(self, state: State) -> None:
        if len(state) != self.n_cells or sorted(state) != list(range(self.n_cells)):
            raise DomainError(f"malformed puzzle state {state!r}")

    def successors(self, state):
        if len(state) != self.n_cells:
            raise DomainError(f"malformed puzzle state {state!r}")
        side = self.side
        pos = state.index(0)
        r, c = divmod(pos, side)
        out = []
        for name, dr, dc in _MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < side and 0 <= nc < side:
                q = nr * side + nc
                s = list(state)
                s[pos], s[q] = s[q], 0
                out.append((name, tuple(s)))
        return out

    def predecessors(self, state):
        return [(_INVERSE[a], s) for a, s in self.successors(state)]

    def goal_state(self, rng=None):
        return tuple(range(self.n_cells))

    def is_goal(self, state) -> bool:
        return all(v == i for i, v in enumerate(state))

    def encoding_shape(self):
        return (self.n_cells * self.n_cells,)

    def encode(self, state, shape=None):
        n = self.n_cells
        size = shape[0] if shape else n * n
        if size < n * n:
            raise DomainError(f"encoding size {size} smaller than {n * n}")
        x = np.zeros(size)
        # plane t marks the cell holding tile t
        for cell, tile in enumerate(state):
            x[tile * n + cell] = 1.0
        return x

    def with_start(self, start, new_id):
        return PuzzleInstance(new_id, self.side, tuple(start))

    def manhattan(self, state: State) -> int:
        side = self.side
        total = 0
        for cell, tile in enumerate(state):
            if tile:
                total += abs(cell // side - tile // side) + abs(cell % side - tile % side)
        return total

    def to_config(self) -> dict[str, Any]:
        return {"id": self.id, "side": self.side, "start": list(self.start)}


def goal_puzzle(side: int = 3, id: str | None = None) -> PuzzleInstance:
    return PuzzleInstance(id or f"puzzle{side * side - 1}", side, tuple(range(side * side)))


def parse_puzzle_file(text: str, prefix: str = "p") -> list[PuzzleInstance]:
    """One instance per line: space-separated row-major permutation, 0 = blank."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            perm = tuple(int(t) for t in line.split())
        except ValueError as exc:
            raise DomainError(f"line {lineno}: {exc}") from None
        side = int(round(len(perm) ** 0.5))
        if side * side != len(perm):
            raise DomainError(f"line {lineno}: {len(perm)} entries is not a square board")
        try:
            out.append(PuzzleInstance(f"{prefix}{len(out) + 1}", side, perm))
        except DomainError as exc:
            raise DomainError(f"line {lineno}: {exc}") from None
    return out


def render_puzzle_file(instances: Iterable[PuzzleInstance]) -> str:
    return "".join(" ".join(map(str, inst.start)) + "\n" for inst in instances)
