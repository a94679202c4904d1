"""Shared planning-domain machinery: instances, plans and replay."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Any, Hashable, Sequence

import numpy as np

State = tuple
Action = Hashable

# Fixed enumeration order for moves in every domain.
DIRECTIONS = ("U", "D", "L", "R")


class DomainError(ValueError):
    """Raised for malformed states, illegal actions and bad instance data."""


class InvalidPlan(DomainError):
    pass


def state_digest(state: State) -> bytes:
    """Stable 8-byte digest of a state (independent of PYTHONHASHSEED)."""
    raw = ",".join(map(str, state)).encode()
    return hashlib.blake2b(raw, digest_size=8).digest()


def state_hash(state: State) -> int:
    return int.from_bytes(state_digest(state), "little")


class Instance:
    """Base class for planning instances.

    Subclasses implement the transition system for one domain. States are
    plain tuples of ints so they hash cheaply and deterministically.
    """

    domain: str = ""
    id: str
    start: State

    def successors(self, state: State) -> list[tuple[Action, State]]:
        raise NotImplementedError

    def predecessors(self, state: State) -> list[tuple[Action, State]]:
        """Pairs ``(a, p)`` such that applying ``a`` in ``p`` yields ``state``."""
        raise NotImplementedError

    def is_goal(self, state: State) -> bool:
        raise NotImplementedError

    def goal_state(self, rng: random.Random | None = None) -> State:
        raise NotImplementedError

    def check_state(self, state: State) -> None:
        raise NotImplementedError

    def canonical(self, state: State) -> State:
        return state

    def value_key(self, state: State):
        """Key under which a tabular estimator stores this state's value."""
        return state

    def encode(self, state: State, shape: tuple[int, ...] | None = None) -> np.ndarray:
        raise NotImplementedError

    def encoding_shape(self) -> tuple[int, ...]:
        raise NotImplementedError

    def with_start(self, start: State, new_id: str) -> "Instance":
        raise NotImplementedError

    # plan (de)serialization
    def apply(self, state: State, action: Action) -> State:
        for a, nxt in self.successors(state):
            if a == action:
                return nxt
        raise InvalidPlan(f"{self.id}: action {action!r} not applicable")

    def plan_to_string(self, actions: Sequence[Action]) -> str:
        return "".join(actions)

    def replay_string(self, text: str) -> State:
        """Replay a plan string from the start state and return the final state."""
        state = self.start
        for i, ch in enumerate(text.strip()):
            if ch not in DIRECTIONS:
                raise InvalidPlan(f"{self.id}: bad action character {ch!r} at {i}")
            state = self.apply(state, ch)
        return state

    def to_config(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Plan:
    instance_id: str
    actions: tuple = field(default_factory=tuple)

    @property
    def length(self) -> int:
        return len(self.actions)

    def __len__(self) -> int:
        return len(self.actions)


def replay(inst: Instance, plan: Plan) -> list[State]:
    """Replay ``plan`` from ``inst.start``; returns the visited states.

    Raises :class:`InvalidPlan` if an action is inapplicable or the final
    state is not a goal.
    """
    if plan.instance_id != inst.id:
        raise InvalidPlan(f"plan for {plan.instance_id!r} replayed on {inst.id!r}")
    states = [inst.start]
    for action in plan.actions:
        states.append(inst.apply(states[-1], action))
    if not inst.is_goal(states[-1]):
        raise InvalidPlan(f"{inst.id}: plan of length {plan.length} ends off-goal")
    return states


def is_valid_plan(inst: Instance, plan: Plan) -> bool:
    try:
        replay(inst, plan)
    except InvalidPlan:
        return False
    return True


def scramble(inst: Instance, k: int, rng_seed: int) -> Instance:
    """Random backward walk of ``k`` legal actions from a goal state.

    The walk may revisit states. Deterministic given ``rng_seed``.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    rng = random.Random(rng_seed)
    state = inst.goal_state(rng)
    for _ in range(k):
        preds = inst.predecessors(state)
        if not preds:
            break
        _, state = preds[rng.randrange(len(preds))]
    return inst.with_start(state, f"{inst.id}-k{k}-s{rng_seed}")
