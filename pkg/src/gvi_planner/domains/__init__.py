"""Planning domains: grid world, N-puzzle and Sokoban."""

from .base import (
    DIRECTIONS,
    DomainError,
    Instance,
    InvalidPlan,
    Plan,
    State,
    is_valid_plan,
    replay,
    scramble,
    state_digest,
    state_hash,
)
from .grid import GridInstance, corner_grid
from .npuzzle import PuzzleInstance, goal_puzzle, parse_puzzle_file, render_puzzle_file
from .sokoban import Push, SokobanInstance
from .xsb import XsbParseError, load_levels, parse_xsb, parse_xsb_collection, render_xsb


def successors(state, inst: Instance):
    return inst.successors(state)


def is_goal(state, inst: Instance) -> bool:
    return inst.is_goal(state)


def encode(state, inst: Instance, shape=None):
    return inst.encode(state, shape)


def instance_from_config(cfg: dict) -> Instance:
    """Build an instance from its ``to_config`` dictionary."""
    if "xsb" in cfg:
        return parse_xsb(cfg["xsb"], id=cfg.get("id", "level"))
    if "side" in cfg:
        return PuzzleInstance(cfg.get("id", "puzzle"), int(cfg["side"]), tuple(cfg["start"]))
    return GridInstance.from_config(cfg)
