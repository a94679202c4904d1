import itertools
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gvi_planner.domains import (
    DomainError,
    GridInstance,
    InvalidPlan,
    Plan,
    Push,
    PuzzleInstance,
    SokobanInstance,
    XsbParseError,
    corner_grid,
    encode,
    goal_puzzle,
    instance_from_config,
    is_goal,
    is_valid_plan,
    load_levels,
    parse_puzzle_file,
    parse_xsb,
    parse_xsb_collection,
    render_puzzle_file,
    render_xsb,
    replay,
    scramble,
    successors,
)
from gvi_planner.domains.npuzzle import is_solvable
from gvi_planner.estimator import TabularEstimator
from gvi_planner.search import bfs_run
from conftest import DATA
from oracles import bfs_distance, flood_fill

CORRIDOR = "#####\n#@$.#\n#####"


# --- grid -------------------------------------------------------------------


def test_grid_corner_successors():
    g = corner_grid(50)
    assert sorted(successors((0, 0), g)) == [("R", (0, 1)), ("U", (1, 0))]


def test_grid_goal_is_far_corner():
    g = corner_grid(50)
    assert is_goal((49, 49), g)
    assert not is_goal((0, 49), g)


def test_grid_walls_block_moves():
    g = GridInstance("w", 3, 3, (0, 0), (2, 2), frozenset({(0, 1)}))
    assert [a for a, _ in g.successors((0, 0))] == ["U"]
    with pytest.raises(DomainError):
        g.successors((0, 1))


def test_grid_config_round_trip():
    g = GridInstance("w", 4, 5, (0, 0), (3, 4), frozenset({(1, 1), (2, 3)}))
    assert instance_from_config(g.to_config()) == g


def test_grid_encoding_one_hot():
    g = corner_grid(5)
    x = encode((2, 3), g)
    assert x.shape == (25,) and x.sum() == 1.0 and x[2 * 5 + 3] == 1.0


# --- n-puzzle ---------------------------------------------------------------


def test_puzzle_goal_has_two_successors():
    p = goal_puzzle(3)
    assert p.is_goal(p.start)
    assert len(p.successors(p.start)) == 2


def test_puzzle_encoding_one_hot_planes():
    p = scramble(goal_puzzle(3), 20, 4)
    x = encode(p.start, p)
    assert x.shape == (81,) and x.sum() == 9
    assert np.array_equal(x, encode(tuple(p.start), p))


def test_puzzle_rejects_unsolvable_permutation():
    with pytest.raises(DomainError):
        PuzzleInstance("bad", 3, (0, 2, 1, 3, 4, 5, 6, 7, 8))


def test_solvability_matches_reachability_on_2x2():
    # exhaustive: exactly the states reachable from the goal are solvable
    p = goal_puzzle(2)
    reach = {p.start}
    frontier = [p.start]
    while frontier:
        s = frontier.pop()
        for _, t in p.successors(s):
            if t not in reach:
                reach.add(t)
                frontier.append(t)
    perms = list(itertools.permutations(range(4)))
    assert len(reach) == 12
    assert {s for s in perms if is_solvable(s, 2)} == reach


def test_puzzle_file_round_trip():
    insts = [scramble(goal_puzzle(3), k, k) for k in (3, 7, 12)]
    text = render_puzzle_file(insts)
    back = parse_puzzle_file(text)
    assert [b.start for b in back] == [i.start for i in insts]
    with pytest.raises(DomainError):
        parse_puzzle_file("1 0 2\n")


# --- transition symmetry and scrambles --------------------------------------


@given(st.integers(0, 10_000), st.integers(0, 40))
def test_puzzle_transitions_invertible(seed, k):
    p = scramble(goal_puzzle(3), k, seed)
    for _, t in p.successors(p.start):
        assert p.start in {s for _, s in p.successors(t)}


@given(st.integers(0, 9), st.integers(0, 9))
def test_grid_transitions_invertible(r, c):
    g = GridInstance("g", 10, 10, (0, 0), (9, 9), frozenset({(5, 5), (3, 4)}) - {(r, c)})
    for _, t in g.successors((r, c)):
        assert (r, c) in {s for _, s in g.successors(t)}


def test_scramble_deterministic_and_ids():
    a = scramble(goal_puzzle(3), 15, 42)
    b = scramble(goal_puzzle(3), 15, 42)
    assert a == b and a.id.endswith("k15-s42")
    assert scramble(goal_puzzle(3), 0, 1).start == goal_puzzle(3).start
    with pytest.raises(ValueError):
        scramble(goal_puzzle(3), -1, 0)


def test_scramble_distance_at_most_k():
    for seed in range(30):
        k = seed % 12
        inst = scramble(goal_puzzle(3), k, seed)
        assert bfs_distance(inst) <= k


# --- plans ------------------------------------------------------------------


def test_replay_validates():
    g = corner_grid(3)
    good = Plan(g.id, ("U", "U", "R", "R"))
    assert replay(g, good)[-1] == (2, 2)
    assert not is_valid_plan(g, Plan(g.id, ("U", "R")))
    assert not is_valid_plan(g, Plan(g.id, ("D",)))
    with pytest.raises(InvalidPlan):
        replay(g, Plan("other", good.actions))
    with pytest.raises(InvalidPlan):
        g.replay_string("UUXRR")


# --- sokoban ----------------------------------------------------------------


def test_parse_corridor():
    lvl = parse_xsb(CORRIDOR)
    assert lvl.start_boxes == (lvl.cell(1, 2),)
    assert lvl.goals == {lvl.cell(1, 3)}
    assert lvl.start_player == lvl.cell(1, 1)


def test_corridor_single_push_solves():
    lvl = parse_xsb(CORRIDOR)
    succ = lvl.successors(lvl.start)
    assert len(succ) == 1
    (push, nxt), = succ
    assert push == Push(lvl.cell(1, 2), "R")
    assert lvl.is_goal(nxt)


def test_goal_ignores_player():
    lvl = parse_xsb("######\n#@ * #\n######")
    assert lvl.is_goal(lvl.start)
    assert lvl.is_goal(lvl.make_state(lvl.cell(1, 4), lvl.start_boxes))


@pytest.mark.parametrize(
    "text, line",
    [
        ("", 1),
        ("#####\n#@@.#\n#####", 2),
        ("#####\n#@$ #\n#####", 1),
        ("#####\n#@$x#\n#####", 2),
        ("####\n#@$.\n####", 2),
    ],
)
def test_parse_errors_carry_position(text, line):
    with pytest.raises(XsbParseError) as err:
        parse_xsb(text)
    assert err.value.line == line


def test_unreachable_exterior_becomes_wall():
    lvl = parse_xsb("  #####\n  #@$.#\n  #####")
    assert lvl.cell(1, 0) not in lvl.floor
    assert len(lvl.floor) == 3


def test_render_parse_round_trip_on_corpus():
    for lvl in load_levels(DATA / "tiny.xsb"):
        back = parse_xsb(render_xsb(lvl), id=lvl.id)
        assert (back.floor, back.goals, back.start) == (lvl.floor, lvl.goals, lvl.start)


def test_collection_titles_and_numbering():
    text = "; first\n" + CORRIDOR + "\n\n" + CORRIDOR + "\n"
    ids = [lv.id for lv in parse_xsb_collection(text, prefix="c")]
    assert ids == ["c_first", "c_2"]


def test_sokoban_encoding_planes():
    lvl = load_levels(DATA / "tiny.xsb")[3]
    planes = [lvl.encode(s).reshape(4, lvl.height, lvl.width) for s in [lvl.start] + [t for _, t in lvl.successors(lvl.start)]]
    sums = {tuple(p[:3].sum(axis=(1, 2))) for p in planes}
    assert len(sums) == 1
    walls, boxes, goals = next(iter(sums))
    assert boxes == goals == len(lvl.goals)
    assert walls == lvl.height * lvl.width - len(lvl.floor)
    padded = lvl.encode(lvl.start, (4, lvl.height + 2, lvl.width + 3))
    assert padded.reshape(4, lvl.height + 2, lvl.width + 3)[:, : lvl.height, : lvl.width].sum() == planes[0].sum()


def _random_board(rng: random.Random):
    H, W = rng.randint(3, 6), rng.randint(3, 6)
    text = []
    for r in range(H + 2):
        row = ""
        for c in range(W + 2):
            border = r in (0, H + 1) or c in (0, W + 1)
            row += "#" if border or rng.random() < 0.15 else " "
        text.append(row)
    return text


@given(st.integers(0, 2**31 - 1))
def test_player_normalization_matches_flood_fill(seed):
    rng = random.Random(seed)
    rows = _random_board(rng)
    free = [(r, c) for r, row in enumerate(rows) for c, ch in enumerate(row) if ch == " "]
    if len(free) < 4:
        return
    cells = rng.sample(free, 3)
    (pr, pc), (br, bc), (gr, gc) = cells
    rows = [list(r) for r in rows]
    rows[pr][pc], rows[br][bc], rows[gr][gc] = "@", "$", "."
    try:
        lvl = parse_xsb("\n".join("".join(r) for r in rows))
    except XsbParseError:
        return  # box or goal walled off from the player
    W = lvl.width
    floor = {divmod(c, W) for c in lvl.floor}
    region = flood_fill(floor, (pr, pc), {(br, bc)})
    states = {lvl.make_state(r * W + c, lvl.start_boxes) for r, c in region}
    assert states == {lvl.start}
    assert lvl.start[0] == min(r * W + c for r, c in region)
    s = lvl.start
    assert lvl.canonical(lvl.canonical(s)) == lvl.canonical(s) == s


def test_lurd_string_round_trip():
    lvl = load_levels(DATA / "tiny.xsb")[3]
    out = bfs_run(lvl, TabularEstimator(1.0), 5000)
    assert out.solved
    text = lvl.plan_to_string(out.plan.actions)
    assert lvl.push_count(text) == out.plan.length
    assert lvl.is_goal(lvl.replay_string(text))
    with pytest.raises(InvalidPlan):
        lvl.replay_string(text.swapcase())


def test_sokoban_config_round_trip():
    lvl = load_levels(DATA / "tiny.xsb")[1]
    back = instance_from_config(lvl.to_config())
    assert isinstance(back, SokobanInstance) and back.start == lvl.start


def test_sokoban_predecessors_invert_successors():
    lvl = load_levels(DATA / "tiny.xsb")[3]
    for push, t in lvl.successors(lvl.start):
        preds = lvl.predecessors(t)
        assert any(a == push and lvl.apply(p, a) == t for a, p in preds)
        for a, p in preds:
            assert lvl.apply(p, a) == t
