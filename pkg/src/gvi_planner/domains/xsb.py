"""Reading and writing Sokoban levels in XSB text format."""

from __future__ import annotations

import re
from dataclasses import replace
from pathlib import Path

from .base import DomainError
from .sokoban import SokobanInstance

LEVEL_CHARS = set("#@$.*+ -_")


class XsbParseError(DomainError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


def _is_board_line(line: str) -> bool:
    stripped = line.rstrip()
    return bool(stripped) and "#" in stripped and set(stripped) <= LEVEL_CHARS


def parse_xsb(text: str, id: str = "level", first_line: int = 1) -> SokobanInstance:
    """Parse a single XSB board.

    Cells not reachable from the player (boxes count as floor for this
    purpose) become walls.
    """
    rows = [line.rstrip("\r\n") for line in text.splitlines()]
    while rows and not rows[-1].strip():
        rows.pop()
    while rows and not rows[0].strip():
        rows.pop(0)
        first_line += 1
    if not rows:
        raise XsbParseError("empty level", first_line)
    height = len(rows)
    width = max(len(r) for r in rows)
    walls, boxes, goals = set(), set(), set()
    player = None
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            cell = r * width + c
            if ch not in LEVEL_CHARS:
                raise XsbParseError(f"unexpected character {ch!r}", first_line + r, c + 1)
            if ch == "#":
                walls.add(cell)
            if ch in "$*":
                boxes.add(cell)
            if ch in ".*+":
                goals.add(cell)
            if ch in "@+":
                if player is not None:
                    raise XsbParseError("more than one player", first_line + r, c + 1)
                player = cell
    if player is None:
        raise XsbParseError("no player on the board", first_line)
    if len(boxes) != len(goals):
        raise XsbParseError(f"{len(boxes)} boxes but {len(goals)} goals", first_line)
    if not boxes:
        raise XsbParseError("level has no boxes", first_line)

    # flood fill from the player through everything that is not a wall
    floor = {player}
    stack = [player]
    while stack:
        cur = stack.pop()
        r, c = divmod(cur, width)
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nr, nc = r + dr, c + dc
            if not (0 <= nr < height and 0 <= nc < width):
                raise XsbParseError("level is not enclosed by walls", first_line + r, c + 1)
            nxt = nr * width + nc
            if nxt not in floor and nxt not in walls:
                floor.add(nxt)
                stack.append(nxt)
    for cell in sorted((boxes | goals) - floor):
        r, c = divmod(cell, width)
        raise XsbParseError("box or goal outside the player's area", first_line + r, c + 1)
    return SokobanInstance(id, height, width, frozenset(floor), frozenset(goals), player, tuple(boxes))


def render_xsb(inst: SokobanInstance, state=None, player: int | None = None) -> str:
    """Render ``inst`` (or ``state``) as XSB text.

    Walls are drawn only where they touch the playable area; other non-floor
    cells are left blank.
    """
    if state is None:
        boxes = set(inst.start_boxes)
        player = inst.start_player if player is None else player
    else:
        boxes = set(state[1:])
        player = state[0] if player is None else player
    W = inst.width
    lines = []
    for r in range(inst.height):
        chars = []
        for c in range(W):
            cell = r * W + c
            if cell in inst.floor:
                goal = cell in inst.goals
                if cell in boxes:
                    chars.append("*" if goal else "$")
                elif cell == player:
                    chars.append("+" if goal else "@")
                else:
                    chars.append("." if goal else " ")
            else:
                touching = any(
                    (r + dr) * W + (c + dc) in inst.floor
                    for dr in (-1, 0, 1)
                    for dc in (-1, 0, 1)
                    if 0 <= r + dr < inst.height and 0 <= c + dc < W
                )
                chars.append("#" if touching else " ")
        lines.append("".join(chars).rstrip())
    return "\n".join(lines) + "\n"


def _slug(title: str) -> str | None:
    return re.sub(r"[^A-Za-z0-9.-]+", "_", title.strip()).strip("_") or None


def parse_xsb_collection(text: str, prefix: str = "level") -> list[SokobanInstance]:
    """Parse a multi-level file.

    Levels are runs of board lines. Lines starting with ``;`` and other
    non-board lines separate levels; a ``;`` line directly before a level is
    used as its title when it is short.
    """
    levels = []
    block: list[str] = []
    block_start = 0
    title = None
    pending_title = None

    def flush():
        nonlocal block, title
        if block:
            n = len(levels) + 1
            name = f"{prefix}_{title}" if title else f"{prefix}_{n}"
            levels.append(parse_xsb("\n".join(block), id=name, first_line=block_start))
        block = []
        title = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\r\n")
        if _is_board_line(line):
            if not block:
                block_start = lineno
                title = pending_title
                pending_title = None
            block.append(line)
            continue
        flush()
        stripped = line.strip()
        if stripped.startswith(";"):
            t = stripped.lstrip("; ").strip()
            pending_title = _slug(t) if len(t) <= 40 else None
        elif stripped.lower().startswith("title:"):
            pending_title = _slug(stripped[6:])
    flush()
    ids = [lv.id for lv in levels]
    if len(set(ids)) != len(ids):
        levels = [replace(lv, id=f"{prefix}_{i + 1}") for i, lv in enumerate(levels)]
    return levels


def load_levels(path: str | Path) -> list[SokobanInstance]:
    """Load every level from a file or from all ``*.xsb``/``*.sok``/``*.txt`` files in a directory."""
    path = Path(path)
    if path.is_dir():
        files = sorted(
            p for p in path.iterdir() if p.suffix.lower() in (".xsb", ".sok", ".txt")
        )
    else:
        files = [path]
    out = []
    for f in files:
        out.extend(parse_xsb_collection(f.read_text(), prefix=f.stem))
    return out
