"""Procedural generators and validators for the eight board distributions.

Each abstraction is a recipe for painting red tiles on a 7x7 board:

* copy: one random nonempty 3x3 pattern stamped into two non-overlapping
  3x3 windows.
* symmetry: a seed tile on an interior mirror axis, grown by four
  neighbor picks on one side, each reflected across the axis.
* rectangle: a filled axis-aligned rectangle, at least 2x2.
* connected: a closed ring of red tiles around a small blob of interior
  tiles.
* tree: a branching path; growth never closes a loop, so no 2x2 block
  is ever fully red.
* pyramid: stacked centered rows shrinking by one tile per side,
  rotated by a random multiple of 90 degrees.
* cross: two perpendicular segments (both axis-aligned or both
  diagonal) crossing at one tile, every arm at least 1 tile long.
* zigzag: alternating horizontal and vertical runs of one fixed step
  length, marching toward the bottom-right until clipped by the edge.

Generators draw from a caller-provided numpy Generator and resample
internally on degenerate draws; validators are pure predicates used
both in tests and to reject malformed boards.  Rectangle, pyramid,
cross, and zigzag validators are exact; tree and connected check
necessary conditions of their growth processes.
"""

from __future__ import annotations

from enum import Enum
from functools import lru_cache

import numpy as np

from .board import GRID_SIZE, Board, connected_components, neighbors4

RESAMPLE_LIMIT = 1000


class GenerationError(RuntimeError):
    """A generator exceeded its internal resample budget."""


class AbstractionKind(str, Enum):
    COPY = "copy"
    SYMMETRY = "symmetry"
    RECTANGLE = "rectangle"
    CONNECTED = "connected"
    TREE = "tree"
    PYRAMID = "pyramid"
    CROSS = "cross"
    ZIGZAG = "zigzag"


# ---------------------------------------------------------------------------
# copy

def _generate_copy(rng: np.random.Generator) -> np.ndarray | None:
    pattern = rng.integers(0, 2, size=(3, 3))
    while not pattern.any():
        pattern = rng.integers(0, 2, size=(3, 3))
    windows = [(r, c) for r in range(5) for c in range(5)]
    r1, c1 = windows[rng.integers(len(windows))]
    disjoint = [(r, c) for r, c in windows if abs(r - r1) >= 3 or abs(c - c1) >= 3]
    if not disjoint:
        return None  # only the center window has no disjoint partner
    r2, c2 = disjoint[rng.integers(len(disjoint))]
    tiles = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    tiles[r1 : r1 + 3, c1 : c1 + 3] = pattern
    tiles[r2 : r2 + 3, c2 : c2 + 3] = pattern
    return tiles


def _validate_copy(tiles: np.ndarray) -> bool:
    windows = [(r, c) for r in range(5) for c in range(5)]
    red_total = int(tiles.sum())
    if red_total == 0 or red_total % 2 != 0:
        return False
    for i, (r1, c1) in enumerate(windows):
        for r2, c2 in windows[i + 1 :]:
            if abs(r1 - r2) < 3 and abs(c1 - c2) < 3:
                continue
            outside = tiles.copy()
            outside[r1 : r1 + 3, c1 : c1 + 3] = 0
            outside[r2 : r2 + 3, c2 : c2 + 3] = 0
            if outside.any():
                continue
            a = tiles[r1 : r1 + 3, c1 : c1 + 3]
            b = tiles[r2 : r2 + 3, c2 : c2 + 3]
            if a.any() and np.array_equal(a, b):
                return True
    return False


# ---------------------------------------------------------------------------
# symmetry

def _mirror(cell: tuple[int, int], axis_is_row: bool, axis: int) -> tuple[int, int]:
    r, c = cell
    return (2 * axis - r, c) if axis_is_row else (r, 2 * axis - c)


def _generate_symmetry(rng: np.random.Generator) -> np.ndarray:
    axis_is_row = bool(rng.integers(2))
    axis = int(rng.integers(1, 6))
    on_axis = int(rng.integers(GRID_SIZE))
    seed_cell = (axis, on_axis) if axis_is_row else (on_axis, axis)
    red = {seed_cell}
    for _ in range(4):
        # Candidates sit strictly on the near side (above a row axis,
        # left of a column axis) and must reflect back onto the board.
        candidates = sorted(
            {
                n
                for cell in red
                for n in neighbors4(*cell)
                if (n[0] < axis if axis_is_row else n[1] < axis)
                and all(0 <= v < GRID_SIZE for v in _mirror(n, axis_is_row, axis))
            }
        )
        pick = candidates[rng.integers(len(candidates))]
        red.add(pick)
        red.add(_mirror(pick, axis_is_row, axis))
    tiles = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    for r, c in red:
        tiles[r, c] = 1
    return tiles


def _validate_symmetry(tiles: np.ndarray) -> bool:
    red = [tuple(rc) for rc in np.argwhere(tiles == 1)]
    if not red or len(connected_components(red)) != 1:
        return False
    for axis_is_row in (True, False):
        for axis in range(1, 6):
            mirrored = {_mirror(cell, axis_is_row, axis) for cell in red}
            on_axis = any((cell[0] if axis_is_row else cell[1]) == axis for cell in red)
            if on_axis and mirrored == set(red):
                return True
    return False


# ---------------------------------------------------------------------------
# rectangle

def _generate_rectangle(rng: np.random.Generator) -> np.ndarray:
    r1, r2 = sorted(rng.choice(GRID_SIZE, size=2, replace=False))
    c1, c2 = sorted(rng.choice(GRID_SIZE, size=2, replace=False))
    tiles = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    tiles[r1 : r2 + 1, c1 : c2 + 1] = 1
    return tiles


def _validate_rectangle(tiles: np.ndarray) -> bool:
    rows = np.flatnonzero(tiles.any(axis=1))
    cols = np.flatnonzero(tiles.any(axis=0))
    if len(rows) < 2 or len(cols) < 2:
        return False
    filled = np.zeros_like(tiles)
    filled[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1] = 1
    return np.array_equal(tiles, filled)


def enumerate_rectangles() -> list[Board]:
    """All 441 distinct rectangle boards (21 row pairs x 21 column pairs)."""
    boards = []
    for r1 in range(GRID_SIZE):
        for r2 in range(r1 + 1, GRID_SIZE):
            for c1 in range(GRID_SIZE):
                for c2 in range(c1 + 1, GRID_SIZE):
                    tiles = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
                    tiles[r1 : r2 + 1, c1 : c2 + 1] = 1
                    boards.append(Board(tiles))
    return boards


# ---------------------------------------------------------------------------
# connected

def _generate_connected(rng: np.random.Generator) -> np.ndarray | None:
    blob = {(int(rng.integers(GRID_SIZE)), int(rng.integers(GRID_SIZE)))}
    for _ in range(int(rng.integers(1, 4))):
        candidates = sorted(
            {n for cell in blob for n in neighbors4(*cell) if n not in blob}
        )
        blob.add(candidates[rng.integers(len(candidates))])
    # A blob tile on the frame would push part of the ring off-board.
    if any(r in (0, 6) or c in (0, 6) for r, c in blob):
        return None
    tiles = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    for cell in blob:
        for n in neighbors4(*cell):
            if n not in blob:
                tiles[n] = 1
    return tiles


def _validate_connected(tiles: np.ndarray) -> bool:
    red = [tuple(rc) for rc in np.argwhere(tiles == 1)]
    if not red or len(connected_components(red, diagonal=True)) != 1:
        return False
    # Flood the non-red region from the frame; anything left unreached
    # is enclosed by the ring.
    open_cells = {tuple(rc) for rc in np.argwhere(tiles == 0)}
    frontier = [c for c in open_cells if c[0] in (0, 6) or c[1] in (0, 6)]
    reached = set(frontier)
    while frontier:
        cell = frontier.pop()
        for n in neighbors4(*cell):
            if n in open_cells and n not in reached:
                reached.add(n)
                frontier.append(n)
    return len(open_cells - reached) >= 1


# ---------------------------------------------------------------------------
# tree

def _has_all_red_2x2(tiles: np.ndarray) -> bool:
    return bool(
        (tiles[:-1, :-1] & tiles[:-1, 1:] & tiles[1:, :-1] & tiles[1:, 1:]).any()
    )


def _generate_tree(rng: np.random.Generator) -> np.ndarray | None:
    tiles = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    start = (int(rng.integers(GRID_SIZE)), int(rng.integers(GRID_SIZE)))
    tiles[start] = 1
    for _ in range(int(rng.integers(2, 5))):
        candidates = []
        for r, c in map(tuple, np.argwhere(tiles == 1)):
            for dr in (-1, 1):
                for dc in (-1, 1):
                    t1, t2 = (r + dr, c), (r, c + dc)
                    if not all(0 <= v < GRID_SIZE for v in t1 + t2):
                        continue
                    if tiles[t1] or tiles[t2]:
                        continue
                    trial = tiles.copy()
                    trial[t1] = trial[t2] = 1
                    if not _has_all_red_2x2(trial):
                        candidates.append((r, c, dr, dc))
        if not candidates:
            return None
        r, c, dr, dc = candidates[rng.integers(len(candidates))]
        tiles[r + dr, c] = 1
        tiles[r, c + dc] = 1
    return tiles


def _validate_tree(tiles: np.ndarray) -> bool:
    red = [tuple(rc) for rc in np.argwhere(tiles == 1)]
    return (
        len(red) >= 3
        and len(connected_components(red)) == 1
        and not _has_all_red_2x2(tiles)
    )


# ---------------------------------------------------------------------------
# pyramid

_PYRAMID_LEVELS = {7: 4, 5: 3, 3: 2}


def _pyramid_tiles(base: int, base_row: int, col: int) -> np.ndarray:
    """Upright pyramid with its base's left edge at ``col``."""
    tiles = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    for level in range(_PYRAMID_LEVELS[base]):
        width = base - 2 * level
        tiles[base_row - level, col + level : col + level + width] = 1
    return tiles


@lru_cache(maxsize=1)
def pyramid_shapes() -> frozenset[bytes]:
    """Every valid pyramid board, closed under 90-degree rotation."""
    shapes = set()
    for base, levels in _PYRAMID_LEVELS.items():
        rows = [6] if base == 7 else range(levels - 1, GRID_SIZE)
        for base_row in rows:
            for col in range(GRID_SIZE - base + 1):
                tiles = _pyramid_tiles(base, base_row, col)
                for k in range(4):
                    shapes.add(np.ascontiguousarray(np.rot90(tiles, k)).tobytes())
    return frozenset(shapes)


def _generate_pyramid(rng: np.random.Generator) -> np.ndarray:
    base = (7, 5, 3)[rng.integers(3)]
    levels = _PYRAMID_LEVELS[base]
    base_row = 6 if base == 7 else int(rng.integers(levels - 1, GRID_SIZE))
    col = int(rng.integers(GRID_SIZE - base + 1))
    tiles = _pyramid_tiles(base, base_row, col)
    return np.ascontiguousarray(np.rot90(tiles, int(rng.integers(4))))


def _validate_pyramid(tiles: np.ndarray) -> bool:
    return np.ascontiguousarray(tiles).tobytes() in pyramid_shapes()


# ---------------------------------------------------------------------------
# cross

_HV_DIRS = ((-1, 0), (1, 0), (0, -1), (0, 1))
_DIAG_DIRS = ((-1, -1), (-1, 1), (1, -1), (1, 1))


def _arm_room(center: tuple[int, int], d: tuple[int, int]) -> int:
    r, c = center
    room_r = (r if d[0] < 0 else 6 - r) if d[0] else GRID_SIZE
    room_c = (c if d[1] < 0 else 6 - c) if d[1] else GRID_SIZE
    return min(room_r, room_c)


def _generate_cross(rng: np.random.Generator) -> np.ndarray:
    dirs = _DIAG_DIRS if rng.integers(2) else _HV_DIRS
    center = (int(rng.integers(1, 6)), int(rng.integers(1, 6)))
    tiles = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    tiles[center] = 1
    for d in dirs:
        length = int(rng.integers(1, _arm_room(center, d) + 1))
        for i in range(1, length + 1):
            tiles[center[0] + d[0] * i, center[1] + d[1] * i] = 1
    return tiles


def _validate_cross(tiles: np.ndarray) -> bool:
    red = {tuple(rc) for rc in np.argwhere(tiles == 1)}
    for dirs in (_HV_DIRS, _DIAG_DIRS):
        for center in red:
            rebuilt = {center}
            lengths = []
            for d in dirs:
                length = 0
                cell = (center[0] + d[0], center[1] + d[1])
                while 0 <= cell[0] < GRID_SIZE and 0 <= cell[1] < GRID_SIZE and cell in red:
                    rebuilt.add(cell)
                    length += 1
                    cell = (cell[0] + d[0], cell[1] + d[1])
                lengths.append(length)
            if min(lengths) >= 1 and rebuilt == red:
                return True
    return False


# ---------------------------------------------------------------------------
# zigzag

def _zigzag_tiles(start: tuple[int, int], horizontal_first: bool, step: int) -> np.ndarray:
    tiles = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    r, c = start
    tiles[r, c] = 1
    horizontal = horizontal_first
    while True:
        for _ in range(step):
            nr, nc = (r, c + 1) if horizontal else (r + 1, c)
            if nr >= GRID_SIZE or nc >= GRID_SIZE:
                return tiles  # run clipped by the edge: zigzag ends
            r, c = nr, nc
            tiles[r, c] = 1
        horizontal = not horizontal


@lru_cache(maxsize=1)
def zigzag_shapes() -> frozenset[bytes]:
    """Every zigzag board over start x first-direction x step."""
    shapes = set()
    for r in range(GRID_SIZE):
        for c in range(GRID_SIZE):
            for horizontal_first in (True, False):
                room = (6 - c) if horizontal_first else (6 - r)
                for step in range(1, min(6, room) + 1):
                    shapes.add(_zigzag_tiles((r, c), horizontal_first, step).tobytes())
    return frozenset(shapes)


def _generate_zigzag(rng: np.random.Generator) -> np.ndarray | None:
    start = (int(rng.integers(GRID_SIZE)), int(rng.integers(GRID_SIZE)))
    horizontal_first = bool(rng.integers(2))
    room = (6 - start[1]) if horizontal_first else (6 - start[0])
    if room < 1:
        return None
    step = int(rng.integers(1, min(6, room) + 1))
    return _zigzag_tiles(start, horizontal_first, step)


def _validate_zigzag(tiles: np.ndarray) -> bool:
    return np.ascontiguousarray(tiles).tobytes() in zigzag_shapes()


# ---------------------------------------------------------------------------
# dispatch

_GENERATORS = {
    AbstractionKind.COPY: _generate_copy,
    AbstractionKind.SYMMETRY: _generate_symmetry,
    AbstractionKind.RECTANGLE: _generate_rectangle,
    AbstractionKind.CONNECTED: _generate_connected,
    AbstractionKind.TREE: _generate_tree,
    AbstractionKind.PYRAMID: _generate_pyramid,
    AbstractionKind.CROSS: _generate_cross,
    AbstractionKind.ZIGZAG: _generate_zigzag,
}

_VALIDATORS = {
    AbstractionKind.COPY: _validate_copy,
    AbstractionKind.SYMMETRY: _validate_symmetry,
    AbstractionKind.RECTANGLE: _validate_rectangle,
    AbstractionKind.CONNECTED: _validate_connected,
    AbstractionKind.TREE: _validate_tree,
    AbstractionKind.PYRAMID: _validate_pyramid,
    AbstractionKind.CROSS: _validate_cross,
    AbstractionKind.ZIGZAG: _validate_zigzag,
}


def generate_board(kind: AbstractionKind, rng: np.random.Generator) -> Board:
    """Draw one board from ``kind``'s distribution.

    Degenerate draws (a blob touching the frame, a start with no room,
    a stalled tree) return None internally and are retried; exceeding
    RESAMPLE_LIMIT attempts means the rule itself is broken.
    """
    kind = AbstractionKind(kind)
    generator = _GENERATORS[kind]
    for _ in range(RESAMPLE_LIMIT):
        tiles = generator(rng)
        if tiles is not None:
            return Board(tiles)
    raise GenerationError(f"{kind.value}: no valid draw in {RESAMPLE_LIMIT} attempts")


def validate_board(kind: AbstractionKind, board: Board) -> bool:
    return _VALIDATORS[AbstractionKind(kind)](np.asarray(board.tiles))
