"""Boards for the tile-revealing task.

A board is a 7x7 grid of tiles, each either red or blue.  Red tiles are
the targets: an episode on a board ends once every red tile has been
revealed.  Boards are stored as uint8 arrays with 1 for red and 0 for
blue, and every valid board has at least one red tile.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

GRID_SIZE = 7
N_TILES = GRID_SIZE * GRID_SIZE


@dataclass(frozen=True)
class Board:
    """A fixed red/blue tile layout.

    ``tiles`` is a (7, 7) uint8 array, row-major, with 1 = red and
    0 = blue.  Instances compare and hash by tile contents so they can
    be deduplicated in sets and dicts.
    """

    tiles: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        tiles = np.array(self.tiles, dtype=np.uint8)  # copy: the original stays writable
        if tiles.shape != (GRID_SIZE, GRID_SIZE):
            raise ValueError(f"board must be {GRID_SIZE}x{GRID_SIZE}, got {tiles.shape}")
        if not np.isin(tiles, (0, 1)).all():
            raise ValueError("board tiles must be 0 (blue) or 1 (red)")
        if int(tiles.sum()) < 1:
            raise ValueError("board must contain at least one red tile")
        tiles.setflags(write=False)
        object.__setattr__(self, "tiles", tiles)

    @property
    def red_count(self) -> int:
        return int(self.tiles.sum())

    @property
    def blue_count(self) -> int:
        return N_TILES - self.red_count

    def red_tiles(self) -> list[int]:
        """Flat indices of the red tiles, row-major ascending."""
        return [int(i) for i in np.flatnonzero(self.tiles.ravel())]

    def key(self) -> bytes:
        return self.tiles.tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Board):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def to_json(self) -> str:
        return json.dumps({"tiles": self.tiles.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Board":
        data = json.loads(text)
        return cls(np.array(data["tiles"], dtype=np.uint8))


def tile_index(row: int, col: int) -> int:
    return row * GRID_SIZE + col


def tile_coords(index: int) -> tuple[int, int]:
    return divmod(index, GRID_SIZE)


def neighbors4(row: int, col: int) -> Iterator[tuple[int, int]]:
    """In-bounds 4-neighbors (up, down, left, right) of a cell."""
    if row > 0:
        yield row - 1, col
    if row < GRID_SIZE - 1:
        yield row + 1, col
    if col > 0:
        yield row, col - 1
    if col < GRID_SIZE - 1:
        yield row, col + 1


def connected_components(cells: Iterable[tuple[int, int]], diagonal: bool = False) -> list[set[tuple[int, int]]]:
    """Connected components of a cell set, 4-connected by default.

    With ``diagonal=True`` the eight surrounding cells count as adjacent.
    """
    remaining = set(cells)
    components: list[set[tuple[int, int]]] = []
    while remaining:
        seed = remaining.pop()
        comp = {seed}
        frontier = [seed]
        while frontier:
            r, c = frontier.pop()
            if diagonal:
                adj = [
                    (r + dr, c + dc)
                    for dr in (-1, 0, 1)
                    for dc in (-1, 0, 1)
                    if (dr, dc) != (0, 0)
                ]
            else:
                adj = list(neighbors4(r, c))
            for cell in adj:
                if cell in remaining:
                    remaining.remove(cell)
                    comp.add(cell)
                    frontier.append(cell)
        components.append(comp)
    return components


def boards_to_jsonl(boards: Iterable[Board]) -> str:
    return "".join(b.to_json() + "\n" for b in boards)


def boards_from_jsonl(text: str) -> list[Board]:
    return [Board.from_json(line) for line in text.splitlines() if line.strip()]
