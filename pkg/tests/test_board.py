import numpy as np
import pytest

from tilemeta.board import (
    Board,
    boards_from_jsonl,
    boards_to_jsonl,
    connected_components,
    neighbors4,
    tile_coords,
    tile_index,
)

from conftest import board_from_reds


def test_board_validation():
    with pytest.raises(ValueError):
        Board(np.zeros((7, 7), dtype=np.uint8))  # no red tile
    with pytest.raises(ValueError):
        Board(np.ones((6, 7), dtype=np.uint8))  # wrong shape
    bad = np.zeros((7, 7), dtype=np.uint8)
    bad[0, 0] = 2
    with pytest.raises(ValueError):
        Board(bad)


def test_board_counts_and_indices():
    board = board_from_reds([(0, 0), (6, 6)])
    assert board.red_count == 2
    assert board.blue_count == 47
    assert board.red_tiles() == [tile_index(0, 0), tile_index(6, 6)]
    assert tile_coords(tile_index(4, 5)) == (4, 5)


def test_board_equality_and_hash():
    a = board_from_reds([(1, 2), (3, 4)])
    b = board_from_reds([(1, 2), (3, 4)])
    c = board_from_reds([(1, 2), (3, 5)])
    assert a == b and hash(a) == hash(b)
    assert a != c
    assert len({a, b, c}) == 2


def test_board_json_round_trip():
    board = board_from_reds([(2, 2), (2, 3), (3, 2)])
    again = Board.from_json(board.to_json())
    assert again == board
    text = boards_to_jsonl([board, again])
    assert boards_from_jsonl(text) == [board, again]


def test_neighbors4_bounds():
    assert set(neighbors4(0, 0)) == {(1, 0), (0, 1)}
    assert set(neighbors4(3, 3)) == {(2, 3), (4, 3), (3, 2), (3, 4)}
    assert set(neighbors4(6, 6)) == {(5, 6), (6, 5)}


def test_connected_components():
    cells = [(0, 0), (0, 1), (3, 3), (4, 4)]
    comps4 = connected_components(cells)
    assert sorted(len(c) for c in comps4) == [1, 1, 2]
    comps8 = connected_components(cells, diagonal=True)
    assert sorted(len(c) for c in comps8) == [2, 2]
