import numpy as np
import pytest

from tilemeta.board import GRID_SIZE, Board


def board_from_reds(reds):
    tiles = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    for r, c in reds:
        tiles[r, c] = 1
    return Board(tiles)


@pytest.fixture
def corner_square_board():
    return board_from_reds([(0, 0), (0, 1), (1, 0), (1, 1)])


@pytest.fixture
def single_red_board():
    return board_from_reds([(3, 3)])
