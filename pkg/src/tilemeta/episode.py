"""The tile-revealing episode: rules, rewards, and bookkeeping.

An episode starts with a single red tile revealed (chosen uniformly at
random among the board's red tiles) and proceeds by clicking tiles.
Revealing a red tile scores +1, a blue tile -1, and clicking any tile
that is already revealed scores -2.  Revealing the final red tile
scores +10 in place of the usual +1 and ends the episode.  Episodes
that run past the step cap are cut off with ``truncated`` set, which is
distinct from finishing the board: a truncated episode may still have
covered red tiles, and learners should bootstrap value there instead of
treating it as terminal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import IO, Iterable, Sequence

import numpy as np

from .board import GRID_SIZE, N_TILES, Board, tile_coords

REWARD_RED = 1
REWARD_BLUE = -1
REWARD_LAST_RED = 10
REWARD_REPEAT = -2
DEFAULT_STEP_CAP = 200


class CellState(IntEnum):
    """What the performer can see of one tile."""

    COVERED = 0
    RED = 1
    BLUE = 2


CELL_NAMES = {CellState.COVERED: "covered", CellState.RED: "red", CellState.BLUE: "blue"}


@dataclass
class StepOutcome:
    reward: int
    done: bool
    truncated: bool
    cells: np.ndarray


@dataclass
class EpisodeState:
    """Mutable state of one episode on one board.

    ``cells`` is the performer-visible observation: a (7, 7) uint8 array
    of ``CellState`` values.  It only ever moves from covered to
    revealed; revealed tiles never change color or re-cover.
    """

    board: Board
    cells: np.ndarray
    start_seed: int
    start_tile: int
    step_count: int = 0
    cumulative_reward: int = 0
    blue_revealed: int = 0
    reds_remaining: int = 0
    done: bool = False
    truncated: bool = False
    step_cap: int = DEFAULT_STEP_CAP
    last_red_bonus_additive: bool = False
    actions: list[int] = field(default_factory=list)

    @property
    def over(self) -> bool:
        return self.done

    @property
    def solved(self) -> bool:
        return self.done and not self.truncated


def new_episode(
    board: Board,
    seed: int,
    step_cap: int = DEFAULT_STEP_CAP,
    last_red_bonus_additive: bool = False,
) -> EpisodeState:
    """Start an episode with one red tile revealed.

    The initial tile is drawn uniformly among the board's red tiles from
    a generator seeded with ``seed``, so the same (board, seed) pair
    always starts identically.
    """
    rng = np.random.default_rng(seed)
    reds = board.red_tiles()
    start_tile = int(reds[rng.integers(len(reds))])
    cells = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    cells[tile_coords(start_tile)] = CellState.RED
    state = EpisodeState(
        board=board,
        cells=cells,
        start_seed=seed,
        start_tile=start_tile,
        reds_remaining=board.red_count - 1,
        step_cap=step_cap,
        last_red_bonus_additive=last_red_bonus_additive,
    )
    # A single-red board is complete the moment its start tile shows.
    state.done = state.reds_remaining == 0
    return state


def episode_with_start(
    board: Board,
    start_tile: int,
    step_cap: int = DEFAULT_STEP_CAP,
    last_red_bonus_additive: bool = False,
) -> EpisodeState:
    """Start an episode at a chosen red tile instead of a seeded draw.

    Scenario replays need the exact revealed tile, not a seed that maps
    to one.
    """
    if board.tiles[tile_coords(start_tile)] != 1:
        raise ValueError(f"start tile {start_tile} is not red on this board")
    cells = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    cells[tile_coords(start_tile)] = CellState.RED
    state = EpisodeState(
        board=board,
        cells=cells,
        start_seed=-1,
        start_tile=int(start_tile),
        reds_remaining=board.red_count - 1,
        step_cap=step_cap,
        last_red_bonus_additive=last_red_bonus_additive,
    )
    state.done = state.reds_remaining == 0
    return state


def step(state: EpisodeState, action: int) -> StepOutcome:
    """Click tile ``action`` (flat index 0..48) and update the episode."""
    if state.over:
        raise RuntimeError("episode is over; no further steps allowed")
    if not 0 <= action < N_TILES:
        raise ValueError(f"action must be in [0, {N_TILES}), got {action}")

    coords = tile_coords(action)
    if state.cells[coords] != CellState.COVERED:
        reward = REWARD_REPEAT
    elif state.board.tiles[coords] == 1:
        state.cells[coords] = CellState.RED
        state.reds_remaining -= 1
        if state.reds_remaining == 0:
            reward = REWARD_LAST_RED + (REWARD_RED if state.last_red_bonus_additive else 0)
            state.done = True
        else:
            reward = REWARD_RED
    else:
        state.cells[coords] = CellState.BLUE
        state.blue_revealed += 1
        reward = REWARD_BLUE

    state.step_count += 1
    state.cumulative_reward += reward
    state.actions.append(action)
    if not state.done and state.step_count >= state.step_cap:
        # Cut off, not solved: done is set so play stops, truncated marks
        # that reds may remain covered.
        state.done = True
        state.truncated = True
    return StepOutcome(reward=reward, done=state.done, truncated=state.truncated, cells=state.cells)


def replay(
    board: Board,
    seed: int,
    actions: Sequence[int],
    step_cap: int = DEFAULT_STEP_CAP,
) -> tuple[EpisodeState, list[StepOutcome]]:
    """Re-run a recorded action sequence from the same start."""
    state = new_episode(board, seed, step_cap=step_cap)
    outcomes = [step(state, a) for a in actions]
    return state, outcomes


def write_action_log(fp: IO[str], outcomes: Iterable[StepOutcome], actions: Sequence[int]) -> None:
    """Write one JSON object per step: {"step", "tile", "reward", "done"}."""
    for i, (outcome, action) in enumerate(zip(outcomes, actions)):
        fp.write(
            json.dumps({"step": i, "tile": int(action), "reward": int(outcome.reward), "done": bool(outcome.done)})
            + "\n"
        )


def read_action_log(fp: IO[str]) -> list[dict]:
    return [json.loads(line) for line in fp if line.strip()]
