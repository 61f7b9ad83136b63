"""Tile-revealing boards, metamer synthesis, and meta-learning agents."""

from .board import Board, GRID_SIZE, N_TILES
from .episode import CellState, EpisodeState, StepOutcome, new_episode, replay, step
from .heuristic import BaselineCache, BaselineSummary, heuristic_baseline, nn_heuristic_rollout, zscore

__version__ = "0.1.0"

__all__ = [
    "Board",
    "GRID_SIZE",
    "N_TILES",
    "CellState",
    "EpisodeState",
    "StepOutcome",
    "new_episode",
    "replay",
    "step",
    "BaselineCache",
    "BaselineSummary",
    "heuristic_baseline",
    "nn_heuristic_rollout",
    "zscore",
    "__version__",
]
