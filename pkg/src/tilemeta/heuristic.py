"""Nearest-neighbor reference performer and per-board z-scoring.

Performance on a board is scored against a structure-blind heuristic
that always clicks a covered tile 4-adjacent to some already-revealed
red tile, choosing uniformly among those (and uniformly among all
covered tiles if there are none).  Running the heuristic many times on
a board gives a blue-count distribution; a performer's z-score is their
blue count's position in that distribution, so lower is better and 0 is
heuristic-average.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .board import Board, neighbors4, tile_coords, tile_index
from .episode import CellState, EpisodeState, new_episode, step

# Baselines whose spread is below this are too degenerate to z-score
# against (e.g. single-red boards, where the heuristic always reveals
# zero blues).
MIN_BASELINE_STD = 1e-9


def heuristic_action(state: EpisodeState, rng: np.random.Generator) -> int:
    """One click of the nearest-neighbor heuristic."""
    frontier = sorted(
        {
            tile_index(nr, nc)
            for r in range(7)
            for c in range(7)
            if state.cells[r, c] == CellState.RED
            for nr, nc in neighbors4(r, c)
            if state.cells[nr, nc] == CellState.COVERED
        }
    )
    if not frontier:
        frontier = [int(i) for i in np.flatnonzero(state.cells.ravel() == CellState.COVERED)]
    return int(frontier[rng.integers(len(frontier))])


def nn_heuristic_rollout(board: Board, seed: int) -> int:
    """Play one full episode with the heuristic; return blues revealed."""
    rng = np.random.default_rng(seed)
    # The start tile gets its own derived seed: reusing `seed` directly
    # would hand new_episode the same stream the choices below consume,
    # correlating the start draw with the first click.
    state = new_episode(board, int(rng.integers(2**63)))
    while not state.over:
        step(state, heuristic_action(state, rng))
    return state.blue_revealed


@dataclass(frozen=True)
class BaselineSummary:
    mean_blue: float
    std_blue: float
    trials: int

    @property
    def defined(self) -> bool:
        return self.std_blue >= MIN_BASELINE_STD


def heuristic_baseline(board: Board, trials: int = 1000, seed: int = 0) -> BaselineSummary:
    """Blue-count distribution of the heuristic over independent trials.

    Trial k uses the k-th child of SeedSequence(seed), so results do not
    depend on evaluation order and are reproducible per (board, trials,
    seed).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    children = np.random.SeedSequence(seed).spawn(trials)
    counts = np.array(
        [nn_heuristic_rollout(board, int(child.generate_state(1)[0])) for child in children],
        dtype=np.float64,
    )
    return BaselineSummary(mean_blue=float(counts.mean()), std_blue=float(counts.std()), trials=trials)


def zscore(blue_count: int, baseline: BaselineSummary) -> float | None:
    """Standardize a blue count against a baseline.

    Returns None when the baseline spread is degenerate and the count
    differs from the baseline mean; such scores are undefined and must
    be excluded from aggregation rather than coerced to a number.
    """
    if baseline.defined:
        return (blue_count - baseline.mean_blue) / baseline.std_blue
    if abs(blue_count - baseline.mean_blue) <= MIN_BASELINE_STD:
        return 0.0
    return None


class BaselineCache:
    """Memoizes heuristic_baseline per (board, trials, seed)."""

    def __init__(self) -> None:
        self._cache: dict[tuple[bytes, int, int], BaselineSummary] = {}

    def get(self, board: Board, trials: int = 1000, seed: int = 0) -> BaselineSummary:
        key = (board.key(), trials, seed)
        if key not in self._cache:
            self._cache[key] = heuristic_baseline(board, trials=trials, seed=seed)
        return self._cache[key]
