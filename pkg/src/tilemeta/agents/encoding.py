"""Board observations as the policy networks see them.

The visible board becomes three one-hot planes (covered, red, blue) in
channel-first layout.  Recurrent performers additionally receive the
previous action as a 49-way one-hot vector and the previous reward as a
scalar; both are zero at the first step of an episode, which is how the
network can tell episodes apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..board import GRID_SIZE, N_TILES
from ..episode import EpisodeState

N_PLANES = 3
N_ACTIONS = N_TILES


@dataclass(frozen=True)
class AgentObservation:
    planes: np.ndarray  # (3, 7, 7) float64, one-hot over cell states
    prev_action: np.ndarray  # (49,) float64 one-hot, all-zero at episode start
    prev_reward: float

    def validate(self) -> "AgentObservation":
        if self.planes.shape != (N_PLANES, GRID_SIZE, GRID_SIZE):
            raise ValueError(f"planes shape {self.planes.shape}")
        if not np.array_equal(self.planes.sum(axis=0), np.ones((GRID_SIZE, GRID_SIZE))):
            raise ValueError("each cell must activate exactly one plane")
        if self.prev_action.shape != (N_ACTIONS,):
            raise ValueError(f"prev_action shape {self.prev_action.shape}")
        if not np.isfinite(self.prev_reward):
            raise ValueError("prev_reward must be finite")
        return self


def cell_planes(cells: np.ndarray) -> np.ndarray:
    """One-hot planes for a (7, 7) array of cell states."""
    planes = np.zeros((N_PLANES, GRID_SIZE, GRID_SIZE))
    for value in range(N_PLANES):
        planes[value][cells == value] = 1.0
    return planes


def observe(state: EpisodeState, prev_action: int | None, prev_reward: float) -> AgentObservation:
    action_vec = np.zeros(N_ACTIONS)
    if prev_action is not None:
        if not 0 <= prev_action < N_ACTIONS:
            raise ValueError(f"prev_action {prev_action} out of range")
        action_vec[prev_action] = 1.0
    return AgentObservation(
        planes=cell_planes(state.cells), prev_action=action_vec, prev_reward=float(prev_reward)
    )


def initial_observation(state: EpisodeState) -> AgentObservation:
    """Observation at the start of an episode: no previous action or reward."""
    return observe(state, None, 0.0)
