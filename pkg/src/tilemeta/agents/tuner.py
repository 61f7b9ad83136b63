"""Random hyperparameter search with median pruning.

Each trial trains an agent with a sampled configuration and reports
mean training reward at evenly spaced checkpoints.  A trial whose
reward falls below the median of previously recorded trials at the
same checkpoint is stopped early.  Trials may run on worker threads;
the shared results board serializes recording and median queries, so a
median only ever reflects fully recorded checkpoints.
"""

from __future__ import annotations

import csv
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Callable, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from ..datasets import BoardSet
from ..nn.optim import RMSPropLike
from .a2c import A2CConfig, EpisodeRunner, a2c_update, collect_rollout, returns_and_advantages
from .policies import build_agent

N_CHECKPOINTS = 10


@dataclass(frozen=True)
class SearchSpace:
    gammas: tuple = (0.9, 0.95, 0.98, 0.99, 0.995, 0.999)
    n_steps_options: tuple = (2, 4, 6, 8, 10, 12, 14)
    learning_rate_range: tuple = (1e-5, 4e-3)
    schedules: tuple = ("constant", "linear")
    ent_coef_range: tuple = (1e-8, 1e-1)
    vf_coef_range: tuple = (1e-3, 1.0)


def _log_uniform(rng: np.random.Generator, low: float, high: float) -> float:
    return float(math.exp(rng.uniform(math.log(low), math.log(high))))


def sample_config(
    space: SearchSpace, rng: np.random.Generator, total_episodes: int, seed: int
) -> A2CConfig:
    return A2CConfig(
        gamma=float(rng.choice(space.gammas)),
        n_steps=int(rng.choice(space.n_steps_options)),
        learning_rate=_log_uniform(rng, *space.learning_rate_range),
        lr_schedule=str(rng.choice(space.schedules)),
        ent_coef=_log_uniform(rng, *space.ent_coef_range),
        vf_coef=_log_uniform(rng, *space.vf_coef_range),
        total_episodes=total_episodes,
        seed=seed,
    )


class TrialRecord(NamedTuple):
    trial_id: int
    checkpoint: int
    mean_reward: float
    pruned: bool


class TrialBoard:
    """Shared checkpoint records; all access goes through one lock."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._records: list[TrialRecord] = []

    def should_prune(self, trial_id: int, checkpoint: int, reward: float) -> bool:
        """Record the checkpoint and decide against the prior median."""
        with self._lock:
            prior = [
                r.mean_reward
                for r in self._records
                if r.checkpoint == checkpoint and r.trial_id != trial_id
            ]
            pruned = bool(prior) and reward < float(np.median(prior))
            self._records.append(TrialRecord(trial_id, checkpoint, reward, pruned))
            return pruned

    def records(self) -> list[TrialRecord]:
        with self._lock:
            return list(self._records)


def training_reward_stream(
    dataset: BoardSet | Sequence,
    arch: str,
    config: A2CConfig,
    n_checkpoints: int = N_CHECKPOINTS,
) -> Iterator[float]:
    """Train an agent, yielding mean reward per checkpoint window.

    The generator form lets the tuner abandon a pruned trial without
    paying for the rest of its episodes.
    """
    if isinstance(dataset, BoardSet):
        boards = dataset.train
        forbidden = frozenset(board.key() for board in dataset.test_boards)
    else:
        boards = list(dataset)
        forbidden = frozenset()
    agent = build_agent(arch, seed=config.seed)
    rng = np.random.default_rng(config.seed)
    runner = EpisodeRunner(boards, rng, forbidden_keys=forbidden)
    optimizer = RMSPropLike(learning_rate=config.learning_rate)
    hidden = agent.zero_state()
    window = max(1, config.total_episodes // n_checkpoints)
    emitted = 0
    while emitted < n_checkpoints:
        if config.lr_schedule == "linear":
            fraction = runner.episodes_finished / config.total_episodes
            optimizer.learning_rate = config.learning_rate * max(0.0, 1.0 - fraction)
        buffer, hidden = collect_rollout(agent, runner, hidden, config.n_steps, rng)
        returns_and_advantages(buffer, config.gamma)
        a2c_update(agent, optimizer, buffer, config)
        while emitted < n_checkpoints and runner.episodes_finished >= (emitted + 1) * window:
            chunk = runner.finished_rewards[emitted * window : (emitted + 1) * window]
            emitted += 1
            yield float(np.mean(chunk))


class TuneResult(NamedTuple):
    best_config: A2CConfig | None
    best_reward: float
    records: list[TrialRecord]
    configs: list[A2CConfig]


def tune(
    arch: str,
    dataset: BoardSet | Sequence,
    budget_trials: int,
    episodes_per_trial: int,
    seed: int = 0,
    space: SearchSpace | None = None,
    trial_fn: Callable[[A2CConfig], Iterable[float]] | None = None,
    n_workers: int = 1,
) -> TuneResult:
    """Random search; returns the best completed configuration.

    trial_fn maps a config to an iterable of checkpoint rewards and
    defaults to real A2C training.  Best is the highest final-checkpoint
    reward among trials that were never pruned.
    """
    if budget_trials < 1:
        raise ValueError("budget_trials must be >= 1")
    space = space or SearchSpace()
    rng = np.random.default_rng(seed)
    configs = [
        sample_config(space, rng, episodes_per_trial, seed=seed + trial)
        for trial in range(budget_trials)
    ]
    if trial_fn is None:
        trial_fn = lambda config: training_reward_stream(dataset, arch, config)
    board = TrialBoard()
    finals: dict[int, float] = {}

    def run_trial(trial_id: int) -> None:
        last = None
        for checkpoint, reward in enumerate(trial_fn(configs[trial_id])):
            last = (checkpoint, reward)
            if board.should_prune(trial_id, checkpoint, reward):
                return
        if last is not None:
            finals[trial_id] = last[1]

    if n_workers <= 1:
        for trial in range(budget_trials):
            run_trial(trial)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(run_trial, range(budget_trials)))
    if finals:
        best_id = max(finals, key=lambda tid: (finals[tid], -tid))
        best = configs[best_id]
        best_reward = finals[best_id]
    else:
        best, best_reward = None, float("-inf")
    return TuneResult(best, best_reward, board.records(), configs)


def write_trial_log(records: Sequence[TrialRecord], fp: IO[str]) -> None:
    writer = csv.writer(fp)
    writer.writerow(["trial_id", "checkpoint", "mean_reward", "pruned"])
    for record in records:
        writer.writerow(
            [record.trial_id, record.checkpoint, f"{record.mean_reward:.6f}", record.pruned]
        )


def read_trial_log(fp: IO[str]) -> list[TrialRecord]:
    rows = list(csv.DictReader(fp))
    return [
        TrialRecord(
            int(row["trial_id"]),
            int(row["checkpoint"]),
            float(row["mean_reward"]),
            row["pruned"] == "True",
        )
        for row in rows
    ]
