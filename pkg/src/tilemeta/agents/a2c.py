"""Advantage actor-critic training over streams of board episodes.

Rollouts collect a fixed number of environment steps (episodes are
chained; a finished episode is immediately replaced by a fresh draw
from the training pool), n-step returns bootstrap from the value head,
and one optimizer step is taken per rollout with gradients flowing
through the recurrent chain.  Episode boundaries reset the hidden state
and block gradient flow, unless carry_state keeps the state across
boundaries.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import IO, Callable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ..board import Board
from ..datasets import BoardSet
from ..episode import DEFAULT_STEP_CAP, EpisodeState, episode_with_start, new_episode, step
from ..nn.losses import clamp_probs, entropy_of_logits
from ..nn.optim import RMSPropLike
from .encoding import AgentObservation, initial_observation, observe
from .policies import agent_from_dict, agent_to_dict, build_agent

LR_SCHEDULES = ("constant", "linear")
REWARD_WINDOW = 1000
AGENT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class A2CConfig:
    gamma: float = 0.9
    n_steps: int = 2
    learning_rate: float = 7e-4
    lr_schedule: str = "constant"
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    total_episodes: int = 50_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {LR_SCHEDULES}")
        if self.ent_coef < 0 or self.vf_coef < 0:
            raise ValueError("loss coefficients must be >= 0")
        if self.total_episodes < 0:
            raise ValueError("total_episodes must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "A2CConfig":
        return cls(**data)


@dataclass(frozen=True)
class LossBreakdown:
    policy_loss: float
    value_loss: float
    entropy_loss: float
    total: float


@dataclass
class RolloutBuffer:
    """Per-step records of one rollout plus processed returns."""

    observations: list[AgentObservation] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    log_probs: list[float] = field(default_factory=list)
    probs: list[np.ndarray] = field(default_factory=list)
    caches: list[dict] = field(default_factory=list)
    episode_starts: list[bool] = field(default_factory=list)
    dones: list[bool] = field(default_factory=list)
    truncateds: list[bool] = field(default_factory=list)
    boot_values: list[float] = field(default_factory=list)
    tail_bootstrap: float = 0.0
    returns: np.ndarray | None = None
    advantages: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.actions)


class EpisodeRunner:
    """Streams episodes drawn uniformly from a training pool.

    Draws are checked against a forbidden key set so held-out test
    boards can never leak into training rollouts.
    """

    def __init__(
        self,
        boards: Sequence[Board],
        rng: np.random.Generator,
        step_cap: int = DEFAULT_STEP_CAP,
        forbidden_keys: frozenset | None = None,
    ):
        if len(boards) == 0:
            raise ValueError("training pool is empty")
        self.boards = list(boards)
        self.rng = rng
        self.step_cap = step_cap
        self.forbidden_keys = forbidden_keys or frozenset()
        self.state: EpisodeState | None = None
        self.prev_action: int | None = None
        self.prev_reward: float = 0.0
        self.episodes_finished = 0
        self.finished_rewards: list[float] = []
        self._episode_reward = 0.0

    @property
    def needs_reset(self) -> bool:
        return self.state is None or self.state.over

    def reset(self) -> None:
        board = self.boards[int(self.rng.integers(len(self.boards)))]
        if board.key() in self.forbidden_keys:
            raise AssertionError("held-out board drawn into a training rollout")
        self.state = new_episode(board, seed=int(self.rng.integers(2**31)), step_cap=self.step_cap)
        self.prev_action = None
        self.prev_reward = 0.0
        self._episode_reward = 0.0

    def observation(self) -> AgentObservation:
        return observe(self.state, self.prev_action, self.prev_reward)

    def apply(self, action: int):
        outcome = step(self.state, action)
        self.prev_action = action
        self.prev_reward = float(outcome.reward)
        self._episode_reward += outcome.reward
        if outcome.done:
            self.episodes_finished += 1
            self.finished_rewards.append(self._episode_reward)
        return outcome


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> int:
    return int(rng.choice(len(probs), p=probs))


def collect_rollout(agent, runner: EpisodeRunner, hidden, n_steps: int, rng: np.random.Generator, carry_state: bool = False):
    """Gather n_steps transitions, chaining episodes as they finish.

    Returns the buffer (with per-step caches for the update) and the
    hidden state to carry into the next rollout.
    """
    buffer = RolloutBuffer()
    for _ in range(n_steps):
        episode_start = runner.needs_reset
        if episode_start:
            runner.reset()
            if not carry_state:
                hidden = agent.zero_state()
        obs = runner.observation()
        probs, value, hidden_next, cache = agent.step(obs, hidden)
        action = sample_action(probs, rng)
        outcome = runner.apply(action)
        truncated = outcome.truncated
        natural_done = outcome.done and not truncated
        boot = 0.0
        if truncated:
            # Value of the post-step observation, no gradient: the cap
            # cut the episode, it did not end it.
            boot_obs = runner.observation()
            _, boot, _, _ = agent.step(boot_obs, hidden_next)
        buffer.observations.append(obs)
        buffer.actions.append(action)
        buffer.rewards.append(float(outcome.reward))
        buffer.values.append(value)
        buffer.log_probs.append(float(np.log(clamp_probs(probs)[action])))
        buffer.probs.append(probs)
        buffer.caches.append(cache)
        buffer.episode_starts.append(episode_start)
        buffer.dones.append(natural_done)
        buffer.truncateds.append(truncated)
        buffer.boot_values.append(float(boot))
        hidden = hidden_next
    if buffer.dones[-1] or buffer.truncateds[-1]:
        buffer.tail_bootstrap = 0.0
    else:
        _, tail_value, _, _ = agent.step(runner.observation(), hidden)
        buffer.tail_bootstrap = float(tail_value)
    return buffer, hidden


def returns_and_advantages(buffer: RolloutBuffer, gamma: float, bootstrap: float | None = None) -> RolloutBuffer:
    """Fill n-step discounted returns and advantages in place."""
    if bootstrap is None:
        bootstrap = buffer.tail_bootstrap
    n = len(buffer)
    returns = np.zeros(n)
    running = float(bootstrap)
    for t in range(n - 1, -1, -1):
        if buffer.dones[t]:
            running = buffer.rewards[t]
        elif buffer.truncateds[t]:
            running = buffer.rewards[t] + gamma * buffer.boot_values[t]
        else:
            running = buffer.rewards[t] + gamma * running
        returns[t] = running
    buffer.returns = returns
    buffer.advantages = returns - np.asarray(buffer.values)
    return buffer


def a2c_losses(buffer: RolloutBuffer, config: A2CConfig) -> tuple[LossBreakdown, list[np.ndarray], list[float]]:
    """Loss values plus per-step gradients at the logits and value head."""
    if buffer.returns is None:
        raise ValueError("buffer has no returns; call returns_and_advantages first")
    n = len(buffer)
    adv = buffer.advantages
    values = np.asarray(buffer.values)
    policy_loss = float(-np.mean(np.asarray(buffer.log_probs) * adv))
    value_loss = float(np.mean((values - buffer.returns) ** 2))
    dlogits_list: list[np.ndarray] = []
    dvalue_list: list[float] = []
    entropies = np.zeros(n)
    for t in range(n):
        logits = buffer.caches[t]["logits"]
        probs = buffer.probs[t]
        entropy, dentropy = entropy_of_logits(logits)
        entropies[t] = entropy
        one_hot = np.zeros_like(probs)
        one_hot[buffer.actions[t]] = 1.0
        # Advantages are constants here: no gradient flows through them.
        dlogits = (-adv[t] * (one_hot - probs) - config.ent_coef * dentropy) / n
        dlogits_list.append(dlogits)
        dvalue_list.append(config.vf_coef * 2.0 * (values[t] - buffer.returns[t]) / n)
    entropy_loss = float(-np.mean(entropies))
    total = policy_loss + config.vf_coef * value_loss + config.ent_coef * entropy_loss
    if not np.isfinite(total):
        raise FloatingPointError(f"non-finite A2C loss: {total}")
    breakdown = LossBreakdown(policy_loss, value_loss, entropy_loss, total)
    return breakdown, dlogits_list, dvalue_list


def a2c_backward(agent, buffer: RolloutBuffer, config: A2CConfig) -> LossBreakdown:
    """Fill parameter gradients from a processed rollout, with BPTT."""
    breakdown, dlogits_list, dvalue_list = a2c_losses(buffer, config)
    agent.zero_grad()
    dh = None
    dc = None
    for t in range(len(buffer) - 1, -1, -1):
        dh_prev, dc_prev = agent.backward_step(
            buffer.caches[t], dlogits_list[t], dvalue_list[t], dh, dc
        )
        if buffer.episode_starts[t]:
            # The step consumed a fresh zero state; nothing recurrent
            # flows past an episode boundary.
            dh, dc = None, None
        else:
            dh, dc = dh_prev, dc_prev
    return breakdown


def a2c_update(agent, optimizer, buffer: RolloutBuffer, config: A2CConfig) -> LossBreakdown:
    """One optimizer step from a processed rollout."""
    breakdown = a2c_backward(agent, buffer, config)
    optimizer.step(agent.parameters())
    return breakdown


class TrainResult(NamedTuple):
    agent: object
    reward_curve: list[float]
    episode_rewards: list[float]


def train_agent(
    dataset: BoardSet | Sequence[Board],
    arch: str,
    config: A2CConfig,
    agent=None,
    carry_state: bool = False,
    progress: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """A2C training over episodes drawn from the dataset's train split.

    The reward curve holds the mean episode reward of each completed
    1000-episode window.  Held-out test boards are never drawn; a
    hash-set assertion enforces this on every draw.
    """
    if isinstance(dataset, BoardSet):
        boards = dataset.train
        forbidden = frozenset(board.key() for board in dataset.test_boards)
    else:
        boards = list(dataset)
        forbidden = frozenset()
    if agent is None:
        agent = build_agent(arch, seed=config.seed)
    rng = np.random.default_rng(config.seed)
    runner = EpisodeRunner(boards, rng, forbidden_keys=forbidden)
    optimizer = RMSPropLike(learning_rate=config.learning_rate)
    hidden = agent.zero_state()
    while runner.episodes_finished < config.total_episodes:
        if config.lr_schedule == "linear":
            fraction = runner.episodes_finished / config.total_episodes
            optimizer.learning_rate = config.learning_rate * max(0.0, 1.0 - fraction)
        buffer, hidden = collect_rollout(agent, runner, hidden, config.n_steps, rng, carry_state)
        returns_and_advantages(buffer, config.gamma)
        a2c_update(agent, optimizer, buffer, config)
        if progress is not None:
            progress(runner.episodes_finished, optimizer.learning_rate)
    rewards = runner.finished_rewards
    curve = [
        float(np.mean(rewards[i : i + REWARD_WINDOW]))
        for i in range(0, len(rewards) - REWARD_WINDOW + 1, REWARD_WINDOW)
    ]
    return TrainResult(agent, curve, rewards)


def play_episode(
    agent,
    board: Board,
    seed: int,
    rng: np.random.Generator | None = None,
    greedy: bool = False,
    step_cap: int = DEFAULT_STEP_CAP,
) -> EpisodeState:
    """Run one full episode with the agent choosing every click."""
    if rng is None and not greedy:
        raise ValueError("sampled play needs an rng; pass greedy=True for argmax play")
    state = new_episode(board, seed=seed, step_cap=step_cap)
    hidden = agent.zero_state()
    prev_action: int | None = None
    prev_reward = 0.0
    while not state.over:
        obs = observe(state, prev_action, prev_reward)
        probs, _, hidden, _ = agent.step(obs, hidden)
        action = int(np.argmax(probs)) if greedy else sample_action(probs, rng)
        outcome = step(state, action)
        prev_action = action
        prev_reward = float(outcome.reward)
    return state


def action_distribution(agent, board: Board, start_tile: int, history: Sequence[int] = ()) -> np.ndarray:
    """Policy distribution after replaying a scripted reveal history.

    The board starts with start_tile revealed; each history action is
    fed through the policy (driving the recurrent state) and applied to
    the episode before the final distribution is read out.
    """
    state = episode_with_start(board, start_tile)
    hidden = agent.zero_state()
    prev_action: int | None = None
    prev_reward = 0.0
    probs = None
    for action in history:
        obs = observe(state, prev_action, prev_reward)
        _, _, hidden, _ = agent.step(obs, hidden)
        outcome = step(state, action)
        prev_action = action
        prev_reward = float(outcome.reward)
    obs = observe(state, prev_action, prev_reward)
    probs, _, _, _ = agent.step(obs, hidden)
    return probs


def save_agent(
    agent,
    fp: IO[str],
    config: A2CConfig | None = None,
    dataset_fingerprint: str | None = None,
) -> None:
    payload = agent_to_dict(agent)
    payload["config"] = config.to_dict() if config is not None else None
    payload["dataset_fingerprint"] = dataset_fingerprint
    json.dump(payload, fp)


class SavedAgent(NamedTuple):
    agent: object
    config: A2CConfig | None
    dataset_fingerprint: str | None


def load_agent(fp: IO[str]) -> SavedAgent:
    payload = json.load(fp)
    agent = agent_from_dict(payload)
    config = A2CConfig.from_dict(payload["config"]) if payload.get("config") else None
    return SavedAgent(agent, config, payload.get("dataset_fingerprint"))


class A2CMetaLearner(BaseEstimator):
    """Estimator-style wrapper: fit trains a policy, predict plays boards.

    fit accepts a BoardSet (test split stays untouched) or a plain
    sequence of boards.  predict plays each board and returns the blue
    count revealed, the score every performer comparison is built on.
    """

    def __init__(
        self,
        arch: str = "rnn",
        gamma: float = 0.9,
        n_steps: int = 2,
        learning_rate: float = 7e-4,
        lr_schedule: str = "constant",
        ent_coef: float = 0.01,
        vf_coef: float = 0.5,
        total_episodes: int = 50_000,
        seed: int = 0,
        carry_state: bool = False,
        greedy_play: bool = False,
    ):
        self.arch = arch
        self.gamma = gamma
        self.n_steps = n_steps
        self.learning_rate = learning_rate
        self.lr_schedule = lr_schedule
        self.ent_coef = ent_coef
        self.vf_coef = vf_coef
        self.total_episodes = total_episodes
        self.seed = seed
        self.carry_state = carry_state
        self.greedy_play = greedy_play

    def _config(self) -> A2CConfig:
        return A2CConfig(
            gamma=self.gamma,
            n_steps=self.n_steps,
            learning_rate=self.learning_rate,
            lr_schedule=self.lr_schedule,
            ent_coef=self.ent_coef,
            vf_coef=self.vf_coef,
            total_episodes=self.total_episodes,
            seed=self.seed,
        )

    def fit(self, X: BoardSet | Sequence[Board], y=None) -> "A2CMetaLearner":
        config = self._config()
        result = train_agent(X, self.arch, config, carry_state=self.carry_state)
        self.agent_ = result.agent
        self.reward_curve_ = result.reward_curve
        self.config_ = config
        self.dataset_fingerprint_ = X.fingerprint() if isinstance(X, BoardSet) else None
        return self

    def predict(self, X: Sequence[Board] | Sequence[tuple[Board, int]]) -> np.ndarray:
        """Blue tiles revealed per board; (board, seed) pairs fix starts."""
        if not hasattr(self, "agent_"):
            raise ValueError("fit the learner before predicting")
        rng = np.random.default_rng(self.seed)
        counts = []
        for item in X:
            board, seed = item if isinstance(item, tuple) else (item, 0)
            final = play_episode(
                self.agent_, board, seed=seed, rng=rng, greedy=self.greedy_play
            )
            counts.append(final.blue_revealed)
        return np.asarray(counts)
