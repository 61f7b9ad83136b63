"""Masked-tile conditional model and Gibbs synthesis of metamer boards.

A metamer distribution is built in two stages.  First a small dense
network learns the conditional structure of an abstraction: shown a
board with one tile masked, it predicts the whole board, and its
accuracy on the masked position tracks how well it has internalized the
distribution's local statistics.  Second, Gibbs sampling turns those
learned conditionals into a generator: starting from coin-flip noise,
every tile is resampled in random order from the model's prediction,
and after enough sweeps the boards are draws from a distribution that
matches the abstraction's statistics without obeying its rule.

The sampler is generic over tile count so its correctness can be pinned
on small boards where the stationary distribution is computable in
closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Protocol, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .board import GRID_SIZE, N_TILES, Board
from .datasets import BoardSet
from .nn import Dense, Network, RMSPropLike, bce
from .rules import AbstractionKind, generate_board

MASK_VALUE = 0.5
ZERO_RED_RETRIES = 100


def encode_masked(board: Board, mask_index: int) -> np.ndarray:
    """49-scalar input: red 1.0, blue 0.0, masked position 0.5."""
    if not 0 <= mask_index < N_TILES:
        raise ValueError(f"mask_index must be in [0, {N_TILES})")
    encoded = board.tiles.ravel().astype(np.float64)
    encoded[mask_index] = MASK_VALUE
    return encoded


class TileConditional(Protocol):
    """Anything that predicts per-tile red probabilities from a masked encoding."""

    n_tiles: int

    def red_probabilities(self, encoded: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class GibbsConfig:
    """Sampler settings.

    temperature < 1 re-sharpens the learned conditionals at sampling
    time: cross-entropy training softens near-deterministic tile rules
    toward even odds, which inflates the chain's stationary red count
    for strongly constrained kinds.
    """

    sweeps: int = 20
    init_red_prob: float = 0.5
    temperature: float = 1.0
    resample_zero_red: bool = True

    def __post_init__(self) -> None:
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if not 0.0 <= self.init_red_prob <= 1.0:
            raise ValueError("init_red_prob must be in [0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


class MaskedTilePredictor(BaseEstimator):
    """Dense network trained to fill in one masked tile of a board.

    Three dense layers of 49 units each; the sigmoid output layer gives
    a red probability for every tile position.  Training shows each
    board once per epoch with a fresh random mask, scores binary
    cross-entropy against the full unmasked board, and stops early once
    the trailing five-epoch mean of masked-tile accuracy reaches
    ``accuracy_target``.
    """

    def __init__(
        self,
        kind: str | None = None,
        max_epochs: int = 4000,
        learning_rate: float = 0.001,
        rmsprop_decay: float = 0.9,
        hidden_activation: str = "sigmoid",
        accuracy_target: float = 0.99,
        accuracy_window: int = 5,
        random_state: int = 0,
    ):
        self.kind = kind
        self.max_epochs = max_epochs
        self.learning_rate = learning_rate
        self.rmsprop_decay = rmsprop_decay
        self.hidden_activation = hidden_activation
        self.accuracy_target = accuracy_target
        self.accuracy_window = accuracy_window
        self.random_state = random_state

    n_tiles = N_TILES

    @staticmethod
    def _as_tile_matrix(X) -> np.ndarray:
        if len(X) == 0:
            raise ValueError("need at least one training board")
        if isinstance(X[0], Board):
            return np.stack([b.tiles.ravel() for b in X]).astype(np.float64)
        mat = np.asarray(X, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[1] != N_TILES:
            raise ValueError(f"expected (n, {N_TILES}) tile matrix, got {mat.shape}")
        return mat

    def fit(self, X: Sequence[Board], y=None) -> "MaskedTilePredictor":
        tiles = self._as_tile_matrix(X)
        rng = np.random.default_rng(self.random_state)
        self.network_ = Network.from_specs(
            [
                {"variant": "dense", "in_dim": N_TILES, "out_dim": N_TILES, "activation": self.hidden_activation},
                {"variant": "dense", "in_dim": N_TILES, "out_dim": N_TILES, "activation": self.hidden_activation},
                {"variant": "dense", "in_dim": N_TILES, "out_dim": N_TILES, "activation": "sigmoid"},
            ],
            init_seed=self.random_state,
        )
        optimizer = RMSPropLike(learning_rate=self.learning_rate, decay=self.rmsprop_decay)
        n = tiles.shape[0]
        self.train_log_ = []
        for epoch in range(self.max_epochs):
            masks = rng.integers(N_TILES, size=n)
            batch = tiles.copy()
            batch[np.arange(n), masks] = MASK_VALUE
            pred, _, caches = self.network_.forward(batch)
            loss, grad = bce(pred, tiles)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch} (lr={self.learning_rate}, kind={self.kind})"
                )
            predicted_red = pred[np.arange(n), masks] > 0.5  # ties count as blue
            accuracy = float((predicted_red == (tiles[np.arange(n), masks] == 1.0)).mean())
            self.train_log_.append(accuracy)

            window = self.train_log_[-self.accuracy_window :]
            if len(window) == self.accuracy_window and float(np.mean(window)) >= self.accuracy_target:
                break

            self.network_.zero_grad()
            self.network_.backward(caches, grad)
            optimizer.step(self.network_.parameters())
        self.n_epochs_ = len(self.train_log_)
        return self

    def red_probabilities(self, encoded: np.ndarray) -> np.ndarray:
        """Model outputs for a batch of masked encodings, shape preserved."""
        out, _, _ = self.network_.forward(np.atleast_2d(encoded))
        return out if np.asarray(encoded).ndim == 2 else out[0]

    def predict_masked_tile(self, board: Board, mask_index: int) -> int:
        """1 if the masked tile is predicted red, 0 for blue (ties blue)."""
        probs = self.red_probabilities(encode_masked(board, mask_index))
        return int(probs[mask_index] > 0.5)

    def score(self, X: Sequence[Board], y=None) -> float:
        return masked_accuracy(self, list(X))

    def save(self, fp: IO[str]) -> None:
        payload = self.network_.to_dict()
        payload["kind"] = self.kind
        payload["train_log"] = self.train_log_
        payload["estimator_params"] = {
            k: v for k, v in self.get_params().items() if k != "kind"
        }
        json.dump(payload, fp)

    @classmethod
    def load(cls, fp: IO[str]) -> "MaskedTilePredictor":
        payload = json.load(fp)
        model = cls(kind=payload.get("kind"), **payload.get("estimator_params", {}))
        model.network_ = Network.from_dict(payload)
        model.train_log_ = list(payload.get("train_log", []))
        model.n_epochs_ = len(model.train_log_)
        return model


def train_conditional(
    boards: Sequence[Board],
    kind: AbstractionKind | str | None = None,
    max_epochs: int = 4000,
    learning_rate: float = 0.001,
    seed: int = 0,
) -> MaskedTilePredictor:
    kind_value = AbstractionKind(kind).value if kind is not None else None
    model = MaskedTilePredictor(
        kind=kind_value, max_epochs=max_epochs, learning_rate=learning_rate, random_state=seed
    )
    return model.fit(list(boards))


def masked_accuracy(
    model: MaskedTilePredictor,
    boards: Sequence[Board],
    masks_per_board: int = N_TILES,
    rng: np.random.Generator | None = None,
) -> float:
    """Fraction of masked tiles predicted correctly over boards x masks.

    With masks_per_board = 49 every position is tested once per board;
    smaller values sample positions without replacement from ``rng``.
    """
    if not boards:
        raise ValueError("boards must be nonempty")
    tiles = np.stack([b.tiles.ravel() for b in boards]).astype(np.float64)
    if masks_per_board >= N_TILES:
        mask_sets = [np.arange(N_TILES)] * len(boards)
    else:
        rng = rng or np.random.default_rng(0)
        mask_sets = [rng.choice(N_TILES, size=masks_per_board, replace=False) for _ in boards]
    correct = 0
    total = 0
    for row, masks in zip(tiles, mask_sets):
        batch = np.repeat(row[None, :], len(masks), axis=0)
        batch[np.arange(len(masks)), masks] = MASK_VALUE
        probs = model.red_probabilities(batch)
        predicted_red = probs[np.arange(len(masks)), masks] > 0.5
        correct += int((predicted_red == (row[masks] == 1.0)).sum())
        total += len(masks)
    return correct / total


def temper_probabilities(probs: np.ndarray, temperature: float) -> np.ndarray:
    """Bernoulli tempering: p -> p^(1/T) / (p^(1/T) + (1-p)^(1/T))."""
    if temperature == 1.0:
        return probs
    p = np.clip(probs, 1e-12, 1.0 - 1e-12)
    hot = p ** (1.0 / temperature)
    cold = (1.0 - p) ** (1.0 / temperature)
    return hot / (hot + cold)


def gibbs_batch(
    model: TileConditional,
    config: GibbsConfig,
    rng: np.random.Generator,
    n_chains: int,
) -> np.ndarray:
    """Run independent Gibbs chains in lockstep; returns (n_chains, n_tiles) uint8.

    Each chain gets its own visit permutation per sweep; chains share
    only the batched forward pass.  No zero-red filtering here.
    """
    n = model.n_tiles
    states = (rng.random((n_chains, n)) < config.init_red_prob).astype(np.float64)
    rows = np.arange(n_chains)
    for _ in range(config.sweeps):
        perms = rng.permuted(np.tile(np.arange(n), (n_chains, 1)), axis=1)
        for k in range(n):
            mask_pos = perms[:, k]
            encoded = states.copy()
            encoded[rows, mask_pos] = MASK_VALUE
            probs = model.red_probabilities(encoded)[rows, mask_pos]
            probs = temper_probabilities(probs, config.temperature)
            states[rows, mask_pos] = (rng.random(n_chains) < probs).astype(np.float64)
    return states.astype(np.uint8)


def gibbs_boards(
    model: TileConditional,
    config: GibbsConfig,
    rng: np.random.Generator,
    n_boards: int,
) -> list[Board]:
    """Batched 7x7 sampling with zero-red rows resampled."""
    if model.n_tiles != N_TILES:
        raise ValueError("board sampling requires a 49-tile model")
    states = gibbs_batch(model, config, rng, n_boards)
    if config.resample_zero_red:
        for _ in range(ZERO_RED_RETRIES):
            bad = np.flatnonzero(states.sum(axis=1) == 0)
            if len(bad) == 0:
                break
            states[bad] = gibbs_batch(model, config, rng, len(bad))
        else:
            raise RuntimeError("zero-red resampling exhausted: model collapsed to all-blue boards")
    return [Board(row.reshape(GRID_SIZE, GRID_SIZE)) for row in states]


def gibbs_sample(model: TileConditional, config: GibbsConfig, rng: np.random.Generator) -> Board:
    """One metamer board from the model's learned conditionals."""
    return gibbs_boards(model, config, rng, 1)[0]


def build_metamer_set(
    model: MaskedTilePredictor,
    n_train: int,
    n_test: int = 25,
    seed: int = 0,
    config: GibbsConfig | None = None,
    kind: AbstractionKind | str | None = None,
) -> BoardSet:
    """Sample a metamer BoardSet: distinct held-out test boards plus a
    training pool drawn from the same sampler with test boards excluded."""
    config = config or GibbsConfig()
    rng = np.random.default_rng(seed)
    test: list[Board] = []
    seen: set[bytes] = set()
    attempts = 0
    while len(test) < n_test:
        board = gibbs_sample(model, config, rng)
        attempts += 1
        if attempts > ZERO_RED_RETRIES * max(1, n_test):
            raise RuntimeError("could not draw distinct metamer test boards")
        if board.key() not in seen:
            seen.add(board.key())
            test.append(board)
    train: list[Board] = []
    while len(train) < n_train:
        batch = gibbs_boards(model, config, rng, min(64, n_train - len(train) + 8))
        train.extend(b for b in batch if b.key() not in seen)
    train = train[:n_train]
    source_kind = kind if kind is not None else model.kind
    if source_kind is None:
        raise ValueError("source abstraction unknown: set model.kind or pass kind=")
    return BoardSet(
        kind=AbstractionKind(source_kind),
        condition="metamer",
        train=train,
        test=[(board, int(rng.integers(2**31))) for board in test],
        generator_seed=seed,
    )


@dataclass(frozen=True)
class MetamerRecipe:
    """Per-kind settings that make 500-board metamer batches match the
    source ensemble on summary statistics.

    Diet size, optimizer settings, training seed, and chain
    initialization were all calibrated jointly: the conditional nets are
    small enough that individual training runs differ in how faithfully
    their Gibbs stationary distribution tracks the generator, so a fixed
    seed is part of the recipe, not a convenience.
    """

    n_train: int
    learning_rate: float
    accuracy_target: float
    train_seed: int
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)


# init_red_prob below the natural red rate compensates kinds whose learned
# conditionals drift red-heavy when chains start at even odds; temperature
# re-sharpens conditionals that training softened (see GibbsConfig).
METAMER_RECIPES: dict[str, MetamerRecipe] = {
    "copy": MetamerRecipe(150, 3e-4, 1.0, 2, GibbsConfig(sweeps=8, init_red_prob=0.12)),
    "symmetry": MetamerRecipe(2000, 3e-4, 1.0, 0, GibbsConfig(init_red_prob=0.134)),
    "rectangle": MetamerRecipe(400, 1e-3, 0.99, 0, GibbsConfig(init_red_prob=0.164, temperature=0.6)),
    "connected": MetamerRecipe(2000, 3e-4, 1.0, 1, GibbsConfig(temperature=0.6)),
    "tree": MetamerRecipe(150, 3e-4, 1.0, 1, GibbsConfig()),
    "pyramid": MetamerRecipe(800, 7e-4, 0.99, 2, GibbsConfig()),
    "cross": MetamerRecipe(1000, 5e-4, 0.99, 0, GibbsConfig(init_red_prob=0.124)),
    "zigzag": MetamerRecipe(270, 1e-3, 0.99, 0, GibbsConfig()),
}


def metamer_recipe(kind: AbstractionKind | str) -> MetamerRecipe:
    return METAMER_RECIPES[AbstractionKind(kind).value]


def train_matched_conditional(
    kind: AbstractionKind | str, max_epochs: int = 4000
) -> MaskedTilePredictor:
    """Train the conditional for ``kind`` on its calibrated diet."""
    kind = AbstractionKind(kind)
    recipe = metamer_recipe(kind)
    rng = np.random.default_rng(recipe.train_seed)
    boards = [generate_board(kind, rng) for _ in range(recipe.n_train)]
    model = MaskedTilePredictor(
        kind=kind.value,
        max_epochs=max_epochs,
        learning_rate=recipe.learning_rate,
        accuracy_target=recipe.accuracy_target,
        random_state=recipe.train_seed,
    )
    return model.fit(boards)
