"""Board datasets with held-out test splits.

A BoardSet bundles the boards for one (abstraction, condition) cell:
a training pool and a fixed test split of distinct boards that were
excluded from training.  Each test board carries a start seed so every
performer, human or agent, begins that board from the same revealed
tile.  Sets serialize to JSONL with a single header line followed by
one record per board.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .board import Board
from .rules import AbstractionKind, enumerate_rectangles, generate_board, pyramid_shapes, zigzag_shapes

CONDITIONS = ("abstract", "metamer")
DEFAULT_N_TEST = 24


class InsufficientDistinctBoardsError(ValueError):
    """The rule cannot supply the requested number of distinct boards."""


@dataclass
class BoardSet:
    kind: AbstractionKind
    condition: str
    train: list[Board]
    test: list[tuple[Board, int]] = field(default_factory=list)
    generator_seed: int = 0

    def __post_init__(self) -> None:
        self.kind = AbstractionKind(self.kind)
        if self.condition not in CONDITIONS:
            raise ValueError(f"condition must be one of {CONDITIONS}, got {self.condition!r}")
        test_keys = [board.key() for board, _ in self.test]
        if len(set(test_keys)) != len(test_keys):
            raise ValueError("test boards must be pairwise distinct")
        train_keys = {board.key() for board in self.train}
        if train_keys & set(test_keys):
            raise ValueError("test boards must be disjoint from train")

    @property
    def test_boards(self) -> list[Board]:
        return [board for board, _ in self.test]

    @property
    def all_boards(self) -> list[Board]:
        return self.train + self.test_boards

    def fingerprint(self) -> str:
        """Stable 16-hex-digit digest of the full set contents."""
        digest = hashlib.sha256(self.to_jsonl().encode()).hexdigest()
        return digest[:16]

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {
                    "kind": self.kind.value,
                    "condition": self.condition,
                    "generator_seed": self.generator_seed,
                }
            )
        ]
        for board in self.train:
            lines.append(json.dumps({"split": "train", "tiles": board.tiles.tolist()}))
        for board, start_seed in self.test:
            lines.append(
                json.dumps({"split": "test", "tiles": board.tiles.tolist(), "start_seed": start_seed})
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "BoardSet":
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        header, records = lines[0], lines[1:]
        train = []
        test = []
        for record in records:
            board = Board(np.array(record["tiles"], dtype=np.uint8))
            if record["split"] == "train":
                train.append(board)
            elif record["split"] == "test":
                test.append((board, int(record["start_seed"])))
            else:
                raise ValueError(f"unknown split {record['split']!r}")
        return cls(
            kind=AbstractionKind(header["kind"]),
            condition=header["condition"],
            train=train,
            test=test,
            generator_seed=int(header["generator_seed"]),
        )

    def save(self, fp: IO[str]) -> None:
        fp.write(self.to_jsonl())

    @classmethod
    def load(cls, fp: IO[str]) -> "BoardSet":
        return cls.from_jsonl(fp.read())


def distinct_capacity(kind: AbstractionKind) -> int | None:
    """Number of distinct boards for exactly enumerable kinds, else None."""
    kind = AbstractionKind(kind)
    if kind is AbstractionKind.RECTANGLE:
        return len(set(enumerate_rectangles()))
    if kind is AbstractionKind.PYRAMID:
        return len(pyramid_shapes())
    if kind is AbstractionKind.ZIGZAG:
        return len(zigzag_shapes())
    return None


def build_dataset(
    kind: AbstractionKind,
    n_train: int,
    n_test: int = DEFAULT_N_TEST,
    seed: int = 0,
) -> BoardSet:
    """Draw n_train + n_test distinct boards and split them.

    The first n_test distinct draws become the held-out test split (so
    the split does not depend on n_train) and get per-board start seeds.
    """
    kind = AbstractionKind(kind)
    total = n_train + n_test
    capacity = distinct_capacity(kind)
    if capacity is not None and total > capacity:
        raise InsufficientDistinctBoardsError(
            f"{kind.value} has only {capacity} distinct boards; requested {total}"
        )
    rng = np.random.default_rng(seed)
    boards: list[Board] = []
    seen: set[bytes] = set()
    budget = max(10_000, 200 * total)
    while len(boards) < total and budget > 0:
        board = generate_board(kind, rng)
        budget -= 1
        if board.key() not in seen:
            seen.add(board.key())
            boards.append(board)
    if len(boards) < total:
        raise InsufficientDistinctBoardsError(
            f"{kind.value}: drew {len(boards)} distinct boards before exhausting the budget"
        )
    test = [(board, int(rng.integers(2**31))) for board in boards[:n_test]]
    return BoardSet(kind=kind, condition="abstract", train=boards[n_test:], test=test, generator_seed=seed)
