"""Performer scoring and comparison reports.

A performer's score on a board is the number of blue tiles revealed,
z-scored against the nearest-neighbor heuristic's blue-count
distribution on that same board.  Records from agents, scripted logs,
and human sessions all share one shape, one CSV format, and one report
battery (planned t-tests plus a three-way ANOVA).
"""

from __future__ import annotations

import csv
import hashlib
import warnings
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .agents import play_episode
from .agents.a2c import action_distribution
from .board import Board
from .datasets import BoardSet
from .episode import DEFAULT_STEP_CAP, episode_with_start, step
from .heuristic import BaselineCache, zscore
from .stats import (
    AnovaTable,
    DegenerateVarianceError,
    EmptyCellError,
    ObservationRecord,
    three_way_anova,
    two_sample_ttest,
)

RECORD_COLUMNS = ("performer", "performer_id", "kind", "condition", "board_id", "blue_count", "z")

# Four planned comparisons per kind: within-performer across conditions,
# then within-condition across performers.
TTEST_FAMILIES = (
    ("Human", "abstract", "Human", "metamer"),
    ("Agent", "abstract", "Agent", "metamer"),
    ("Human", "abstract", "Agent", "abstract"),
    ("Human", "metamer", "Agent", "metamer"),
)


def board_id(board: Board) -> str:
    """Stable short identifier derived from tile contents."""
    return hashlib.sha256(board.key()).hexdigest()[:12]


@dataclass(frozen=True)
class PerformanceRecord:
    performer: str
    performer_id: str
    kind: str
    condition: str
    board_id: str
    blue_count: int
    z: float | None

    def __post_init__(self) -> None:
        if self.performer not in ("Human", "Agent"):
            raise ValueError(f"performer must be Human or Agent, got {self.performer!r}")
        if self.blue_count < 0:
            raise ValueError("blue_count must be >= 0")


# ---------------------------------------------------------------------------
# scoring


def score_episode(
    board: Board,
    blue_count: int,
    performer: str,
    performer_id: str,
    kind: str,
    condition: str,
    cache: BaselineCache,
    baseline_trials: int = 1000,
    baseline_seed: int = 0,
) -> PerformanceRecord:
    baseline = cache.get(board, trials=baseline_trials, seed=baseline_seed)
    return PerformanceRecord(
        performer=performer,
        performer_id=performer_id,
        kind=kind,
        condition=condition,
        board_id=board_id(board),
        blue_count=blue_count,
        z=zscore(blue_count, baseline),
    )


def evaluate(
    agent,
    boardset: BoardSet,
    baseline_trials: int = 1000,
    baseline_seed: int = 0,
    performer_id: str = "agent-0",
    greedy: bool = False,
    play_seed: int = 0,
    cache: BaselineCache | None = None,
    agent_fingerprint: str | None = None,
    condition_label: str | None = None,
) -> list[PerformanceRecord]:
    """One record per test board, played with the board's stored start seed.

    Actions are sampled from the policy by default; greedy switches to
    argmax.  A fingerprint mismatch warns instead of failing because
    evaluating on a foreign set is how cross-distribution tests work.
    """
    if agent_fingerprint is not None and agent_fingerprint != boardset.fingerprint():
        warnings.warn(
            "agent was trained on a different dataset than it is being evaluated on",
            stacklevel=2,
        )
    if not boardset.test:
        raise ValueError("boardset has no test split to evaluate on")
    cache = cache or BaselineCache()
    rng = np.random.default_rng(play_seed)
    records = []
    for board, start_seed in boardset.test:
        final = play_episode(agent, board, seed=start_seed, rng=rng, greedy=greedy)
        records.append(
            score_episode(
                board,
                final.blue_revealed,
                performer="Agent",
                performer_id=performer_id,
                kind=boardset.kind.value,
                condition=condition_label or boardset.condition,
                cache=cache,
                baseline_trials=baseline_trials,
                baseline_seed=baseline_seed,
            )
        )
    return records


def cross_evaluate(
    agent,
    train_set: BoardSet,
    test_set: BoardSet,
    **kwargs,
) -> list[PerformanceRecord]:
    """Evaluate on the other condition's test set, labeling the pair.

    Records carry "train->test" in the condition column so they stay
    distinguishable from home-condition records in one CSV.
    """
    if train_set.kind != test_set.kind:
        raise ValueError(
            f"kind mismatch: agent trained on {train_set.kind.value}, "
            f"test set is {test_set.kind.value}"
        )
    if train_set.condition == test_set.condition:
        raise ValueError("cross evaluation needs differing conditions")
    label = f"{train_set.condition}->{test_set.condition}"
    return evaluate(agent, test_set, condition_label=label, **kwargs)


# ---------------------------------------------------------------------------
# scripted logs


@dataclass(frozen=True)
class ScriptedEpisode:
    """A recorded playthrough: fixed start reveal plus the click sequence."""

    board: Board
    start_tile: int
    actions: tuple[int, ...]


def replay_blue_count(episode: ScriptedEpisode, step_cap: int = DEFAULT_STEP_CAP) -> int:
    """Blue tiles revealed when the recorded clicks are re-adjudicated."""
    state = episode_with_start(episode.board, episode.start_tile, step_cap=step_cap)
    for action in episode.actions:
        step(state, action)
    return state.blue_revealed


def evaluate_scripted(
    episodes: Sequence[ScriptedEpisode],
    kind: str,
    condition: str,
    performer: str = "Human",
    performer_id: str = "human-0",
    baseline_trials: int = 1000,
    baseline_seed: int = 0,
    cache: BaselineCache | None = None,
) -> list[PerformanceRecord]:
    """Score recorded playthroughs; blue counts come from replay only."""
    cache = cache or BaselineCache()
    return [
        score_episode(
            episode.board,
            replay_blue_count(episode),
            performer=performer,
            performer_id=performer_id,
            kind=kind,
            condition=condition,
            cache=cache,
            baseline_trials=baseline_trials,
            baseline_seed=baseline_seed,
        )
        for episode in episodes
    ]


# ---------------------------------------------------------------------------
# choice probes


@dataclass(frozen=True)
class ProbeScenario:
    """A partially revealed board: start tile plus the reveal history."""

    board: Board
    start_tile: int
    history: tuple[int, ...] = ()
    label: str = ""


def choice_probe(agent, scenario: ProbeScenario) -> dict:
    """The policy's 49-way distribution at the scenario's final state.

    Reports the argmax tile and whether it is red under the scenario's
    ground-truth board.  An inconsistent history (click after the board
    is finished, out-of-range tile, non-red start) raises.
    """
    try:
        state = episode_with_start(scenario.board, scenario.start_tile)
        for action in scenario.history:
            step(state, action)
    except (RuntimeError, ValueError) as exc:
        raise ValueError(f"inconsistent probe history: {exc}") from exc
    probs = action_distribution(agent, scenario.board, scenario.start_tile, scenario.history)
    argmax = int(np.argmax(probs))
    return {
        "label": scenario.label,
        "start_tile": scenario.start_tile,
        "history": list(scenario.history),
        "probs": [float(p) for p in probs],
        "argmax": argmax,
        "argmax_is_red": bool(scenario.board.tiles.ravel()[argmax] == 1),
    }


# ---------------------------------------------------------------------------
# report assembly


def _is_cross(condition: str) -> bool:
    return "->" in condition


def _mean_z(records: Sequence[PerformanceRecord]) -> float | None:
    values = [r.z for r in records if r.z is not None]
    return float(np.mean(values)) if values else None


def _ttest_cell(group_a: list[float], group_b: list[float]) -> dict:
    if len(group_a) < 2 or len(group_b) < 2:
        return {"error": "not enough observations"}
    try:
        t, df, p = two_sample_ttest(group_a, group_b)
        return {"t": t, "df": df, "p": p}
    except DegenerateVarianceError:
        return {"error": "degenerate variance"}


@dataclass(frozen=True)
class Report:
    mean_z: dict
    t_tests: dict
    anova: AnovaTable | None
    cross: dict
    match: dict | None
    probes: list | None
    n_records: int
    n_undefined_z: int

    def to_json(self) -> dict:
        return {
            "n_records": self.n_records,
            "n_undefined_z": self.n_undefined_z,
            "mean_z": self.mean_z,
            "t_tests": self.t_tests,
            "anova": self.anova.to_json() if self.anova else None,
            "cross": self.cross,
            "match": self.match,
            "probes": self.probes,
        }


def compare(
    records: Sequence[PerformanceRecord],
    allow_partial: bool = False,
    match: dict | None = None,
    probes: list | None = None,
) -> Report:
    """Planned t-tests, three-way ANOVA, and per-cell means over records.

    Cross-labeled records ("abstract->metamer") are summarized separately
    and stay out of the factorial battery.  Undefined z-scores are
    excluded from every aggregate and counted.  Without allow_partial,
    a missing performer or condition cell is an error.
    """
    records = list(records)
    core = [r for r in records if not _is_cross(r.condition)]
    cross = [r for r in records if _is_cross(r.condition)]
    kinds = sorted({r.kind for r in core})
    performers = sorted({r.performer for r in core})
    conditions = sorted({r.condition for r in core})

    if not allow_partial:
        missing = []
        for performer in ("Agent", "Human"):
            for condition in ("abstract", "metamer"):
                if not any(
                    r.performer == performer and r.condition == condition for r in core
                ):
                    missing.append(f"performer={performer}, condition={condition}")
        if missing:
            raise EmptyCellError(f"empty comparison cell: {'; '.join(missing)}")

    mean_z: dict = {}
    for kind in kinds:
        mean_z[kind] = {}
        for performer in performers:
            mean_z[kind][performer] = {}
            for condition in conditions:
                cell = [
                    r
                    for r in core
                    if r.kind == kind and r.performer == performer and r.condition == condition
                ]
                if cell:
                    mean_z[kind][performer][condition] = _mean_z(cell)

    def zs(subset_kind, performer, condition):
        return [
            r.z
            for r in core
            if (subset_kind is None or r.kind == subset_kind)
            and r.performer == performer
            and r.condition == condition
            and r.z is not None
        ]

    t_tests: dict = {}
    for scope in [None, *kinds]:
        scope_name = "all" if scope is None else scope
        table = {}
        for pa, ca, pb, cb in TTEST_FAMILIES:
            name = f"{pa} {ca} vs {pb} {cb}"
            table[name] = _ttest_cell(zs(scope, pa, ca), zs(scope, pb, cb))
        t_tests[scope_name] = table

    anova = None
    anova_obs = [
        ObservationRecord(value=r.z, performer=r.performer, condition=r.condition, kind=r.kind)
        for r in core
        if r.z is not None
    ]
    if not allow_partial or (len(performers) == 2 and len(conditions) == 2 and len(kinds) >= 2):
        try:
            anova = three_way_anova(anova_obs)
        except (ValueError, EmptyCellError):
            if not allow_partial:
                raise
            anova = None

    cross_summary: dict = {}
    for record in cross:
        entry = cross_summary.setdefault(
            record.kind, {}
        ).setdefault(record.condition, {"n": 0, "zs": []})
        entry["n"] += 1
        if record.z is not None:
            entry["zs"].append(record.z)
    for kind_entry in cross_summary.values():
        for pair, entry in kind_entry.items():
            values = entry.pop("zs")
            entry["mean_z"] = float(np.mean(values)) if values else None

    return Report(
        mean_z=mean_z,
        t_tests=t_tests,
        anova=anova,
        cross=cross_summary,
        match=match,
        probes=probes,
        n_records=len(records),
        n_undefined_z=sum(1 for r in records if r.z is None),
    )


# ---------------------------------------------------------------------------
# CSV round trip


def write_records(records: Sequence[PerformanceRecord], fp: IO[str]) -> None:
    writer = csv.writer(fp)
    writer.writerow(RECORD_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.performer,
                r.performer_id,
                r.kind,
                r.condition,
                r.board_id,
                r.blue_count,
                "" if r.z is None else f"{r.z:.10g}",
            ]
        )


def read_records(fp: IO[str]) -> list[PerformanceRecord]:
    reader = csv.DictReader(fp)
    if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
        raise ValueError(f"records file must have columns {','.join(RECORD_COLUMNS)}")
    return [
        PerformanceRecord(
            performer=row["performer"],
            performer_id=row["performer_id"],
            kind=row["kind"],
            condition=row["condition"],
            board_id=row["board_id"],
            blue_count=int(row["blue_count"]),
            z=None if row["z"] == "" else float(row["z"]),
        )
        for row in reader
    ]
