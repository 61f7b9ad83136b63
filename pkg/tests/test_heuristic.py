from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilemeta.board import tile_coords, tile_index
from tilemeta.episode import CellState, new_episode, step
from tilemeta.heuristic import (
    BaselineCache,
    BaselineSummary,
    heuristic_action,
    heuristic_baseline,
    nn_heuristic_rollout,
    zscore,
)

from conftest import board_from_reds

CORNER_REDS = frozenset({tile_index(0, 0), tile_index(0, 1), tile_index(1, 0), tile_index(1, 1)})


def _neighbors(idx):
    r, c = tile_coords(idx)
    out = []
    if r > 0:
        out.append(idx - 7)
    if r < 6:
        out.append(idx + 7)
    if c > 0:
        out.append(idx - 1)
    if c < 6:
        out.append(idx + 1)
    return out


@lru_cache(maxsize=None)
def _blue_count_distribution(revealed):
    """Exact heuristic outcome distribution from a revealed-tile set.

    Enumerates every uniform choice the heuristic can make on the
    corner-square board, so the resulting distribution over final blue
    counts is exact (probabilities as Fractions).
    """
    if CORNER_REDS <= revealed:
        return {len(revealed - CORNER_REDS): Fraction(1)}
    frontier = sorted(
        {n for t in revealed & CORNER_REDS for n in _neighbors(t) if n not in revealed}
    )
    dist = {}
    p_choice = Fraction(1, len(frontier))
    for choice in frontier:
        for count, p in _blue_count_distribution(revealed | {choice}).items():
            dist[count] = dist.get(count, Fraction(0)) + p_choice * p
    return dist


def exact_corner_distribution():
    dist = {}
    for start in CORNER_REDS:
        for count, p in _blue_count_distribution(frozenset({start})).items():
            dist[count] = dist.get(count, Fraction(0)) + Fraction(1, 4) * p
    assert sum(dist.values()) == 1
    return dist


def test_corner_square_matches_enumeration(corner_square_board):
    """Empirical rollout distribution tracks the exhaustive expectation."""
    exact = exact_corner_distribution()
    counts = [nn_heuristic_rollout(corner_square_board, seed) for seed in range(1000)]
    empirical = {c: counts.count(c) / 1000 for c in set(counts)}

    assert set(empirical) <= set(exact)
    tv = sum(abs(float(exact.get(c, 0)) - empirical.get(c, 0)) for c in set(exact) | set(empirical)) / 2
    assert tv < 0.05

    exact_mean = float(sum(c * p for c, p in exact.items()))
    assert abs(np.mean(counts) - exact_mean) < 0.2


def test_rollout_deterministic(corner_square_board):
    assert nn_heuristic_rollout(corner_square_board, 123) == nn_heuristic_rollout(corner_square_board, 123)


def test_heuristic_prefers_red_frontier(corner_square_board):
    state = new_episode(corner_square_board, seed=0)
    rng = np.random.default_rng(0)
    frontier_choices = {heuristic_action(state, rng) for _ in range(50)}
    r, c = tile_coords(state.start_tile)
    allowed = {tile_index(nr, nc) for nr, nc in [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)] if 0 <= nr <= 6 and 0 <= nc <= 6}
    assert frontier_choices <= allowed


def test_heuristic_fallback_on_disconnected_reds():
    board = board_from_reds([(0, 0), (6, 6)])
    # Whatever the start, finishing needs the fallback to leave the
    # first component; the rollout must still terminate.
    for seed in range(5):
        count = nn_heuristic_rollout(board, seed)
        assert 0 <= count <= 47


def test_single_red_baseline(single_red_board):
    summary = heuristic_baseline(single_red_board, trials=50, seed=0)
    assert summary.mean_blue == 0.0
    assert summary.std_blue == 0.0
    assert not summary.defined


def test_baseline_single_trial(corner_square_board):
    summary = heuristic_baseline(corner_square_board, trials=1, seed=3)
    assert summary.std_blue == 0.0
    assert summary.trials == 1


def test_baseline_deterministic(corner_square_board):
    a = heuristic_baseline(corner_square_board, trials=200, seed=5)
    b = heuristic_baseline(corner_square_board, trials=200, seed=5)
    assert a == b


def test_baseline_requires_trials(corner_square_board):
    with pytest.raises(ValueError):
        heuristic_baseline(corner_square_board, trials=0)


def test_zscore_cases():
    assert zscore(2, BaselineSummary(mean_blue=4.0, std_blue=2.0, trials=10)) == -1.0
    assert zscore(4, BaselineSummary(mean_blue=4.0, std_blue=2.0, trials=10)) == 0.0
    degenerate = BaselineSummary(mean_blue=3.0, std_blue=0.0, trials=10)
    assert zscore(3, degenerate) == 0.0
    assert zscore(5, degenerate) is None


@settings(max_examples=30, deadline=None)
@given(
    mean=st.floats(-5, 40),
    std=st.floats(0.01, 10),
    a=st.integers(0, 48),
    b=st.integers(0, 48),
)
def test_zscore_strictly_monotone(mean, std, a, b):
    # Fewer blues revealed is better play, so it must score strictly lower.
    baseline = BaselineSummary(mean_blue=mean, std_blue=std, trials=100)
    if a < b:
        assert zscore(a, baseline) < zscore(b, baseline)


def test_baseline_cache_hits(corner_square_board, monkeypatch):
    cache = BaselineCache()
    calls = []
    import tilemeta.heuristic as module

    real = module.heuristic_baseline
    monkeypatch.setattr(module, "heuristic_baseline", lambda *a, **k: calls.append(1) or real(*a, **k))
    cache.get(corner_square_board, trials=20, seed=0)
    cache.get(corner_square_board, trials=20, seed=0)
    assert len(calls) == 1
    cache.get(corner_square_board, trials=20, seed=1)
    assert len(calls) == 2
