"""Scoring records, cross-distribution labels, probes, and reports."""

import io
import json

import numpy as np
import pytest

from tilemeta.agents import build_agent
from tilemeta.board import Board
from tilemeta.datasets import BoardSet
from tilemeta.evaluate import (
    PerformanceRecord,
    ProbeScenario,
    Report,
    ScriptedEpisode,
    board_id,
    choice_probe,
    compare,
    cross_evaluate,
    evaluate,
    evaluate_scripted,
    read_records,
    replay_blue_count,
    write_records,
)
from tilemeta.heuristic import BaselineCache
from tilemeta.rules import AbstractionKind, generate_board
from tilemeta.stats import EmptyCellError

KINDS = [k.value for k in AbstractionKind]


def distinct_boards(n, seed=0, kind=AbstractionKind.RECTANGLE):
    rng = np.random.default_rng(seed)
    boards, seen = [], set()
    while len(boards) < n:
        board = generate_board(kind, rng)
        if board.key() not in seen:
            seen.add(board.key())
            boards.append(board)
    return boards


def small_set(n_test=3, condition="abstract", seed=0):
    boards = distinct_boards(n_test + 2, seed=seed)
    return BoardSet(
        kind=AbstractionKind.RECTANGLE,
        condition=condition,
        train=boards[:2],
        test=[(board, i) for i, board in enumerate(boards[2:])],
    )


def make_record(kind="rectangle", performer="Agent", condition="abstract", z=0.0, ident="a"):
    return PerformanceRecord(
        performer=performer,
        performer_id=ident,
        kind=kind,
        condition=condition,
        board_id="0" * 12,
        blue_count=3,
        z=z,
    )


def test_board_id_is_stable_and_content_keyed():
    boards = distinct_boards(2)
    assert board_id(boards[0]) == board_id(Board(boards[0].tiles.copy()))
    assert board_id(boards[0]) != board_id(boards[1])
    assert len(board_id(boards[0])) == 12


def test_record_validation():
    with pytest.raises(ValueError, match="performer"):
        make_record(performer="Robot")
    with pytest.raises(ValueError, match="blue_count"):
        PerformanceRecord("Agent", "a", "copy", "abstract", "x", -1, 0.0)


def test_evaluate_one_record_per_test_board():
    dataset = small_set(n_test=4)
    agent = build_agent("corelnet", seed=0)
    records = evaluate(agent, dataset, baseline_trials=20)
    assert len(records) == 4
    assert all(r.performer == "Agent" for r in records)
    assert all(r.kind == "rectangle" for r in records)
    assert all(r.condition == "abstract" for r in records)
    assert [r.board_id for r in records] == [board_id(b) for b, _ in dataset.test]


def test_evaluate_requires_test_split():
    dataset = BoardSet(
        kind=AbstractionKind.RECTANGLE,
        condition="abstract",
        train=distinct_boards(2),
    )
    with pytest.raises(ValueError, match="test split"):
        evaluate(build_agent("corelnet", seed=0), dataset)


def test_evaluate_warns_on_fingerprint_mismatch():
    dataset = small_set()
    agent = build_agent("corelnet", seed=0)
    with pytest.warns(UserWarning, match="different dataset"):
        evaluate(agent, dataset, baseline_trials=5, agent_fingerprint="0" * 16)
    import warnings as warnings_module

    with warnings_module.catch_warnings():
        warnings_module.simplefilter("error")
        evaluate(agent, dataset, baseline_trials=5, agent_fingerprint=dataset.fingerprint())


def test_all_red_board_scores_nonpositive():
    board = Board(np.ones((7, 7), dtype=np.uint8))
    dataset = BoardSet(
        kind=AbstractionKind.COPY,
        condition="abstract",
        train=[],
        test=[(board, 0)],
    )
    agent = build_agent("corelnet", seed=0)
    records = evaluate(agent, dataset, baseline_trials=10)
    assert records[0].blue_count == 0
    assert records[0].z is not None and records[0].z <= 0.0


def test_scripted_replay_reproduces_blue_count():
    tiles = np.zeros((7, 7), dtype=np.uint8)
    tiles[0, 0:3] = 1
    board = Board(tiles)
    # start at tile 0; click a blue, a red, and a repeat
    episode = ScriptedEpisode(board=board, start_tile=0, actions=(10, 1, 10))
    assert replay_blue_count(episode) == 1
    records = evaluate_scripted(
        [episode], kind="copy", condition="abstract", baseline_trials=10
    )
    assert records[0].blue_count == 1
    assert records[0].performer == "Human"


def test_cross_evaluate_labels_condition_pair():
    train_set = small_set(condition="abstract", seed=1)
    test_set = small_set(condition="metamer", seed=2)
    agent = build_agent("corelnet", seed=0)
    records = cross_evaluate(agent, train_set, test_set, baseline_trials=5)
    assert len(records) == len(test_set.test)
    assert all(r.condition == "abstract->metamer" for r in records)


def test_cross_evaluate_rejects_kind_mismatch():
    train_set = small_set(condition="abstract")
    other = BoardSet(
        kind=AbstractionKind.CROSS,
        condition="metamer",
        train=[],
        test=[(b, i) for i, b in enumerate(distinct_boards(2, kind=AbstractionKind.CROSS))],
    )
    with pytest.raises(ValueError, match="kind mismatch"):
        cross_evaluate(build_agent("corelnet", seed=0), train_set, other)
    with pytest.raises(ValueError, match="differing conditions"):
        cross_evaluate(build_agent("corelnet", seed=0), train_set, small_set(seed=3))


def test_choice_probe_distribution_and_ground_truth():
    board = distinct_boards(1)[0]
    start = board.red_tiles()[0]
    agent = build_agent("rnn", seed=0)
    scenario = ProbeScenario(board=board, start_tile=start, history=(5,), label="probe-1")
    first = choice_probe(agent, scenario)
    second = choice_probe(agent, scenario)
    assert first == second
    assert abs(sum(first["probs"]) - 1.0) < 1e-12
    assert first["argmax_is_red"] == (board.tiles.ravel()[first["argmax"]] == 1)
    assert first["label"] == "probe-1"


def test_choice_probe_rejects_inconsistent_history():
    board = distinct_boards(1)[0]
    blue_tile = int(np.flatnonzero(board.tiles.ravel() == 0)[0])
    agent = build_agent("corelnet", seed=0)
    with pytest.raises(ValueError, match="inconsistent"):
        choice_probe(agent, ProbeScenario(board=board, start_tile=blue_tile))
    too_long = ProbeScenario(
        board=board, start_tile=board.red_tiles()[0], history=tuple([1] * 201)
    )
    with pytest.raises(ValueError, match="inconsistent"):
        choice_probe(agent, too_long)


# ---------------------------------------------------------------- reports


def synthetic_records(z_shift=0.0, n_per_cell=4, seed=0):
    rng = np.random.default_rng(seed)
    records = []
    for kind in KINDS:
        for performer in ("Human", "Agent"):
            for condition in ("abstract", "metamer"):
                for i in range(n_per_cell):
                    shift = z_shift if condition == "metamer" else 0.0
                    records.append(
                        make_record(
                            kind=kind,
                            performer=performer,
                            condition=condition,
                            z=float(rng.normal()) + shift,
                            ident=f"{performer}-{i}",
                        )
                    )
    return records


def test_compare_anova_df_column():
    report = compare(synthetic_records())
    assert [row.df for row in report.anova.rows] == [1, 7, 1, 1, 7, 7, 7]


def test_compare_condition_swap_negates_within_performer_t():
    records = synthetic_records(z_shift=0.5)
    swapped = [
        PerformanceRecord(
            r.performer,
            r.performer_id,
            r.kind,
            "metamer" if r.condition == "abstract" else "abstract",
            r.board_id,
            r.blue_count,
            r.z,
        )
        for r in records
    ]
    t_original = compare(records).t_tests["all"]["Human abstract vs Human metamer"]["t"]
    t_swapped = compare(swapped).t_tests["all"]["Human abstract vs Human metamer"]["t"]
    assert abs(t_original + t_swapped) < 1e-12


def test_compare_mean_equals_arithmetic_mean_excluding_undefined():
    records = synthetic_records()
    records.append(make_record(kind="copy", performer="Agent", condition="abstract", z=None))
    report = compare(records)
    cell = [
        r.z
        for r in records
        if r.kind == "copy"
        and r.performer == "Agent"
        and r.condition == "abstract"
        and r.z is not None
    ]
    assert abs(report.mean_z["copy"]["Agent"]["abstract"] - float(np.mean(cell))) < 1e-12
    assert report.n_undefined_z == 1
    assert report.n_records == len(records)


def test_compare_names_missing_cell():
    agent_only = [r for r in synthetic_records() if r.performer == "Agent"]
    with pytest.raises(EmptyCellError, match="performer=Human"):
        compare(agent_only)
    report = compare(agent_only, allow_partial=True)
    assert report.anova is None
    assert report.n_records == len(agent_only)


def test_compare_cross_records_summarized_separately():
    records = synthetic_records()
    for i in range(3):
        records.append(
            make_record(
                kind="rectangle",
                performer="Agent",
                condition="abstract->metamer",
                z=0.5,
                ident=f"cross-{i}",
            )
        )
    report = compare(records)
    entry = report.cross["rectangle"]["abstract->metamer"]
    assert entry["n"] == 3
    assert abs(entry["mean_z"] - 0.5) < 1e-12
    # cross records stay out of the factorial tables
    assert "abstract->metamer" not in report.mean_z["rectangle"]["Agent"]


def test_report_json_round_trips():
    records = synthetic_records()
    records.append(
        make_record(kind="copy", performer="Agent", condition="abstract->metamer", z=1.0)
    )
    report = compare(records)
    payload = json.loads(json.dumps(report.to_json()))
    assert payload["n_records"] == len(records)
    assert payload["anova"]["rows"][0]["effect"] == "performer"
    assert payload["cross"]["copy"]["abstract->metamer"]["n"] == 1
    assert payload["t_tests"]["all"]["Human abstract vs Agent abstract"]["df"] == 8 * 2 * 4 - 2


def test_records_csv_round_trip(tmp_path):
    records = [
        make_record(z=1.25),
        make_record(z=None, ident="b"),
        make_record(performer="Human", condition="metamer", z=-0.5, ident="c"),
    ]
    path = tmp_path / "records.csv"
    with open(path, "w") as fp:
        write_records(records, fp)
    with open(path) as fp:
        loaded = read_records(fp)
    assert loaded == records
    header = path.read_text().splitlines()[0]
    assert header == "performer,performer_id,kind,condition,board_id,blue_count,z"


def test_read_records_rejects_wrong_columns():
    with pytest.raises(ValueError, match="columns"):
        read_records(io.StringIO("a,b,c\n1,2,3\n"))
