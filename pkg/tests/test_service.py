"""Experiment service: session flow, event log, replay, export, HTTP codes."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from tilemeta.board import GRID_SIZE, Board
from tilemeta.datasets import BoardSet
from tilemeta.rules import AbstractionKind, generate_board
from tilemeta.service import (
    ExperimentPlan,
    ExperimentService,
    create_app,
    replay_log,
)


class FakeClock:
    def __init__(self, start=1_000_000.0):
        self.now = start

    def __call__(self):
        return self.now

    def advance(self, seconds):
        self.now += seconds


def small_set(kind="rectangle", condition="abstract", n=3, seed=0, min_reds=2):
    """A test-only board set; min_reds=2 keeps every board clickable."""
    rng = np.random.default_rng(seed)
    boards, seen = [], set()
    while len(boards) < n:
        board = generate_board(AbstractionKind(kind), rng)
        if board.key() not in seen and board.red_count >= min_reds:
            seen.add(board.key())
            boards.append(board)
    return BoardSet(
        kind=AbstractionKind(kind),
        condition=condition,
        train=[],
        test=[(board, 100 + i) for i, board in enumerate(boards)],
    )


def two_cell_plan(**kwargs):
    return ExperimentPlan(
        cells={
            ("rectangle", "abstract"): small_set("rectangle", "abstract", seed=0),
            ("rectangle", "metamer"): small_set("rectangle", "metamer", seed=9),
        },
        **kwargs,
    )


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def client(tmp_path, clock):
    app = create_app(
        two_cell_plan(),
        tmp_path / "events.jsonl",
        admin_token="sesame",
        clock=clock,
        seed=0,
        baseline_trials=30,
    )
    with TestClient(app) as c:
        c.app_ref = app
        yield c


def service_of(client):
    return client.app_ref.state.service


def session_internals(client, session_id):
    return service_of(client).sessions[session_id]


def start_session(client):
    response = client.post("/api/session")
    assert response.status_code == 200
    return response.json()


def reveal_all_reds(client, session_id):
    """Click every red on the current board; returns the last response."""
    session = session_internals(client, session_id)
    reds = [int(t) for t in session.episode.board.red_tiles()]
    last = None
    for tile in reds:
        if session.episode is None or session.episode.cells.ravel()[tile] != 0:
            continue
        last = client.post(f"/api/session/{session_id}/click", json={"tile": tile})
        assert last.status_code == 200
    return last


# ---------------------------------------------------------------------------
# session flow


def test_first_view_shows_exactly_one_red(client):
    body = start_session(client)
    cells = body["grid_view"]["cells"]
    assert cells.count("red") == 1
    assert cells.count("covered") == 48
    assert body["grid_view"]["points"] == 0
    assert body["instructions"]
    assert len(body["session_id"]) == 32


def test_session_ids_are_distinct(client):
    ids = {start_session(client)["session_id"] for _ in range(5)}
    assert len(ids) == 5


def test_session_persisted_before_response(client, tmp_path):
    body = start_session(client)
    lines = (tmp_path / "events.jsonl").read_text().splitlines()
    events = [json.loads(line) for line in lines]
    assert events[-1]["type"] == "session"
    assert events[-1]["session_id"] == body["session_id"]
    assert events[-1]["seq"] == 0


def test_red_click_scores_plus_one(client):
    sid = start_session(client)["session_id"]
    session = session_internals(client, sid)
    board = session.episode.board
    covered_reds = [
        int(t) for t in board.red_tiles() if session.episode.cells.ravel()[t] == 0
    ]
    blue_tiles = [i for i in range(49) if board.tiles.ravel()[i] == 0]

    response = client.post(f"/api/session/{sid}/click", json={"tile": covered_reds[0]})
    payload = response.json()
    assert payload["color"] == "red"
    assert payload["reward"] in (1, 10)

    response = client.post(f"/api/session/{sid}/click", json={"tile": blue_tiles[0]})
    payload = response.json()
    assert payload["color"] == "blue"
    assert payload["reward"] == -1


def test_repeat_click_costs_two_points(client):
    sid = start_session(client)["session_id"]
    session = session_internals(client, sid)
    start_tile = session.episode.start_tile
    before = session.points
    response = client.post(f"/api/session/{sid}/click", json={"tile": start_tile})
    payload = response.json()
    assert payload["reward"] == -2
    assert payload["color"] == "red"
    assert payload["points"] == before - 2


def test_last_red_advances_to_next_board(client):
    sid = start_session(client)["session_id"]
    last = reveal_all_reds(client, sid).json()
    assert last["board_done"] is True
    assert last["reward"] == 10
    assert last["done"] is False
    next_view = last["next_board"]
    assert next_view["board_index"] == 2
    assert next_view["cells"].count("red") == 1
    assert next_view["cells"].count("covered") == 48


def test_finishing_every_board_completes_session(client):
    sid = start_session(client)["session_id"]
    total = session_internals(client, sid).boards_total
    for _ in range(total):
        last = reveal_all_reds(client, sid)
    assert last.json()["done"] is True
    assert last.json()["next_board"] is None
    assert client.post(f"/api/session/{sid}/click", json={"tile": 0}).status_code == 409


def test_board_view_read_is_idempotent(client, tmp_path):
    sid = start_session(client)["session_id"]
    log_size = (tmp_path / "events.jsonl").stat().st_size
    first = client.get(f"/api/session/{sid}/board").json()
    second = client.get(f"/api/session/{sid}/board").json()
    assert first == second
    assert (tmp_path / "events.jsonl").stat().st_size == log_size
    assert session_internals(client, sid).seq == 0


def test_unknown_session_is_404(client):
    assert client.get("/api/session/deadbeef/board").status_code == 404
    assert client.post("/api/session/deadbeef/click", json={"tile": 0}).status_code == 404
    assert client.post("/api/session/deadbeef/complete").status_code == 404


def test_out_of_range_tile_is_422(client):
    sid = start_session(client)["session_id"]
    assert client.post(f"/api/session/{sid}/click", json={"tile": 49}).status_code == 422
    assert client.post(f"/api/session/{sid}/click", json={"tile": -1}).status_code == 422


def test_complete_marks_session_and_blocks_clicks(client):
    sid = start_session(client)["session_id"]
    summary = client.post(f"/api/session/{sid}/complete").json()
    assert summary == {"points": 0, "boards_solved": 0}
    assert client.post(f"/api/session/{sid}/complete").status_code == 409
    assert client.post(f"/api/session/{sid}/click", json={"tile": 0}).status_code == 409


def test_idle_session_expires_after_an_hour(client, clock):
    sid = start_session(client)["session_id"]
    clock.advance(3601)
    response = client.post(f"/api/session/{sid}/click", json={"tile": 0})
    assert response.status_code == 409
    assert "expired" in response.json()["detail"]


def test_activity_keeps_session_alive(client, clock):
    sid = start_session(client)["session_id"]
    session = session_internals(client, sid)
    tiles = [int(t) for t in session.episode.board.red_tiles()]
    clock.advance(3000)
    assert client.post(f"/api/session/{sid}/click", json={"tile": tiles[-1]}).status_code == 200
    clock.advance(3000)
    assert client.get(f"/api/session/{sid}/board").status_code == 200


# ---------------------------------------------------------------------------
# server authority


def test_responses_never_leak_covered_colors(client):
    body = start_session(client)
    sid = body["session_id"]
    session = session_internals(client, sid)
    board = session.episode.board

    def check_view(view):
        revealed = [i for i, c in enumerate(view["cells"]) if c != "covered"]
        for i in revealed:
            truth = "red" if board.tiles.ravel()[i] == 1 else "blue"
            assert view["cells"][i] == truth
        return len(revealed)

    assert check_view(body["grid_view"]) == 1
    blue = [i for i in range(49) if board.tiles.ravel()[i] == 0][0]
    client.post(f"/api/session/{sid}/click", json={"tile": blue})
    view = client.get(f"/api/session/{sid}/board").json()
    assert check_view(view) == 2
    raw = json.dumps(view)
    assert "tiles" not in raw and "board\":" not in raw


# ---------------------------------------------------------------------------
# event log and replay


def session_events(tmp_path, sid=None):
    lines = (tmp_path / "events.jsonl").read_text().splitlines()
    events = [json.loads(line) for line in lines]
    return [e for e in events if sid is None or e["session_id"] == sid]


def test_sequence_numbers_are_gapless(client, tmp_path):
    sid = start_session(client)["session_id"]
    reveal_all_reds(client, sid)
    client.post(f"/api/session/{sid}/complete")
    seqs = [e["seq"] for e in session_events(tmp_path, sid)]
    assert seqs == list(range(len(seqs)))


def test_rebuild_from_log_matches_live_state(client, tmp_path, clock):
    sid = start_session(client)["session_id"]
    session = session_internals(client, sid)
    board = session.episode.board
    covered_red = [
        int(t) for t in board.red_tiles() if session.episode.cells.ravel()[t] == 0
    ][0]
    blue = [i for i in range(49) if board.tiles.ravel()[i] == 0][0]
    for tile in (covered_red, blue, blue):
        client.post(f"/api/session/{sid}/click", json={"tile": tile})

    rebuilt_service = ExperimentService(
        two_cell_plan(), tmp_path / "events.jsonl", clock=clock, seed=7
    )
    live = session_internals(client, sid)
    rebuilt = rebuilt_service.sessions[sid]
    assert rebuilt.points == live.points
    assert rebuilt.seq == live.seq
    assert rebuilt.board_index == live.board_index
    assert rebuilt.completed == live.completed
    assert rebuilt.kind == live.kind and rebuilt.condition == live.condition
    assert rebuilt.order == live.order
    assert np.array_equal(rebuilt.episode.cells, live.episode.cells)
    assert rebuilt.last_active == live.last_active


def test_replay_recomputes_rewards_rather_than_trusting_log(client, tmp_path):
    sid = start_session(client)["session_id"]
    reveal_all_reds(client, sid)
    log = tmp_path / "events.jsonl"
    first = service_of(client).export()

    tampered = []
    for line in log.read_text().splitlines():
        event = json.loads(line)
        if event["type"] == "click":
            event["reward"] = 999
        tampered.append(json.dumps(event))
    log.write_text("\n".join(tampered) + "\n")

    second = ExperimentService(
        two_cell_plan(), log, baseline_trials=30
    ).export()
    assert second["records_csv"] == first["records_csv"]
    assert second["summary"]["corrupt_lines"] == 0


def test_corrupt_lines_are_skipped_and_reported(client, tmp_path):
    sid = start_session(client)["session_id"]
    reveal_all_reds(client, sid)
    log = tmp_path / "events.jsonl"
    with open(log, "a") as fp:
        fp.write("{not json at all\n")
        fp.write(json.dumps({"type": "click", "session_id": sid, "board_index": 1,
                             "tile": 3, "reward": 1, "done": False, "truncated": False,
                             "seq": 999, "ts": 0}) + "\n")
        fp.write(json.dumps({"type": "mystery", "session_id": sid, "seq": 1, "ts": 0}) + "\n")

    report = replay_log(two_cell_plan(), log.read_text().splitlines())
    assert len(report.corrupt) == 3
    reasons = " ".join(entry["reason"] for entry in report.corrupt)
    assert "not JSON" in reasons
    assert "sequence gap" in reasons
    assert "unknown event type" in reasons
    assert sid in report.sessions


def test_click_on_stale_board_index_is_corrupt(client, tmp_path):
    sid = start_session(client)["session_id"]
    reveal_all_reds(client, sid)
    stale = {"type": "click", "session_id": sid, "board_index": 0, "tile": 3,
             "reward": 1, "done": False, "truncated": False, "seq": 100, "ts": 0}
    lines = (tmp_path / "events.jsonl").read_text().splitlines()
    lines.append(json.dumps(stale))
    report = replay_log(two_cell_plan(), lines)
    assert len(report.corrupt) == 1


# ---------------------------------------------------------------------------
# export


def test_export_requires_admin_token(client):
    assert client.get("/api/export").status_code == 403
    assert client.get("/api/export", params={"token": "wrong"}).status_code == 403
    assert client.get("/api/export", params={"token": "sesame"}).status_code == 200
    assert client.get("/api/export", headers={"x-admin-token": "sesame"}).status_code == 200


def test_export_of_empty_log(tmp_path):
    service = ExperimentService(two_cell_plan(), tmp_path / "nothing.jsonl")
    out = service.export()
    assert out["records_csv"].splitlines() == [
        "performer,performer_id,kind,condition,board_id,blue_count,z"
    ]
    assert out["events_jsonl"] == ""
    assert out["summary"]["sessions"] == 0


def test_export_blue_counts_come_from_replay(client):
    sid = start_session(client)["session_id"]
    session = session_internals(client, sid)
    board = session.episode.board
    blues_clicked = 0
    blue_tiles = [i for i in range(49) if board.tiles.ravel()[i] == 0]
    for tile in blue_tiles[:2]:
        client.post(f"/api/session/{sid}/click", json={"tile": tile})
        blues_clicked += 1
    reveal_all_reds(client, sid)

    out = client.get("/api/export", params={"token": "sesame"}).json()
    rows = out["records_csv"].splitlines()[1:]
    row = [r for r in rows if sid in r][0]
    fields = row.split(",")
    assert fields[0] == "Human"
    assert fields[2] == "rectangle"
    assert int(fields[5]) == blues_clicked


def test_incomplete_boards_are_excluded_and_counted(client):
    sid = start_session(client)["session_id"]
    reveal_all_reds(client, sid)
    out = client.get("/api/export", params={"token": "sesame"}).json()
    summary = out["summary"]
    assert summary["records"] == 1
    assert summary["incomplete_boards"] == 2
    assert summary["completed_sessions"] == 0


def test_single_red_boards_count_as_solved_without_clicks(tmp_path):
    tiles = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    boards = []
    for i in range(2):
        grid = tiles.copy()
        grid[0, i] = 1
        boards.append(Board(grid))
    plan = ExperimentPlan(
        cells={
            ("rectangle", "abstract"): BoardSet(
                kind=AbstractionKind.RECTANGLE,
                condition="abstract",
                train=[],
                test=[(b, 5) for b in boards],
            )
        }
    )
    service = ExperimentService(plan, tmp_path / "events.jsonl", seed=0)
    session = service.create_session()
    assert session.completed is True
    assert len(session.solved_boards) == 2
    out = service.export()
    assert out["summary"]["records"] == 2
    assert all(row.endswith(",0,0") or "blue_count" in row
               for row in out["records_csv"].splitlines())


# ---------------------------------------------------------------------------
# assignment


def test_balanced_assignment_cycles_cells(tmp_path):
    plan = two_cell_plan(assignment="balanced")
    service = ExperimentService(plan, tmp_path / "events.jsonl", seed=3)
    cells = [
        (service.create_session().kind, service.create_session().condition)
        for _ in range(2)
    ]
    conditions = [c.condition for c in service.sessions.values()]
    assert sorted(conditions) == ["abstract", "abstract", "metamer", "metamer"]


def test_uniform_assignment_concentrates_over_many_sessions(tmp_path):
    cells = {}
    for kind in AbstractionKind:
        for condition in ("abstract", "metamer"):
            cells[(kind.value, condition)] = small_set(
                kind.value, condition, n=1, seed=hash((kind.value, condition)) % 1000, min_reds=1
            )
    plan = ExperimentPlan(cells=cells)
    service = ExperimentService(plan, tmp_path / "events.jsonl", seed=11)
    counts = {key: 0 for key in cells}
    for _ in range(1600):
        session = service.create_session()
        counts[(session.kind, session.condition)] += 1
    assert sum(counts.values()) == 1600
    for cell, count in counts.items():
        assert 60 <= count <= 140, f"cell {cell} got {count} of 1600"


# ---------------------------------------------------------------------------
# plan loading and storage failures


def test_plan_loader_roundtrip(tmp_path):
    abstract = small_set("cross", "abstract", seed=1)
    metamer = small_set("cross", "metamer", seed=2)
    with open(tmp_path / "a.jsonl", "w") as fp:
        abstract.save(fp)
    with open(tmp_path / "m.jsonl", "w") as fp:
        metamer.save(fp)
    plan_file = tmp_path / "plan.json"
    plan_file.write_text(json.dumps({
        "cells": {"cross": {"abstract": "a.jsonl", "metamer": "m.jsonl"}},
        "assignment": "balanced",
        "test_size": 3,
        "instructions": "Click tiles.",
    }))
    plan = ExperimentPlan.load(plan_file)
    assert plan.assignment == "balanced"
    assert plan.instructions == "Click tiles."
    assert ("cross", "metamer") in plan.cells


def test_plan_loader_rejects_misplaced_condition(tmp_path):
    metamer = small_set("cross", "metamer", seed=2)
    with open(tmp_path / "m.jsonl", "w") as fp:
        metamer.save(fp)
    plan_file = tmp_path / "plan.json"
    plan_file.write_text(json.dumps({
        "cells": {"cross": {"abstract": "m.jsonl"}},
    }))
    with pytest.raises(ValueError, match="plan placed it under"):
        ExperimentPlan.load(plan_file)


def test_plan_loader_rejects_wrong_test_size(tmp_path):
    abstract = small_set("cross", "abstract", seed=1)
    with open(tmp_path / "a.jsonl", "w") as fp:
        abstract.save(fp)
    plan_file = tmp_path / "plan.json"
    plan_file.write_text(json.dumps({
        "cells": {"cross": {"abstract": "a.jsonl"}},
        "test_size": 24,
    }))
    with pytest.raises(ValueError, match="plan declares 24"):
        ExperimentPlan.load(plan_file)


def test_plan_rejects_empty_or_bad_cells():
    with pytest.raises(ValueError, match="no cells"):
        ExperimentPlan(cells={})
    with pytest.raises(ValueError, match="unknown condition"):
        ExperimentPlan(cells={("cross", "weird"): small_set("cross", "abstract")})
    with pytest.raises(ValueError, match="references a cross set"):
        ExperimentPlan(cells={("copy", "abstract"): small_set("cross", "abstract")})


def test_storage_failure_returns_503(tmp_path, clock):
    app = create_app(
        two_cell_plan(),
        tmp_path / "missing-dir" / "events.jsonl",
        clock=clock,
    )
    with TestClient(app) as client:
        assert client.post("/api/session").status_code == 503


def test_static_mount_serves_page_without_shadowing_api(tmp_path, clock):
    webroot = tmp_path / "web"
    webroot.mkdir()
    (webroot / "index.html").write_text("<div id=\"app\"></div>")
    app = create_app(
        two_cell_plan(),
        tmp_path / "events.jsonl",
        static_dir=webroot,
        clock=clock,
    )
    with TestClient(app) as client:
        page = client.get("/")
        assert page.status_code == 200
        assert 'id="app"' in page.text
        assert client.post("/api/session").status_code == 200
