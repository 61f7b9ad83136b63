"""Web service that runs the human experiment end to end.

The server owns all board state: clients see covered cells until they
click, every click is adjudicated by the episode rules and appended to a
JSONL event log before the response goes out, and exports rebuild
performance records by replaying that log rather than trusting it.
"""

from __future__ import annotations

import copy
import io
import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .board import N_TILES
from .datasets import CONDITIONS, BoardSet
from .episode import CELL_NAMES, CellState, EpisodeState, new_episode, step
from .evaluate import PerformanceRecord, score_episode, write_records
from .heuristic import BaselineCache
from .rules import AbstractionKind

SESSION_TTL_SECONDS = 60 * 60

DEFAULT_INSTRUCTIONS = (
    "Click on tiles to reveal two-dimensional patterns on the grid. "
    "A red tile scores +1, a blue tile -1, clicking an already revealed "
    "tile -2, and revealing the last red tile +10. Reveal every red tile "
    "to move on to the next grid. Your score is shown as points."
)


class ClickBody(BaseModel):
    tile: int


class ServiceError(Exception):
    """Base for errors that map onto HTTP status codes."""

    status = 500


class UnknownSessionError(ServiceError):
    status = 404


class SessionCompletedError(ServiceError):
    status = 409


class InvalidTileError(ServiceError):
    status = 422


class StorageError(ServiceError):
    status = 503


# ---------------------------------------------------------------------------
# plan


@dataclass
class ExperimentPlan:
    """Board sets for each (kind, condition) cell plus assignment policy.

    A full experiment covers all 8 kinds x {abstract, metamer}; partial
    plans are allowed for pilots and tests.
    """

    cells: dict[tuple[str, str], BoardSet]
    instructions: str = DEFAULT_INSTRUCTIONS
    assignment: str = "uniform"
    client_click_filter: bool = True

    def __post_init__(self) -> None:
        if not self.cells:
            raise ValueError("plan has no cells")
        if self.assignment not in ("uniform", "balanced"):
            raise ValueError(f"assignment must be uniform or balanced, got {self.assignment!r}")
        for (kind, condition), boardset in self.cells.items():
            if condition not in CONDITIONS:
                raise ValueError(f"unknown condition {condition!r}")
            if boardset.kind.value != kind:
                raise ValueError(f"cell {kind}/{condition} references a {boardset.kind.value} set")
            if not boardset.test:
                raise ValueError(f"cell {kind}/{condition} has no test boards")

    @property
    def cell_keys(self) -> list[tuple[str, str]]:
        return sorted(self.cells)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentPlan":
        """Plan file: {"cells": {kind: {condition: boardfile}}, ...}.

        Board file paths are resolved relative to the plan file.  An
        optional "test_size" pins the expected test-split length of
        every referenced set.
        """
        path = Path(path)
        with open(path) as fp:
            payload = json.load(fp)
        cells: dict[tuple[str, str], BoardSet] = {}
        for kind_name, conditions in payload["cells"].items():
            kind = AbstractionKind(kind_name)
            for condition, ref in conditions.items():
                with open(path.parent / ref) as fp:
                    boardset = BoardSet.load(fp)
                if boardset.condition != condition:
                    raise ValueError(
                        f"{ref} holds condition {boardset.condition!r}, "
                        f"plan placed it under {condition!r}"
                    )
                cells[(kind.value, condition)] = boardset
        expected = payload.get("test_size")
        if expected is not None:
            for (kind_name, condition), boardset in cells.items():
                if len(boardset.test) != expected:
                    raise ValueError(
                        f"cell {kind_name}/{condition} has {len(boardset.test)} "
                        f"test boards, plan declares {expected}"
                    )
        return cls(
            cells=cells,
            instructions=payload.get("instructions", DEFAULT_INSTRUCTIONS),
            assignment=payload.get("assignment", "uniform"),
            client_click_filter=bool(payload.get("client_click_filter", True)),
        )


# ---------------------------------------------------------------------------
# sessions


@dataclass
class SessionState:
    session_id: str
    kind: str
    condition: str
    order: list[int]
    board_index: int = 0
    episode: EpisodeState | None = None
    points: int = 0
    seq: int = 0
    created: float = 0.0
    last_active: float = 0.0
    completed: bool = False
    solved_boards: list[EpisodeState] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def boards_total(self) -> int:
        return len(self.order)


def _grid_view(session: SessionState) -> dict:
    if session.episode is None:
        cells: list[str] = []
    else:
        cells = [CELL_NAMES[CellState(v)] for v in session.episode.cells.ravel()]
    return {
        "board_index": min(session.board_index + 1, session.boards_total),
        "total_boards": session.boards_total,
        "cells": cells,
        "points": session.points,
        "done": session.completed,
    }


class ExperimentService:
    """In-memory sessions in front of an append-only JSONL event log.

    Every state change is written (and fsynced) before the caller sees
    the response, and the constructor replays an existing log so a
    restarted server carries on where it stopped.
    """

    def __init__(
        self,
        plan: ExperimentPlan,
        log_path: str | Path,
        admin_token: str | None = None,
        clock: Callable[[], float] = time.time,
        seed: int | None = None,
        baseline_trials: int = 1000,
        baseline_seed: int = 0,
        session_ttl: float = SESSION_TTL_SECONDS,
    ):
        self.plan = plan
        self.log_path = Path(log_path)
        self.admin_token = admin_token or os.environ.get("TILEMETA_ADMIN_TOKEN") or secrets.token_hex(16)
        self.clock = clock
        self.rng = np.random.default_rng(seed)
        self.baseline_trials = baseline_trials
        self.baseline_seed = baseline_seed
        self.session_ttl = session_ttl
        self.sessions: dict[str, SessionState] = {}
        self._cache = BaselineCache()
        self._log_lock = threading.Lock()
        self._assign_counter = 0
        if self.log_path.exists() and self.log_path.stat().st_size > 0:
            report = replay_log(self.plan, self._read_log_lines())
            self.sessions = report.sessions
            self._assign_counter = len(report.sessions)

    # -- log plumbing

    def _read_log_lines(self) -> list[str]:
        with open(self.log_path) as fp:
            return fp.read().splitlines()

    def _append(self, event: dict) -> None:
        line = json.dumps(event, separators=(",", ":"))
        try:
            with self._log_lock:
                with open(self.log_path, "a") as fp:
                    fp.write(line + "\n")
                    fp.flush()
                    os.fsync(fp.fileno())
        except OSError as exc:
            raise StorageError(f"event log write failed: {exc}") from exc

    # -- session lifecycle

    def _pick_cell(self) -> tuple[str, str]:
        keys = self.plan.cell_keys
        if self.plan.assignment == "balanced":
            cell = keys[self._assign_counter % len(keys)]
        else:
            cell = keys[int(self.rng.integers(len(keys)))]
        self._assign_counter += 1
        return cell

    def create_session(self) -> SessionState:
        kind, condition = self._pick_cell()
        boardset = self.plan.cells[(kind, condition)]
        order = [int(i) for i in self.rng.permutation(len(boardset.test))]
        now = self.clock()
        session = SessionState(
            session_id=secrets.token_hex(16),
            kind=kind,
            condition=condition,
            order=order,
            created=now,
            last_active=now,
        )
        _advance_to_playable(self.plan, session)
        self._append(
            {
                "type": "session",
                "session_id": session.session_id,
                "kind": kind,
                "condition": condition,
                "order": order,
                "seq": 0,
                "ts": now,
            }
        )
        self.sessions[session.session_id] = session
        return session

    def _get(self, session_id: str) -> SessionState:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"unknown session {session_id}")
        return session

    def _expired(self, session: SessionState) -> bool:
        return self.clock() - session.last_active > self.session_ttl

    def board_view(self, session_id: str) -> dict:
        return _grid_view(self._get(session_id))

    def record_click(self, session_id: str, tile: int) -> dict:
        session = self._get(session_id)
        with session.lock:
            if session.completed:
                raise SessionCompletedError("session already completed")
            if self._expired(session):
                raise SessionCompletedError("session expired")
            if not isinstance(tile, int) or not 0 <= tile < N_TILES:
                raise InvalidTileError(f"tile must be an integer in [0, {N_TILES})")
            # Step a copy so a failed log append leaves state unchanged
            # and the log never runs behind the live server.
            episode = copy.deepcopy(session.episode)
            outcome = step(episode, tile)
            now = self.clock()
            self._append(
                {
                    "type": "click",
                    "session_id": session_id,
                    "board_index": session.board_index,
                    "tile": tile,
                    "reward": outcome.reward,
                    "done": outcome.done,
                    "truncated": outcome.truncated,
                    "seq": session.seq + 1,
                    "ts": now,
                }
            )
            session.episode = episode
            session.seq += 1
            session.points += outcome.reward
            session.last_active = now
            color = CELL_NAMES[CellState(int(episode.cells.ravel()[tile]))]
            next_view = None
            if outcome.done:
                if not outcome.truncated:
                    session.solved_boards.append(episode)
                session.board_index += 1
                _advance_to_playable(self.plan, session)
                if not session.completed:
                    next_view = _grid_view(session)
            return {
                "reward": outcome.reward,
                "color": color,
                "done": session.completed,
                "board_done": bool(outcome.done),
                "points": session.points,
                "next_board": next_view,
            }

    def complete_session(self, session_id: str) -> dict:
        session = self._get(session_id)
        with session.lock:
            if session.completed:
                raise SessionCompletedError("session already completed")
            now = self.clock()
            self._append(
                {
                    "type": "complete",
                    "session_id": session_id,
                    "seq": session.seq + 1,
                    "ts": now,
                }
            )
            session.seq += 1
            session.completed = True
            session.episode = None
            session.last_active = now
            return {"points": session.points, "boards_solved": len(session.solved_boards)}

    # -- export

    def export(self) -> dict:
        """Records plus raw log, both rebuilt from disk, never from RAM."""
        if self.log_path.exists():
            lines = self._read_log_lines()
            raw = "\n".join(lines) + ("\n" if lines else "")
        else:
            lines, raw = [], ""
        report = replay_log(self.plan, lines)
        records: list[PerformanceRecord] = []
        incomplete_boards = 0
        completed_sessions = 0
        for session in report.sessions.values():
            completed_sessions += session.completed
            incomplete_boards += session.boards_total - len(session.solved_boards)
            for episode in session.solved_boards:
                records.append(
                    score_episode(
                        episode.board,
                        episode.blue_revealed,
                        performer="Human",
                        performer_id=session.session_id,
                        kind=session.kind,
                        condition=session.condition,
                        cache=self._cache,
                        baseline_trials=self.baseline_trials,
                        baseline_seed=self.baseline_seed,
                    )
                )
        buffer = io.StringIO()
        write_records(records, buffer)
        return {
            "records_csv": buffer.getvalue(),
            "events_jsonl": raw,
            "summary": {
                "sessions": len(report.sessions),
                "completed_sessions": int(completed_sessions),
                "records": len(records),
                "incomplete_boards": incomplete_boards,
                "corrupt_lines": len(report.corrupt),
                "corrupt_detail": report.corrupt[:20],
            },
        }


def _advance_to_playable(plan: ExperimentPlan, session: SessionState) -> None:
    """Start the next board, skipping any that are solved on reveal.

    A one-red board is finished the moment its start tile shows, so it
    can never receive a click; it still counts as solved.
    """
    boardset = plan.cells[(session.kind, session.condition)]
    while session.board_index < len(session.order):
        board, start_seed = boardset.test[session.order[session.board_index]]
        episode = new_episode(board, seed=start_seed)
        if not episode.done:
            session.episode = episode
            return
        session.solved_boards.append(episode)
        session.board_index += 1
    session.completed = True
    session.episode = None


# ---------------------------------------------------------------------------
# event-log replay


@dataclass
class ReplayReport:
    sessions: dict[str, SessionState]
    corrupt: list[dict]


def replay_log(plan: ExperimentPlan, lines: Iterable[str]) -> ReplayReport:
    """Rebuild session states by re-adjudicating every logged click.

    Rewards and colors are recomputed through the episode rules; the
    logged values are ignored.  A line that does not parse, arrives out
    of sequence, or contradicts the rebuilt state is skipped and
    reported.
    """
    sessions: dict[str, SessionState] = {}
    corrupt: list[dict] = []

    def bad(lineno: int, reason: str) -> None:
        corrupt.append({"line": lineno, "reason": reason})

    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            event = json.loads(line)
        except json.JSONDecodeError as exc:
            bad(lineno, f"not JSON: {exc}")
            continue
        etype = event.get("type")
        try:
            if etype == "session":
                sid = event["session_id"]
                if sid in sessions:
                    bad(lineno, f"duplicate session {sid}")
                    continue
                cell = (event["kind"], event["condition"])
                if cell not in plan.cells:
                    bad(lineno, f"no plan cell {cell}")
                    continue
                order = [int(i) for i in event["order"]]
                n_test = len(plan.cells[cell].test)
                if sorted(order) != list(range(n_test)):
                    bad(lineno, "order is not a permutation of the test set")
                    continue
                session = SessionState(
                    session_id=sid,
                    kind=event["kind"],
                    condition=event["condition"],
                    order=order,
                    created=float(event["ts"]),
                    last_active=float(event["ts"]),
                )
                _advance_to_playable(plan, session)
                sessions[sid] = session
            elif etype == "click":
                session = sessions.get(event["session_id"])
                if session is None:
                    bad(lineno, "click for unknown session")
                    continue
                if event["seq"] != session.seq + 1:
                    bad(lineno, f"sequence gap: expected {session.seq + 1}, got {event['seq']}")
                    continue
                if session.completed:
                    bad(lineno, "click after completion")
                    continue
                if event["board_index"] != session.board_index:
                    bad(lineno, f"click on board {event['board_index']}, current is {session.board_index}")
                    continue
                outcome = step(session.episode, int(event["tile"]))
                session.seq += 1
                session.points += outcome.reward
                session.last_active = float(event["ts"])
                if outcome.done:
                    if not outcome.truncated:
                        session.solved_boards.append(session.episode)
                    session.board_index += 1
                    _advance_to_playable(plan, session)
            elif etype == "complete":
                session = sessions.get(event["session_id"])
                if session is None:
                    bad(lineno, "complete for unknown session")
                    continue
                if event["seq"] != session.seq + 1:
                    bad(lineno, f"sequence gap: expected {session.seq + 1}, got {event['seq']}")
                    continue
                session.seq += 1
                session.completed = True
                session.episode = None
                session.last_active = float(event["ts"])
            else:
                bad(lineno, f"unknown event type {etype!r}")
        except (KeyError, TypeError, ValueError, RuntimeError) as exc:
            bad(lineno, f"{type(exc).__name__}: {exc}")
    return ReplayReport(sessions=sessions, corrupt=corrupt)


# ---------------------------------------------------------------------------
# HTTP layer


def create_app(
    plan: ExperimentPlan | str | Path,
    log_path: str | Path,
    static_dir: str | Path | None = None,
    **service_kwargs,
) -> FastAPI:
    if not isinstance(plan, ExperimentPlan):
        plan = ExperimentPlan.load(plan)
    service = ExperimentService(plan, log_path, **service_kwargs)

    app = FastAPI(title="tilemeta experiment service")
    app.state.service = service
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ServiceError)
    async def service_error(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content={"detail": str(exc)})

    @app.post("/api/session")
    def create_session():
        session = service.create_session()
        return {
            "session_id": session.session_id,
            "instructions": service.plan.instructions,
            "client_click_filter": service.plan.client_click_filter,
            "grid_view": _grid_view(session),
        }

    @app.get("/api/session/{session_id}/board")
    def get_board(session_id: str):
        return service.board_view(session_id)

    @app.post("/api/session/{session_id}/click")
    def click(session_id: str, body: ClickBody):
        return service.record_click(session_id, body.tile)

    @app.post("/api/session/{session_id}/complete")
    def complete(session_id: str):
        return service.complete_session(session_id)

    def _authorized(request: Request) -> bool:
        token = request.headers.get("x-admin-token") or request.query_params.get("token") or ""
        return secrets.compare_digest(token, service.admin_token)

    @app.get("/api/export")
    def export(request: Request):
        if not _authorized(request):
            return JSONResponse(status_code=403, content={"detail": "admin token required"})
        return service.export()

    @app.get("/api/export/records.csv")
    def export_csv(request: Request):
        if not _authorized(request):
            return JSONResponse(status_code=403, content={"detail": "admin token required"})
        return PlainTextResponse(service.export()["records_csv"], media_type="text/csv")

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        # mounted last so the API routes above keep precedence
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="webui")

    return app


def run_server(
    port: int,
    plan_path: str | Path,
    log_path: str | Path,
    static_dir: str | Path | None = None,
    **service_kwargs,
) -> None:
    import uvicorn

    app = create_app(plan_path, log_path, static_dir=static_dir, **service_kwargs)
    print(f"admin token: {app.state.service.admin_token}", flush=True)
    uvicorn.run(app, host="0.0.0.0", port=port)
