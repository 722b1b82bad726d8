"""HTTP layer for the controllability experiment.

Serves session creation, task assignments, lattice audio, timed answer
submission, and aggregate results. The append-only answer log is the
single source of truth; scores are always recomputed from it, so crash
recovery is just re-reading the log.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .grid import (AnswerRecord, GridSpec, append_answer, load_answers,
                   load_grid, score_answers, summarize_durations)
from .stimuli import StimulusManifest

TASKS_PER_SESSION = 15


@dataclass
class ServiceConfig:
    grid_path: Path
    manifest_path: Path
    answer_log: Path
    session_log: Path
    admin_key: str
    seed: int = 2013
    static_dir: Path | None = None


@dataclass
class Session:
    id: str
    variant: int
    seed: int
    tasks: list[dict]            # {task_index, ref_text, space_text, true_anchor}
    created_at: float
    completed: int = 0

    def as_dict(self) -> dict:
        return {"id": self.id, "variant": self.variant, "seed": self.seed,
                "tasks": self.tasks, "created_at": self.created_at}


def _make_tasks(variant: int, seed: int, texts: list[int]) -> list[dict]:
    """15 tasks with anchors drawn uniformly from the 25; variant 2 uses a
    different text for reference and space."""
    rng = np.random.default_rng(seed)
    tasks = []
    for i in range(1, TASKS_PER_SESSION + 1):
        anchor = [int(rng.integers(0, 5)), int(rng.integers(0, 5))]
        space_text = int(texts[rng.integers(0, len(texts))])
        if variant == 1:
            ref_text = space_text
        else:
            others = [t for t in texts if t != space_text]
            ref_text = int(others[rng.integers(0, len(others))])
        tasks.append({"task_index": i, "ref_text": ref_text,
                      "space_text": space_text, "true_anchor": anchor})
    return tasks


class CreateSessionBody(BaseModel):
    variant: int


class AnswerBody(BaseModel):
    task_index: int
    x: float
    y: float
    duration_ms: float


class ExperimentService:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.grid: GridSpec = load_grid(config.grid_path)
        self.manifest = StimulusManifest.load(config.manifest_path)
        self.sessions: dict[str, Session] = {}
        self.write_lock = threading.Lock()
        self._recover()

    def _recover(self):
        if self.config.session_log.exists():
            for line in self.config.session_log.read_text().splitlines():
                if not line.strip():
                    continue
                doc = json.loads(line)
                self.sessions[doc["id"]] = Session(
                    id=doc["id"], variant=doc["variant"], seed=doc["seed"],
                    tasks=doc["tasks"], created_at=doc["created_at"])
        if self.config.answer_log.exists():
            for a in load_answers(self.config.answer_log, effective=True):
                s = self.sessions.get(a.session_id)
                if s is not None:
                    s.completed = max(s.completed, a.task_index)

    def create_session(self, variant: int) -> Session:
        if variant not in (1, 2):
            raise HTTPException(400, "variant must be 1 or 2")
        if variant == 2 and len(self.manifest.texts) < 2:
            raise HTTPException(400, "variant 2 requires at least two texts")
        token = secrets.token_hex(16)
        seed = secrets.randbits(63)
        session = Session(id=token, variant=variant, seed=seed,
                          tasks=_make_tasks(variant, seed, self.manifest.texts),
                          created_at=time.time())
        with self.write_lock:
            with open(self.config.session_log, "a", encoding="utf-8") as f:
                f.write(json.dumps(session.as_dict()) + "\n")
                f.flush()
            self.sessions[token] = session
        return session

    def get_session(self, token: str) -> Session:
        session = self.sessions.get(token)
        if session is None:
            raise HTTPException(401, "unknown session token")
        return session

    def task_for(self, session: Session, index: int) -> dict:
        if not (1 <= index <= TASKS_PER_SESSION):
            raise HTTPException(404, "task index out of range")
        if index > session.completed + 1:
            raise HTTPException(409, "cannot skip ahead to an unopened task")
        return session.tasks[index - 1]

    def record_answer(self, session: Session, body: AnswerBody) -> AnswerRecord:
        if not (1 <= body.task_index <= TASKS_PER_SESSION):
            raise HTTPException(404, "task index out of range")
        if body.task_index > session.completed + 1:
            raise HTTPException(409, "task not open yet")
        if body.duration_ms < 0:
            raise HTTPException(400, "negative duration")
        task = session.tasks[body.task_index - 1]
        answer = AnswerRecord(
            session_id=session.id, variant=session.variant,
            task_index=body.task_index,
            true_anchor=tuple(task["true_anchor"]),
            clicked=(body.x, body.y), duration=body.duration_ms / 1000.0,
            timestamp=time.time())
        with self.write_lock:
            append_answer(self.config.answer_log, answer)
            session.completed = max(session.completed, body.task_index)
        return answer

    def results(self) -> dict:
        if not self.config.answer_log.exists():
            return {"answers": 0}
        answers = load_answers(self.config.answer_log, effective=True)
        if not answers:
            return {"answers": 0}
        report = score_answers(self.grid, answers)
        report["answers"] = len(answers)
        report["durations"] = summarize_durations(answers)
        return report


def create_app(config: ServiceConfig) -> FastAPI:
    service = ExperimentService(config)
    app = FastAPI(title="controllability experiment")
    app.state.service = service
    grid = service.grid

    public_grid = {
        "bounds": list(grid.bounds),
        "resolution": grid.resolution,
        "anchors": grid.anchors.tolist(),
        "unit": grid.unit,
    }

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        session = service.create_session(body.variant)
        return {"token": session.id, "variant": session.variant,
                "task_count": TASKS_PER_SESSION}

    @app.get("/sessions/{token}/tasks/{index}")
    def get_task(token: str, index: int):
        session = service.get_session(token)
        task = service.task_for(session, index)
        # public fields only: the true anchor stays on the server
        return {"task_index": task["task_index"],
                "space_text": task["space_text"],
                "reference_url": f"/sessions/{token}/tasks/{index}/reference",
                "grid": public_grid,
                "task_count": TASKS_PER_SESSION,
                "completed": session.completed}

    @app.get("/sessions/{token}/tasks/{index}/reference")
    def get_reference(token: str, index: int):
        session = service.get_session(token)
        task = service.task_for(session, index)
        anchor = grid.anchor(*task["true_anchor"])
        xi, yi = grid.nearest_lattice(anchor)
        path = service.manifest.path(task["ref_text"], xi, yi)
        return Response(content=path.read_bytes(), media_type="audio/wav")

    @app.get("/audio/{text}/{xi}/{yi}")
    def get_audio(text: int, xi: int, yi: int):
        try:
            path = service.manifest.path(text, xi, yi)
        except ValueError:
            raise HTTPException(404, "no such stimulus") from None
        return Response(content=path.read_bytes(), media_type="audio/wav")

    @app.post("/sessions/{token}/answers")
    def post_answer(token: str, body: AnswerBody):
        session = service.get_session(token)
        answer = service.record_answer(session, body)
        return {"ok": True, "task_index": answer.task_index,
                "completed": session.completed}

    @app.get("/results")
    def get_results(key: str = ""):
        if key != config.admin_key:
            raise HTTPException(401, "bad admin key")
        return service.results()

    if config.static_dir is not None:
        app.mount("/", StaticFiles(directory=str(config.static_dir), html=True),
                  name="static")

    return app
