"""Live teaching sessions over a websocket.

One JSON object per text frame. A client says hello, starts a session, and
streams sensor frames; the server runs the measurement pipeline, drives the
teaching state machine, and pushes feedback, measurement, result and phase
messages back in a strictly deterministic order. Completed goals are
appended to the server's session log.

Each connection is handled sequentially, so two sessions can never
interleave state; the only shared resource is the append-only log, which
commits whole lines.
"""
from __future__ import annotations

import time
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .core import (
    DEFAULT_PROFILE,
    DeviceProfile,
    EngineConfig,
    FeedbackEvent,
    GestureKind,
    MeasurementResult,
    decode_frame,
)
from .engine import MeasurementPipeline
from .teaching import (
    AssessmentRecord,
    IllegalTransitionError,
    InvalidGoalError,
    LearningModule,
    SessionPhase,
    StartGoal,
    TeachingSession,
    ToleranceMode,
    INSTRUCTIONS,
    new_session,
    run_free_exploration,
    session_step,
)
from .analytics import relative_error
from .traceio import append_session_log

PROTOCOL_VERSION = "1"


class _Connection:
    """Protocol state for one websocket client."""

    def __init__(self, cfg: EngineConfig, profile: DeviceProfile,
                 log_path: Optional[Path]):
        self.cfg = cfg
        self.profile = profile
        self.log_path = log_path
        self.greeted = False
        self.session: Optional[TeachingSession] = None
        self.pipeline: Optional[MeasurementPipeline] = None
        self.participant = "anonymous"
        self.day = 0
        self._session_count = 0

    # Every handler returns (messages to send, close_connection flag).

    def handle(self, msg: dict) -> tuple[list[dict], bool]:
        if not isinstance(msg, dict) or "type" not in msg:
            return [_error("BadMessage", "messages need a type field")], True
        mtype = msg["type"]
        if not self.greeted:
            if mtype != "hello":
                return [_error("BadHandshake", "first message must be hello")], True
            if str(msg.get("protocol_version")) != PROTOCOL_VERSION:
                return [_error(
                    "ProtocolMismatch",
                    f"server speaks protocol {PROTOCOL_VERSION}")], True
            self.greeted = True
            return [{"type": "phase", "phase": SessionPhase.IDLE.value}], False
        if mtype == "hello":
            return [_error("BadHandshake", "hello already received")], True
        if mtype == "start_session":
            return self._start_session(msg), False
        if mtype == "frame":
            return self._frame(msg), False
        if mtype == "end_attempt":
            return self._end_attempt(), False
        return [_error("UnknownType", f"unknown message type {mtype!r}")], True

    def _start_session(self, msg: dict) -> list[dict]:
        if self.session is not None and self.session.phase is not SessionPhase.COMPLETED:
            return [_error("InSession", "finish the current session first")]
        try:
            module = LearningModule(msg.get("module"))
            gesture = GestureKind(msg.get("gesture"))
            mode = ToleranceMode(msg.get("mode", "exact"))
        except ValueError as exc:
            return [_error("BadSession", str(exc))]
        goal = msg.get("goal")
        if goal is None and module is not LearningModule.FREE_EXPLORATION:
            return [_error("BadSession", f"{module.value} needs a goal")]
        self.participant = str(msg.get("participant", "anonymous"))
        self.day = int(msg.get("day", 0))

        self._session_count += 1
        session_id = f"s{self._session_count}"
        session = new_session(session_id, module, gesture, mode)
        out: list[dict] = []
        if goal is not None:
            try:
                session, events = session_step(session, StartGoal(goal=float(goal)))
            except (InvalidGoalError, IllegalTransitionError) as exc:
                self._session_count -= 1
                return [_error(exc.code, str(exc))]
            self.session = session
            out.append({"type": "session_started", "id": session_id,
                        "instructions": INSTRUCTIONS[gesture],
                        "profile": self.profile.to_json()})
            out.extend(_feedback(e) for e in events)
        else:
            self.session = session  # free exploration: first measurement sets the goal
            out.append({"type": "session_started", "id": session_id,
                        "instructions": INSTRUCTIONS[gesture],
                        "profile": self.profile.to_json()})
        self.pipeline = MeasurementPipeline(gesture, self.profile, self.cfg)
        out.append({"type": "phase", "phase": self.session.phase.value})
        return out

    def _frame(self, msg: dict) -> list[dict]:
        if self.session is None or self.pipeline is None:
            return [_error("NoSession", "start_session before streaming frames")]
        if self.session.phase is SessionPhase.COMPLETED:
            return [_error("SessionOver", "session already completed")]
        try:
            frame = decode_frame(msg.get("frame"))
        except ValueError as exc:
            return [_error("MalformedFrame", str(exc))]
        out = [_feedback(e) for e in self.pipeline.feed(frame)]
        if self.pipeline.result is not None:
            out.extend(self._measured(self.pipeline.result))
        return out

    def _measured(self, m: MeasurementResult) -> list[dict]:
        assert self.session is not None
        out: list[dict] = [{"type": "measurement", "measurement": m.to_json()}]

        if self.session.phase is SessionPhase.IDLE:
            # free exploration: the first value becomes the study goal
            session, events = run_free_exploration(m, id=self.session.id)
            self.session = session
            out.extend(_feedback(e) for e in events)
            out.append({"type": "phase", "phase": session.phase.value})
            self._rearm()
            return out

        was_trying = self.session.phase is SessionPhase.TRYING
        try:
            session, events = session_step(self.session, m)
        except IllegalTransitionError as exc:
            return out + [_error(exc.code, str(exc))]
        self.session = session
        out.extend(_feedback(e) for e in events)

        if was_trying:
            attempt = session.attempts[-1]
            result_msg: dict = {"type": "result", "passed": attempt.passed,
                                "signed_error": attempt.signed_error}
            if session.goal and session.goal > 0:
                result_msg["relative_error"] = relative_error(m.value, session.goal)
            out.append(result_msg)
        out.append({"type": "phase", "phase": session.phase.value})

        if session.phase is SessionPhase.COMPLETED:
            self._log_completed(session, m)
            self.pipeline = None
        else:
            self._rearm()
        return out

    def _rearm(self) -> None:
        """Fresh pipeline for the next attempt or correction sample."""
        assert self.session is not None
        self.pipeline = MeasurementPipeline(self.session.gesture, self.profile, self.cfg)

    def _end_attempt(self) -> list[dict]:
        if self.session is None:
            return [_error("NoSession", "no session to end an attempt in")]
        if self.session.phase is not SessionPhase.COMPLETED:
            self._rearm()
        return [{"type": "phase", "phase": self.session.phase.value}]

    def _log_completed(self, session: TeachingSession, m: MeasurementResult) -> None:
        if self.log_path is None or not session.goal or session.goal <= 0:
            return
        record = AssessmentRecord(
            participant=self.participant,
            day=self.day,
            gesture=session.gesture,
            task=session.goal,
            result=m.value,
            relative_error=relative_error(m.value, session.goal),
            t_ms=m.ended_ms,
        )
        append_session_log({"type": "assessment", **record.to_json()}, self.log_path)


def _error(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


def _feedback(event: FeedbackEvent) -> dict:
    return {"type": "feedback", "feedback": event.to_json()}


def create_app(cfg: Optional[EngineConfig] = None,
               profile: Optional[DeviceProfile] = None,
               log_path: Optional[Path] = None,
               static_dir: Optional[Path] = None) -> FastAPI:
    """Build the service app; cmd_serve and the tests both use this."""
    cfg = cfg or EngineConfig()
    profile = profile or DEFAULT_PROFILE
    app = FastAPI(title="anglesizer session service")
    started = time.monotonic()

    @app.get("/health")
    def health() -> dict:
        return {"protocol_version": PROTOCOL_VERSION,
                "uptime": time.monotonic() - started}

    @app.websocket("/session")
    async def session_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        conn = _Connection(cfg, profile, log_path)
        try:
            while True:
                try:
                    msg = await ws.receive_json()
                except (ValueError, KeyError):
                    await ws.send_json(_error("BadMessage", "frames must be JSON objects"))
                    break
                replies, close = conn.handle(msg)
                for reply in replies:
                    await ws.send_json(reply)
                if close:
                    break
            await ws.close()
        except WebSocketDisconnect:
            pass

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


__all__ = ["PROTOCOL_VERSION", "create_app"]
