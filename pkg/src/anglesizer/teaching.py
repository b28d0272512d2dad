"""Teaching state machine and learning modules.

One session teaches one goal through three phases: set a goal, try it
independently, and (outside ability assessment) correct with vibration
guidance until the feel is right, then try again. Sessions are immutable
values and session_step is a pure transition, so any event sequence replays
to identical states and feedback.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

from .core import (
    AngleSizerError,
    EngineConfig,
    FeedbackEvent,
    GestureKind,
    MeasurementResult,
    format_value,
)

VIBRATION_MS = 200
AMPLITUDE_CAP_TOLS = 4.0  # vibration saturates at this many tolerances of error


class InvalidGoalError(AngleSizerError):
    code = "InvalidGoal"


class IllegalTransitionError(AngleSizerError):
    code = "IllegalTransition"


class LengthMismatchError(AngleSizerError):
    code = "LengthMismatch"


class LearningModule(Enum):
    GUIDED_LEARNING = "guided_learning"
    FREE_EXPLORATION = "free_exploration"
    ABILITY_ASSESSMENT = "ability_assessment"


class SessionPhase(Enum):
    IDLE = "idle"
    GOAL_SET = "goal_set"
    TRYING = "trying"
    EVALUATING = "evaluating"
    CORRECTING = "correcting"
    COMPLETED = "completed"


class ToleranceMode(Enum):
    EXACT = "exact"
    TOLERANT = "tolerant"


@dataclass(frozen=True)
class Attempt:
    value: float
    signed_error: float
    passed: bool
    t_ms: int


@dataclass(frozen=True)
class StartGoal:
    goal: float
    t_ms: int = 0


@dataclass(frozen=True)
class Tick:
    t_ms: int = 0


SessionEvent = Union[StartGoal, Tick, MeasurementResult]


@dataclass(frozen=True)
class TeachingSession:
    id: str
    module: LearningModule
    gesture: GestureKind
    mode: ToleranceMode
    goal: Optional[float] = None
    tolerance: Optional[float] = None
    phase: SessionPhase = SessionPhase.IDLE
    attempts: tuple[Attempt, ...] = ()
    phase_history: tuple[SessionPhase, ...] = (SessionPhase.IDLE,)

    def _to(self, *phases: SessionPhase, **changes) -> "TeachingSession":
        return dataclasses.replace(
            self, phase=phases[-1],
            phase_history=self.phase_history + phases, **changes)


INSTRUCTIONS = {
    GestureKind.ONE_FINGER: (
        "Hold on for 3 seconds, and move your finger when the phone vibrates."),
    GestureKind.TWO_FINGERS: (
        "Place two fingers together on the screen, then open them to the goal."),
    GestureKind.ONE_HAND: (
        "Press and hold the screen, then move the phone the goal distance."),
    GestureKind.TWO_HANDS: (
        "Press and hold the screen and keep your palm in front of the camera."),
    GestureKind.BODY_ROTATION: (
        "Press and hold the screen, keep the phone flat, and turn your body."),
}

RETRY_SPEECH = "Remember this feeling, try again."


def new_session(id: str, module: LearningModule, gesture: GestureKind,
                mode: ToleranceMode = ToleranceMode.EXACT) -> TeachingSession:
    return TeachingSession(id=id, module=module, gesture=gesture, mode=mode)


def tolerance_for(goal: float, gesture: GestureKind, mode: ToleranceMode,
                  cfg: Optional[EngineConfig] = None) -> float:
    """Pass band for a goal: the resolution, widened to a fraction of the
    goal in tolerant mode."""
    cfg = cfg or EngineConfig()
    if goal <= 0:
        raise InvalidGoalError(f"goal must be positive, got {goal}")
    if mode is ToleranceMode.EXACT:
        return gesture.resolution
    return max(gesture.resolution, cfg.tolerance_rel * goal)


def evaluate_attempt(result: float, goal: float, tol: float) -> Attempt:
    """Signed error and pass/fail against a tolerance (t_ms filled by caller)."""
    if tol <= 0:
        raise InvalidGoalError(f"tolerance must be positive, got {tol}")
    signed = result - goal
    return Attempt(value=result, signed_error=signed, passed=abs(signed) <= tol, t_ms=0)


def correction_feedback(current: float, goal: float, tol: float,
                        gesture: GestureKind, t_ms: int = 0) -> list[FeedbackEvent]:
    """Guidance while outside tolerance: one vibration scaled to the error,
    plus speech pairing the current value with a direction."""
    error = abs(current - goal)
    amplitude = min(1.0, error / (AMPLITUDE_CAP_TOLS * tol))
    direction = _direction_phrase(current, goal, gesture)
    text = f"{format_value(current, gesture)} — {direction} {format_value(goal, gesture)}"
    return [
        FeedbackEvent.vibration(t_ms, amplitude=amplitude, duration_ms=VIBRATION_MS),
        FeedbackEvent.speech(t_ms, text),
    ]


def _direction_phrase(current: float, goal: float, gesture: GestureKind) -> str:
    if gesture is GestureKind.BODY_ROTATION:
        return "turn a little more to reach" if current < goal else "turn back a little toward"
    if gesture in (GestureKind.TWO_FINGERS, GestureKind.TWO_HANDS):
        return "open a little more to reach" if current < goal else "close a little toward"
    return "move a little more to reach" if current < goal else "come back a little toward"


def session_step(session: TeachingSession,
                 event: SessionEvent) -> tuple[TeachingSession, list[FeedbackEvent]]:
    """Pure state transition; returns the new session and feedback events.

    Raises IllegalTransitionError when the event is not legal in the current
    phase. Tick is legal everywhere and does nothing.
    """
    if isinstance(event, Tick):
        return session, []

    if isinstance(event, StartGoal):
        if session.phase is not SessionPhase.IDLE:
            raise IllegalTransitionError(
                f"StartGoal only legal in idle, session is {session.phase.value}")
        lo, hi = session.gesture.valid_range
        if not (lo <= event.goal <= hi):
            raise InvalidGoalError(
                f"goal {event.goal} outside {session.gesture.value} range [{lo}, {hi}]")
        tol = tolerance_for(event.goal, session.gesture, session.mode)
        updated = session._to(SessionPhase.GOAL_SET, SessionPhase.TRYING,
                              goal=event.goal, tolerance=tol)
        speech = FeedbackEvent.speech(event.t_ms, INSTRUCTIONS[session.gesture])
        return updated, [speech]

    # MeasurementResult
    if session.phase is SessionPhase.TRYING:
        return _step_trying(session, event)
    if session.phase is SessionPhase.CORRECTING:
        return _step_correcting(session, event)
    raise IllegalTransitionError(
        f"measurement not legal in phase {session.phase.value}")


def _step_trying(session: TeachingSession,
                 m: MeasurementResult) -> tuple[TeachingSession, list[FeedbackEvent]]:
    assert session.goal is not None and session.tolerance is not None
    attempt = dataclasses.replace(
        evaluate_attempt(m.value, session.goal, session.tolerance), t_ms=m.ended_ms)
    attempts = session.attempts + (attempt,)
    t = m.ended_ms

    if attempt.passed:
        updated = session._to(SessionPhase.EVALUATING, SessionPhase.COMPLETED,
                              attempts=attempts)
        events = [
            FeedbackEvent.beep_correct(t),
            FeedbackEvent.speech(t, f"Goal reached: {format_value(m.value, session.gesture)}."),
        ]
        return updated, events

    if session.module is LearningModule.ABILITY_ASSESSMENT:
        # scored module: record the miss and finish, no correction phase
        updated = session._to(SessionPhase.EVALUATING, SessionPhase.COMPLETED,
                              attempts=attempts)
        events = [
            FeedbackEvent.beep_error(t),
            FeedbackEvent.speech(t, f"Recorded {format_value(m.value, session.gesture)}."),
        ]
        return updated, events

    updated = session._to(SessionPhase.EVALUATING, SessionPhase.CORRECTING,
                          attempts=attempts)
    events = correction_feedback(m.value, session.goal, session.tolerance,
                                 session.gesture, t_ms=t)
    return updated, events


def _step_correcting(session: TeachingSession,
                     m: MeasurementResult) -> tuple[TeachingSession, list[FeedbackEvent]]:
    assert session.goal is not None and session.tolerance is not None
    t = m.ended_ms
    if abs(m.value - session.goal) <= session.tolerance:
        updated = session._to(SessionPhase.TRYING)
        events = [FeedbackEvent.beep_correct(t), FeedbackEvent.speech(t, RETRY_SPEECH)]
        return updated, events
    events = correction_feedback(m.value, session.goal, session.tolerance,
                                 session.gesture, t_ms=t)
    return session._to(SessionPhase.CORRECTING), events


def run_free_exploration(measurement: MeasurementResult, id: str = "free",
                         mode: ToleranceMode = ToleranceMode.TOLERANT
                         ) -> tuple[TeachingSession, list[FeedbackEvent]]:
    """Turn a spontaneous measurement into a study goal.

    The measured value is announced first, then a session starts in the
    trying phase with that value as its goal.
    """
    value = measurement.value
    gesture = measurement.gesture
    announce = FeedbackEvent.speech(
        measurement.ended_ms, f"You made {format_value(value, gesture)}.")
    if value <= 0:
        # nothing to practice from a zero measurement; leave the session idle
        session = new_session(id, LearningModule.FREE_EXPLORATION, gesture, mode)
        return session, [announce]
    tol = tolerance_for(value, gesture, mode)
    session = TeachingSession(
        id=id, module=LearningModule.FREE_EXPLORATION, gesture=gesture, mode=mode,
        goal=value, tolerance=tol, phase=SessionPhase.TRYING,
        phase_history=(SessionPhase.IDLE, SessionPhase.GOAL_SET, SessionPhase.TRYING),
    )
    return session, [announce]


# --- assessment over a task list ---------------------------------------------

@dataclass(frozen=True)
class AssessmentRecord:
    participant: str
    day: int
    gesture: GestureKind
    task: float
    result: float
    relative_error: float
    t_ms: int

    def to_json(self) -> dict:
        return {
            "participant": self.participant,
            "day": self.day,
            "gesture": self.gesture.value,
            "task": self.task,
            "result": self.result,
            "relative_error": self.relative_error,
            "t_ms": self.t_ms,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AssessmentRecord":
        return cls(
            participant=str(obj["participant"]),
            day=int(obj["day"]),
            gesture=GestureKind(obj["gesture"]),
            task=float(obj["task"]),
            result=float(obj["result"]),
            relative_error=float(obj["relative_error"]),
            t_ms=int(obj["t_ms"]),
        )


# the bundled default task set: four sizes per gesture within daily-life range
DEFAULT_TASKS: tuple[tuple[GestureKind, float], ...] = (
    (GestureKind.ONE_FINGER, 1.0),
    (GestureKind.ONE_FINGER, 2.0),
    (GestureKind.ONE_FINGER, 4.0),
    (GestureKind.ONE_FINGER, 8.0),
    (GestureKind.TWO_FINGERS, 3.0),
    (GestureKind.TWO_FINGERS, 5.0),
    (GestureKind.TWO_FINGERS, 6.0),
    (GestureKind.TWO_FINGERS, 7.0),
    (GestureKind.ONE_HAND, 25.0),
    (GestureKind.ONE_HAND, 35.0),
    (GestureKind.ONE_HAND, 70.0),
    (GestureKind.ONE_HAND, 100.0),
    (GestureKind.TWO_HANDS, 45.0),
    (GestureKind.TWO_HANDS, 65.0),
    (GestureKind.TWO_HANDS, 85.0),
    (GestureKind.TWO_HANDS, 100.0),
    (GestureKind.BODY_ROTATION, 30.0),
    (GestureKind.BODY_ROTATION, 45.0),
    (GestureKind.BODY_ROTATION, 60.0),
    (GestureKind.BODY_ROTATION, 120.0),
)


def run_assessment(tasks: Sequence[tuple[GestureKind, float]],
                   measurements: Sequence[MeasurementResult],
                   participant: str, day: int) -> list[AssessmentRecord]:
    """Score measurements against tasks, index-aligned. No corrective feedback."""
    from .analytics import relative_error  # local import avoids a cycle

    if len(tasks) != len(measurements):
        raise LengthMismatchError(
            f"{len(tasks)} tasks but {len(measurements)} measurements")
    records = []
    for (gesture, task_value), m in zip(tasks, measurements):
        records.append(AssessmentRecord(
            participant=participant,
            day=day,
            gesture=gesture,
            task=task_value,
            result=m.value,
            relative_error=relative_error(m.value, task_value),
            t_ms=m.ended_ms,
        ))
    return records


def load_tasks(path) -> list[tuple[GestureKind, float]]:
    """Read a task-list JSON file: an ordered array of {gesture, value}."""
    import json
    from pathlib import Path

    obj = json.loads(Path(path).read_text())
    if not isinstance(obj, list):
        raise InvalidGoalError("task file must be a JSON array")
    tasks = []
    for i, entry in enumerate(obj):
        try:
            gesture = GestureKind(entry["gesture"])
            value = float(entry["value"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidGoalError(f"bad task at index {i}: {exc}") from exc
        lo, hi = gesture.valid_range
        if not (lo <= value <= hi):
            raise InvalidGoalError(
                f"task {i} value {value} outside {gesture.value} range")
        tasks.append((gesture, value))
    return tasks


__all__ = [
    "InvalidGoalError",
    "IllegalTransitionError",
    "LengthMismatchError",
    "LearningModule",
    "SessionPhase",
    "ToleranceMode",
    "Attempt",
    "StartGoal",
    "Tick",
    "SessionEvent",
    "TeachingSession",
    "INSTRUCTIONS",
    "RETRY_SPEECH",
    "new_session",
    "tolerance_for",
    "evaluate_attempt",
    "correction_feedback",
    "session_step",
    "run_free_exploration",
    "AssessmentRecord",
    "DEFAULT_TASKS",
    "run_assessment",
    "load_tasks",
]
