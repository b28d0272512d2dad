"""Frame-by-frame measurement pipeline.

Each frame goes through validity checking, a per-gesture scale computation,
and a stability check; once the recent estimates settle, the value is
finalized (jitter-reduced mean), rounded to the gesture's resolution,
range-clipped, and announced with a beep and speech event.

The pipeline is strictly single-threaded and deterministic: the same frames
and config always produce the same result and the same feedback events.
"""
from __future__ import annotations

import math
from enum import Enum
from statistics import fmean
from typing import Optional, Sequence

from .core import (
    AngleSizerError,
    DeviceProfile,
    EngineConfig,
    FeedbackEvent,
    GestureKind,
    InvalidProfileError,
    InvalidValueError,
    MeasurementResult,
    Orientation,
    Palm,
    Pose,
    Press,
    SensorFrame,
    Touch,
    TouchPhase,
    WarningCode,
    WarningNote,
    format_value,
    round_to_resolution,
    validate_frame,
    validate_range,
)
from .traceio import TraceDocument

Vec3 = tuple[float, float, float]


class InvalidObservationError(AngleSizerError):
    code = "InvalidObservation"


class InsufficientHistoryError(AngleSizerError):
    code = "InsufficientHistory"


class MeasurementFailure(AngleSizerError):
    """Raised when a trace yields no measurement; carries partial diagnostics."""

    def __init__(self, message: str, *, frames_processed: int = 0,
                 estimates: Sequence[float] = (), warnings: Sequence[WarningNote] = ()):
        super().__init__(message)
        self.frames_processed = frames_processed
        self.estimates = tuple(estimates)
        self.warnings = tuple(warnings)


class NoActivationError(MeasurementFailure):
    code = "NoActivation"


class NeverStableError(MeasurementFailure):
    code = "NeverStable"


# --- unit conversions and geometric primitives -------------------------------

def px_to_cm(px: float, dpi: float) -> float:
    """Convert a pixel count to centimeters using the screen's DPI."""
    if dpi <= 0:
        raise InvalidProfileError(f"dpi must be positive, got {dpi}")
    return px / dpi * 2.54


def touch_span_cm(a: tuple[float, float], b: tuple[float, float],
                  profile: DeviceProfile) -> float:
    """Euclidean on-screen distance between two contact points, per-axis DPI."""
    dx_cm = px_to_cm(b[0] - a[0], profile.dpi_x)
    dy_cm = px_to_cm(b[1] - a[1], profile.dpi_y)
    return math.hypot(dx_cm, dy_cm)


def clamp_delta(delta: Vec3, theta: float) -> Vec3:
    """Cap a per-frame position change at magnitude theta, keeping direction.

    Counteracts single-frame coordinate leaps from tracking resets; genuine
    hand motion at sane frame rates never reaches the threshold.
    """
    if theta <= 0:
        raise InvalidValueError(f"theta must be positive, got {theta}")
    mag = math.sqrt(delta[0] ** 2 + delta[1] ** 2 + delta[2] ** 2)
    if mag <= theta:
        return delta
    scale = theta / mag
    return (delta[0] * scale, delta[1] * scale, delta[2] * scale)


def one_hand_track(positions: Sequence[Vec3], cfg: EngineConfig) -> tuple[
        list[Vec3], list[float], list[int]]:
    """Reconstruct a position track with clamped per-frame deltas.

    Returns (filtered positions, per-frame distance-from-start estimates in
    cm, indices where clamping fired). A huge clamp_theta_m reduces this to
    the raw track, which is how an unclamped baseline is computed.
    """
    if len(positions) < 2:
        raise InsufficientHistoryError("need at least 2 pose frames")
    filtered: list[Vec3] = [tuple(positions[0])]  # type: ignore[list-item]
    estimates: list[float] = [0.0]
    clamped_at: list[int] = []
    prev_raw = positions[0]
    for i, p in enumerate(positions[1:], start=1):
        delta = (p[0] - prev_raw[0], p[1] - prev_raw[1], p[2] - prev_raw[2])
        if math.sqrt(delta[0] ** 2 + delta[1] ** 2 + delta[2] ** 2) > cfg.clamp_theta_m:
            clamped_at.append(i)
        limited = clamp_delta(delta, cfg.clamp_theta_m)
        last = filtered[-1]
        cur = (last[0] + limited[0], last[1] + limited[1], last[2] + limited[2])
        filtered.append(cur)
        estimates.append(_dist3(cur, filtered[0]) * 100.0)
        prev_raw = p
    return filtered, estimates, clamped_at


def _dist3(a: Vec3, b: Vec3) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def palm_distance_cm(width_px: float, profile: DeviceProfile) -> float:
    """Pinhole ranging: distance = focal_px * palm_width_cm / observed width."""
    if width_px <= 0:
        raise InvalidObservationError(f"palm width_px must be positive, got {width_px}")
    return profile.focal_px * profile.palm_width_cm / width_px


def palm_parallelism_ok(arch_depths: Sequence[float], wrist_depth: float,
                        width_px: float, cfg: EngineConfig) -> bool:
    """True when the knuckle-row depth spread stays within the tilt threshold.

    Depths are relative to the wrist already; the spread is normalized by the
    observed palm width so the check is distance-invariant. Boundary value is
    accepted.
    """
    if len(arch_depths) < 3:
        raise InvalidObservationError("need at least 3 arch depth values")
    if width_px <= 0:
        raise InvalidObservationError(f"palm width_px must be positive, got {width_px}")
    spread = (max(arch_depths) - min(arch_depths)) / width_px
    return spread <= cfg.palm_arch_spread_max


def phone_parallel_ok(pitch_deg: float, roll_deg: float, cfg: EngineConfig) -> bool:
    """True when the phone is close enough to parallel with the ground."""
    return max(abs(pitch_deg), abs(roll_deg)) <= cfg.parallel_max_deg


def wrap_delta(prev_yaw_deg: float, cur_yaw_deg: float) -> float:
    """Shortest signed yaw difference in (-180, 180]; an exact half turn is +180."""
    d = (cur_yaw_deg - prev_yaw_deg) % 360.0
    if d > 180.0:
        d -= 360.0
    return d


def accumulate_rotation(yaw_samples: Sequence[float]) -> float:
    """Signed total rotation: sum of shortest per-step differences.

    Counts full turns instead of collapsing them, and is unaffected by the
    0/360 seam.
    """
    if not yaw_samples:
        raise InsufficientHistoryError("need at least 1 yaw sample")
    total = 0.0
    for prev, cur in zip(yaw_samples, yaw_samples[1:]):
        total += wrap_delta(prev, cur)
    return total


def stability_reached(estimates: Sequence[float], gesture: GestureKind,
                      cfg: EngineConfig) -> bool:
    """True when the last window of estimates spans no more than the band."""
    n = cfg.stability_window_frames
    if len(estimates) < n:
        return False
    window = estimates[-n:]
    return (max(window) - min(window)) <= cfg.eps_for(gesture)


def finalize_value(estimates: Sequence[float], cfg: EngineConfig) -> float:
    """Jitter reduction: mean of the trailing finalize_k_frames estimates."""
    k = cfg.finalize_k_frames
    if len(estimates) < k:
        raise InsufficientHistoryError(
            f"need {k} estimates to finalize, have {len(estimates)}"
        )
    return fmean(estimates[-k:])


# --- the pipeline -------------------------------------------------------------

class PipelinePhase(Enum):
    ARMED = "armed"
    RUNNING = "running"
    STABLE = "stable"


class MeasurementPipeline:
    """Incremental per-gesture measurement over a sensor frame stream.

    Feed frames one at a time (the session service does exactly that); each
    call returns the feedback events the frame produced. `result` is set once
    the stability check passes; later frames are ignored.
    """

    def __init__(self, gesture: GestureKind, profile: DeviceProfile,
                 cfg: Optional[EngineConfig] = None):
        self.gesture = gesture
        self.profile = profile
        self.cfg = cfg or EngineConfig()
        self.phase = PipelinePhase.ARMED
        self.estimates: list[float] = []
        self.warnings: list[WarningNote] = []
        self.events: list[FeedbackEvent] = []
        self.result: Optional[MeasurementResult] = None
        self.started_ms: Optional[int] = None
        self.ended_ms: Optional[int] = None
        self.frames_processed = 0
        self.accumulated_yaw_deg = 0.0  # signed diagnostic for rotation
        self._last_t: Optional[int] = None
        self._pressed = False
        # touch state
        self._touch_anchor: Optional[tuple[float, float]] = None
        self._touch_id: Optional[int] = None
        self._touch_done = False
        # pose state
        self._pose_prev: Optional[Vec3] = None
        self._pose_recon: Optional[Vec3] = None
        self._pose_anchor: Optional[Vec3] = None
        # palm state
        self._palm_visible: Optional[bool] = None
        self._palm_tilted = False
        # orientation state
        self._yaw_prev: Optional[float] = None
        self._phone_tilted = False

    def feed(self, frame: SensorFrame) -> list[FeedbackEvent]:
        """Process one frame; returns the feedback events it emitted."""
        if self.phase is PipelinePhase.STABLE:
            return []
        start = len(self.events)
        problems = validate_frame(frame, self.profile)
        if self._last_t is not None and frame.t_ms <= self._last_t:
            problems.append(f"t_ms {frame.t_ms} not after {self._last_t}")
        if problems:
            # transient sensor garbage: skip the frame, keep the session alive
            self.warnings.append(WarningNote(WarningCode.INVALID_FRAME, frame.t_ms))
            return []
        self._last_t = frame.t_ms
        self.frames_processed += 1

        payload = frame.payload
        if isinstance(payload, Press):
            self._pressed = payload.pressed
            return self.events[start:]

        estimate = self._estimate(frame)
        if estimate is not None:
            if self.phase is PipelinePhase.ARMED:
                self.phase = PipelinePhase.RUNNING
                self.started_ms = frame.t_ms
            self.estimates.append(estimate)
            self._maybe_finalize(frame.t_ms)
        return self.events[start:]

    # estimate computation per gesture; None = frame carries no estimate

    def _estimate(self, frame: SensorFrame) -> Optional[float]:
        payload = frame.payload
        if self.gesture is GestureKind.ONE_FINGER and isinstance(payload, Touch):
            return self._one_finger(payload)
        if self.gesture is GestureKind.TWO_FINGERS and isinstance(payload, Touch):
            return self._two_fingers(payload)
        if self.gesture is GestureKind.ONE_HAND and isinstance(payload, Pose):
            return self._one_hand(payload, frame.t_ms)
        if self.gesture is GestureKind.TWO_HANDS and isinstance(payload, Palm):
            return self._two_hands(payload, frame.t_ms)
        if self.gesture is GestureKind.BODY_ROTATION and isinstance(payload, Orientation):
            return self._body_rotation(payload, frame.t_ms)
        return None

    def _one_finger(self, touch: Touch) -> Optional[float]:
        if self._touch_done:
            return None
        if self._touch_anchor is None:
            if len(touch.contacts) == 1 and touch.contacts[0].phase is TouchPhase.DOWN:
                c = touch.contacts[0]
                self._touch_anchor = (c.x_px, c.y_px)
                self._touch_id = c.id
                return 0.0
            return None
        contact = next((c for c in touch.contacts if c.id == self._touch_id), None)
        if contact is None:
            return None
        if contact.phase is TouchPhase.UP:
            self._touch_done = True
        return touch_span_cm(self._touch_anchor, (contact.x_px, contact.y_px),
                             self.profile)

    def _two_fingers(self, touch: Touch) -> Optional[float]:
        if len(touch.contacts) != 2:
            return None
        a, b = touch.contacts
        return touch_span_cm((a.x_px, a.y_px), (b.x_px, b.y_px), self.profile)

    def _one_hand(self, pose: Pose, t_ms: int) -> Optional[float]:
        if not self._pressed:
            return None
        p = pose.position_m
        if self._pose_prev is None:
            self._pose_prev = p
            self._pose_recon = p
            self._pose_anchor = p
            return 0.0
        delta = (p[0] - self._pose_prev[0], p[1] - self._pose_prev[1],
                 p[2] - self._pose_prev[2])
        if math.sqrt(delta[0] ** 2 + delta[1] ** 2 + delta[2] ** 2) > self.cfg.clamp_theta_m:
            self.warnings.append(WarningNote(WarningCode.DELTA_CLAMPED, t_ms))
        limited = clamp_delta(delta, self.cfg.clamp_theta_m)
        r = self._pose_recon
        assert r is not None and self._pose_anchor is not None
        self._pose_recon = (r[0] + limited[0], r[1] + limited[1], r[2] + limited[2])
        self._pose_prev = p
        return _dist3(self._pose_recon, self._pose_anchor) * 100.0

    def _two_hands(self, palm: Palm, t_ms: int) -> Optional[float]:
        if not self._pressed:
            return None
        if palm.detected != self._palm_visible:
            # beep on visibility transitions so the user can re-aim the palm
            if palm.detected:
                self.events.append(FeedbackEvent.beep_correct(t_ms))
            else:
                self.events.append(FeedbackEvent.beep_error(t_ms))
            self._palm_visible = palm.detected
        if not palm.detected:
            return None
        assert palm.width_px is not None and palm.arch_depths is not None
        tilted = not palm_parallelism_ok(palm.arch_depths, palm.wrist_depth or 0.0,
                                         palm.width_px, self.cfg)
        if tilted:
            self.warnings.append(WarningNote(WarningCode.PALM_NOT_PARALLEL, t_ms))
            if not self._palm_tilted:
                self.events.append(FeedbackEvent.beep_error(t_ms))
        self._palm_tilted = tilted
        return palm_distance_cm(palm.width_px, self.profile)

    def _body_rotation(self, orientation: Orientation, t_ms: int) -> Optional[float]:
        if not self._pressed:
            return None
        tilted = not phone_parallel_ok(orientation.pitch_deg, orientation.roll_deg,
                                       self.cfg)
        if tilted:
            self.warnings.append(WarningNote(WarningCode.PHONE_NOT_PARALLEL, t_ms))
            if not self._phone_tilted:
                self.events.append(FeedbackEvent.beep_error(t_ms))
        self._phone_tilted = tilted
        if self._yaw_prev is None:
            self._yaw_prev = orientation.yaw_deg
            return 0.0
        self.accumulated_yaw_deg += wrap_delta(self._yaw_prev, orientation.yaw_deg)
        self._yaw_prev = orientation.yaw_deg
        return abs(self.accumulated_yaw_deg)

    def _maybe_finalize(self, t_ms: int) -> None:
        # len >= 2 keeps ended_ms strictly after started_ms even for tiny windows
        if len(self.estimates) < 2:
            return
        if not stability_reached(self.estimates, self.gesture, self.cfg):
            return
        raw = finalize_value(self.estimates, self.cfg)
        rounded = round_to_resolution(raw, self.gesture)
        outcome, value = validate_range(rounded, self.gesture)
        if outcome == "clipped":
            self.warnings.append(WarningNote(WarningCode.RANGE_CLIPPED, t_ms))
        assert self.started_ms is not None
        self.ended_ms = t_ms
        self.phase = PipelinePhase.STABLE
        self.result = MeasurementResult(
            gesture=self.gesture,
            value=value,
            raw_value=raw,
            started_ms=self.started_ms,
            ended_ms=t_ms,
            frames_processed=self.frames_processed,
            warnings=tuple(self.warnings),
        )
        self.events.append(FeedbackEvent.beep_correct(t_ms))
        self.events.append(FeedbackEvent.speech(t_ms, format_value(value, self.gesture)))

    def finish(self) -> MeasurementResult:
        """Return the result, or raise with partial diagnostics."""
        if self.result is not None:
            return self.result
        if self.phase is PipelinePhase.ARMED:
            raise NoActivationError(
                f"{self.gesture.value} preconditions never met in trace",
                frames_processed=self.frames_processed,
                warnings=self.warnings,
            )
        raise NeverStableError(
            f"trace ended after {len(self.estimates)} estimates without stabilizing",
            frames_processed=self.frames_processed,
            estimates=self.estimates,
            warnings=self.warnings,
        )


def run_measurement(trace: TraceDocument, gesture: GestureKind,
                    cfg: Optional[EngineConfig] = None) -> tuple[
                        MeasurementResult, list[FeedbackEvent]]:
    """Run the whole pipeline over a trace.

    Returns (result, feedback events). Raises NoActivationError when the
    gesture's preconditions are never met, NeverStableError when the trace
    ends before the stability check passes.
    """
    pipeline = MeasurementPipeline(gesture, trace.profile, cfg)
    for frame in trace.frames:
        pipeline.feed(frame)
    result = pipeline.finish()
    return result, pipeline.events


__all__ = [
    "InvalidObservationError",
    "InsufficientHistoryError",
    "MeasurementFailure",
    "NoActivationError",
    "NeverStableError",
    "px_to_cm",
    "touch_span_cm",
    "clamp_delta",
    "one_hand_track",
    "palm_distance_cm",
    "palm_parallelism_ok",
    "phone_parallel_ok",
    "wrap_delta",
    "accumulate_rotation",
    "stability_reached",
    "finalize_value",
    "PipelinePhase",
    "MeasurementPipeline",
    "run_measurement",
]
