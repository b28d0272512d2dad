"""Shared domain types: gestures, device calibration, sensor frames, config,
measurement results and feedback events.

Everything in here is an immutable value; instances can be shared freely.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import Optional, Union


class AngleSizerError(Exception):
    """Base error; `code` is the stable machine-readable identifier."""

    code = "Error"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details


class InvalidValueError(AngleSizerError):
    code = "InvalidValue"


class InvalidProfileError(AngleSizerError):
    code = "InvalidProfile"


class InvalidConfigError(AngleSizerError):
    code = "InvalidConfig"


# --- gestures ---------------------------------------------------------------

class GestureKind(Enum):
    ONE_FINGER = "one_finger"
    TWO_FINGERS = "two_fingers"
    ONE_HAND = "one_hand"
    TWO_HANDS = "two_hands"
    BODY_ROTATION = "body_rotation"

    @property
    def unit(self) -> str:
        return _GESTURE_SPECS[self].unit

    @property
    def valid_range(self) -> tuple[float, float]:
        spec = _GESTURE_SPECS[self]
        return (spec.lo, spec.hi)

    @property
    def resolution(self) -> float:
        return _GESTURE_SPECS[self].resolution

    @property
    def is_distance(self) -> bool:
        return self is not GestureKind.BODY_ROTATION


@dataclass(frozen=True)
class _GestureSpec:
    unit: str
    lo: float
    hi: float
    resolution: float


_GESTURE_SPECS = {
    GestureKind.ONE_FINGER: _GestureSpec("cm", 0.0, 12.0, 0.1),
    GestureKind.TWO_FINGERS: _GestureSpec("cm", 0.0, 12.0, 0.1),
    GestureKind.ONE_HAND: _GestureSpec("cm", 0.0, 120.0, 1.0),
    GestureKind.TWO_HANDS: _GestureSpec("cm", 0.0, 120.0, 1.0),
    GestureKind.BODY_ROTATION: _GestureSpec("deg", 0.0, 360.0, 1.0),
}


def round_to_resolution(raw: float, gesture: GestureKind) -> float:
    """Round to the gesture's reporting resolution, halves away from zero."""
    if not math.isfinite(raw):
        raise InvalidValueError(f"cannot round non-finite value {raw!r}")
    res = Decimal(repr(gesture.resolution))
    steps = (Decimal(repr(raw)) / res).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return float(steps * res)


def validate_range(value: float, gesture: GestureKind) -> tuple[str, float]:
    """Check a value against the gesture's valid range.

    Returns ("within", value) when inside, ("clipped", boundary) otherwise.
    """
    if not math.isfinite(value):
        raise InvalidValueError(f"cannot range-check non-finite value {value!r}")
    lo, hi = gesture.valid_range
    if value < lo:
        return ("clipped", lo)
    if value > hi:
        return ("clipped", hi)
    return ("within", value)


def format_value(value: float, gesture: GestureKind) -> str:
    """Human-readable value at the gesture's resolution, e.g. "6.4 centimeters"."""
    if gesture.resolution < 1.0:
        num = f"{value:.1f}"
    else:
        num = f"{value:.0f}"
    unit = "degrees" if gesture.unit == "deg" else "centimeters"
    return f"{num} {unit}"


# --- device calibration -----------------------------------------------------

PALM_WIDTH_BAND_CM = (5.0, 15.0)


@dataclass(frozen=True)
class DeviceProfile:
    """Per-device calibration used by the measurement pipelines."""

    dpi_x: float
    dpi_y: float
    screen_w_px: float
    screen_h_px: float
    palm_width_cm: float
    focal_px: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidProfileError(f"{f.name} must be strictly positive, got {v!r}")
        lo, hi = PALM_WIDTH_BAND_CM
        if not (lo <= self.palm_width_cm <= hi):
            raise InvalidProfileError(
                f"palm_width_cm {self.palm_width_cm} outside plausible band [{lo}, {hi}]"
            )

    def to_json(self) -> dict:
        return {
            "dpi_x": self.dpi_x,
            "dpi_y": self.dpi_y,
            "screen_w_px": self.screen_w_px,
            "screen_h_px": self.screen_h_px,
            "palm_width_cm": self.palm_width_cm,
            "focal_px": self.focal_px,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DeviceProfile":
        if not isinstance(obj, dict):
            raise InvalidProfileError("profile must be an object")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise InvalidProfileError(f"unknown profile keys: {sorted(unknown)}")
        missing = known - set(obj)
        if missing:
            raise InvalidProfileError(f"missing profile keys: {sorted(missing)}")
        return cls(**{k: float(obj[k]) for k in known})


DEFAULT_PROFILE = DeviceProfile(
    dpi_x=160.0,
    dpi_y=160.0,
    screen_w_px=1080.0,
    screen_h_px=1920.0,
    palm_width_cm=8.0,
    focal_px=500.0,
)


# --- sensor frames ----------------------------------------------------------

class TouchPhase(Enum):
    DOWN = "down"
    MOVE = "move"
    UP = "up"


@dataclass(frozen=True)
class TouchContact:
    id: int
    x_px: float
    y_px: float
    phase: TouchPhase


@dataclass(frozen=True)
class Touch:
    contacts: tuple[TouchContact, ...]


@dataclass(frozen=True)
class Pose:
    position_m: tuple[float, float, float]
    orientation_q: tuple[float, float, float, float]  # (w, x, y, z)


@dataclass(frozen=True)
class Orientation:
    yaw_deg: float
    pitch_deg: float
    roll_deg: float


@dataclass(frozen=True)
class Palm:
    detected: bool
    width_px: Optional[float] = None
    arch_depths: Optional[tuple[float, ...]] = None
    wrist_depth: Optional[float] = None


@dataclass(frozen=True)
class Press:
    pressed: bool


Payload = Union[Touch, Pose, Orientation, Palm, Press]

_PAYLOAD_KEYS = {"touch": Touch, "pose": Pose, "orientation": Orientation,
                 "palm": Palm, "press": Press}


@dataclass(frozen=True)
class SensorFrame:
    t_ms: int
    payload: Payload

    def to_json(self) -> dict:
        obj: dict = {"t_ms": self.t_ms}
        p = self.payload
        if isinstance(p, Touch):
            obj["touch"] = {"contacts": [
                {"id": c.id, "x_px": c.x_px, "y_px": c.y_px, "phase": c.phase.value}
                for c in p.contacts
            ]}
        elif isinstance(p, Pose):
            obj["pose"] = {"position_m": list(p.position_m),
                           "orientation_q": list(p.orientation_q)}
        elif isinstance(p, Orientation):
            obj["orientation"] = {"yaw_deg": p.yaw_deg, "pitch_deg": p.pitch_deg,
                                  "roll_deg": p.roll_deg}
        elif isinstance(p, Palm):
            palm: dict = {"detected": p.detected}
            if p.detected:
                palm["width_px"] = p.width_px
                palm["arch_depths"] = list(p.arch_depths or ())
                palm["wrist_depth"] = p.wrist_depth
            obj["palm"] = palm
        elif isinstance(p, Press):
            obj["press"] = {"pressed": p.pressed}
        else:  # pragma: no cover - payload union is closed
            raise TypeError(f"unknown payload {p!r}")
        return obj


QUATERNION_NORM_TOL = 1e-6
MAX_TOUCH_CONTACTS = 2


def decode_frame(obj: dict) -> SensorFrame:
    """Build a SensorFrame from its JSON object (structure only).

    Raises ValueError on schema violations; semantic checks (contact count,
    screen bounds, quaternion norm) live in validate_frame.
    """
    if not isinstance(obj, dict):
        raise ValueError("frame must be an object")
    if "t_ms" not in obj:
        raise ValueError("frame missing t_ms")
    t_ms = obj["t_ms"]
    if not isinstance(t_ms, int) or isinstance(t_ms, bool) or t_ms < 0:
        raise ValueError(f"t_ms must be a non-negative integer, got {t_ms!r}")
    payload_keys = [k for k in obj if k in _PAYLOAD_KEYS]
    extra = [k for k in obj if k != "t_ms" and k not in _PAYLOAD_KEYS]
    if extra:
        raise ValueError(f"unknown frame keys: {sorted(extra)}")
    if len(payload_keys) != 1:
        raise ValueError(f"frame must carry exactly one payload key, got {payload_keys}")
    key = payload_keys[0]
    body = obj[key]
    if not isinstance(body, dict):
        raise ValueError(f"{key} payload must be an object")
    try:
        if key == "touch":
            contacts = tuple(
                TouchContact(id=int(c["id"]), x_px=float(c["x_px"]),
                             y_px=float(c["y_px"]), phase=TouchPhase(c["phase"]))
                for c in body["contacts"]
            )
            payload: Payload = Touch(contacts=contacts)
        elif key == "pose":
            pos = tuple(float(v) for v in body["position_m"])
            quat = tuple(float(v) for v in body["orientation_q"])
            if len(pos) != 3 or len(quat) != 4:
                raise ValueError("pose needs a 3-vector position and 4-vector quaternion")
            payload = Pose(position_m=pos, orientation_q=quat)  # type: ignore[arg-type]
        elif key == "orientation":
            payload = Orientation(yaw_deg=float(body["yaw_deg"]),
                                  pitch_deg=float(body["pitch_deg"]),
                                  roll_deg=float(body["roll_deg"]))
        elif key == "palm":
            detected = bool(body["detected"])
            if detected:
                payload = Palm(detected=True, width_px=float(body["width_px"]),
                               arch_depths=tuple(float(v) for v in body["arch_depths"]),
                               wrist_depth=float(body["wrist_depth"]))
            else:
                payload = Palm(detected=False)
        else:
            payload = Press(pressed=bool(body["pressed"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed {key} payload: {exc}") from exc
    return SensorFrame(t_ms=t_ms, payload=payload)


def validate_frame(frame: SensorFrame, profile: DeviceProfile) -> list[str]:
    """Semantic frame checks; returns human-readable violations (empty = valid)."""
    problems: list[str] = []
    p = frame.payload
    if isinstance(p, Touch):
        if len(p.contacts) > MAX_TOUCH_CONTACTS:
            problems.append(f"{len(p.contacts)} touch contacts (max {MAX_TOUCH_CONTACTS})")
        for c in p.contacts:
            if not (0.0 <= c.x_px <= profile.screen_w_px
                    and 0.0 <= c.y_px <= profile.screen_h_px):
                problems.append(f"contact {c.id} at ({c.x_px}, {c.y_px}) off screen")
    elif isinstance(p, Pose):
        if any(not math.isfinite(v) for v in p.position_m):
            problems.append("non-finite position")
        norm = math.sqrt(sum(v * v for v in p.orientation_q))
        if abs(norm - 1.0) > QUATERNION_NORM_TOL:
            problems.append(f"quaternion norm {norm} not unit")
    elif isinstance(p, Orientation):
        if not (0.0 <= p.yaw_deg < 360.0):
            problems.append(f"yaw {p.yaw_deg} outside [0, 360)")
        if not (-90.0 <= p.pitch_deg <= 90.0):
            problems.append(f"pitch {p.pitch_deg} outside [-90, 90]")
        if not (-180.0 < p.roll_deg <= 180.0):
            problems.append(f"roll {p.roll_deg} outside (-180, 180]")
    elif isinstance(p, Palm):
        if p.detected:
            if p.width_px is None or p.width_px <= 0:
                problems.append(f"palm width_px {p.width_px} not positive")
            if p.arch_depths is None or len(p.arch_depths) < 3:
                problems.append("palm needs at least 3 arch depth values")
            if p.wrist_depth is None:
                problems.append("palm missing wrist_depth")
    return problems


# --- engine configuration ---------------------------------------------------

@dataclass(frozen=True)
class StabilityBands:
    """Stability tolerance per gesture family, in the gesture's unit."""

    finger_cm: float = 0.05
    hand_cm: float = 1.0
    rotation_deg: float = 1.0


@dataclass(frozen=True)
class EngineConfig:
    clamp_theta_m: float = 0.20
    stability_window_frames: int = 15
    stability_eps: StabilityBands = field(default_factory=StabilityBands)
    finalize_k_frames: int = 10
    parallel_max_deg: float = 10.0
    palm_arch_spread_max: float = 0.15
    hold_to_start_ms: int = 3000
    tolerance_rel: float = 0.05
    frame_rate_hz: float = 30.0
    # free-exploration activation liveness floors
    activation_move_cm: float = 2.0
    activation_yaw_deg: float = 2.0

    def __post_init__(self):
        positives = [
            ("clamp_theta_m", self.clamp_theta_m),
            ("stability_window_frames", self.stability_window_frames),
            ("finalize_k_frames", self.finalize_k_frames),
            ("parallel_max_deg", self.parallel_max_deg),
            ("palm_arch_spread_max", self.palm_arch_spread_max),
            ("hold_to_start_ms", self.hold_to_start_ms),
            ("tolerance_rel", self.tolerance_rel),
            ("frame_rate_hz", self.frame_rate_hz),
            ("activation_move_cm", self.activation_move_cm),
            ("activation_yaw_deg", self.activation_yaw_deg),
            ("stability_eps.finger_cm", self.stability_eps.finger_cm),
            ("stability_eps.hand_cm", self.stability_eps.hand_cm),
            ("stability_eps.rotation_deg", self.stability_eps.rotation_deg),
        ]
        for name, v in positives:
            if not (math.isfinite(v) and v > 0):
                raise InvalidConfigError(f"{name} must be strictly positive, got {v!r}")
        if self.stability_window_frames < self.finalize_k_frames:
            raise InvalidConfigError(
                "stability_window_frames must be >= finalize_k_frames "
                f"({self.stability_window_frames} < {self.finalize_k_frames})"
            )

    def eps_for(self, gesture: GestureKind) -> float:
        if gesture in (GestureKind.ONE_FINGER, GestureKind.TWO_FINGERS):
            return self.stability_eps.finger_cm
        if gesture in (GestureKind.ONE_HAND, GestureKind.TWO_HANDS):
            return self.stability_eps.hand_cm
        return self.stability_eps.rotation_deg


def load_config(path: Union[str, Path]) -> tuple[EngineConfig, DeviceProfile]:
    """Load the JSON config file: EngineConfig fields plus a `profile` object.

    Unknown keys are rejected; omitted engine fields keep their defaults.
    """
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise InvalidConfigError("config must be a JSON object")
    obj = dict(obj)
    profile_obj = obj.pop("profile", None)
    profile = DeviceProfile.from_json(profile_obj) if profile_obj is not None else DEFAULT_PROFILE

    engine_fields = {f.name for f in fields(EngineConfig)}
    unknown = set(obj) - engine_fields
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    for name in engine_fields & set(obj):
        value = obj[name]
        if name == "stability_eps":
            if not isinstance(value, dict):
                raise InvalidConfigError("stability_eps must be an object")
            band_fields = {f.name for f in fields(StabilityBands)}
            bad = set(value) - band_fields
            if bad:
                raise InvalidConfigError(f"unknown stability_eps keys: {sorted(bad)}")
            kwargs[name] = StabilityBands(**{k: float(v) for k, v in value.items()})
        elif name in ("stability_window_frames", "finalize_k_frames", "hold_to_start_ms"):
            kwargs[name] = int(value)
        else:
            kwargs[name] = float(value)
    return EngineConfig(**kwargs), profile


def config_to_json(cfg: EngineConfig, profile: DeviceProfile) -> dict:
    obj: dict = {
        "clamp_theta_m": cfg.clamp_theta_m,
        "stability_window_frames": cfg.stability_window_frames,
        "stability_eps": {
            "finger_cm": cfg.stability_eps.finger_cm,
            "hand_cm": cfg.stability_eps.hand_cm,
            "rotation_deg": cfg.stability_eps.rotation_deg,
        },
        "finalize_k_frames": cfg.finalize_k_frames,
        "parallel_max_deg": cfg.parallel_max_deg,
        "palm_arch_spread_max": cfg.palm_arch_spread_max,
        "hold_to_start_ms": cfg.hold_to_start_ms,
        "tolerance_rel": cfg.tolerance_rel,
        "frame_rate_hz": cfg.frame_rate_hz,
        "activation_move_cm": cfg.activation_move_cm,
        "activation_yaw_deg": cfg.activation_yaw_deg,
        "profile": profile.to_json(),
    }
    return obj


# --- measurement results ----------------------------------------------------

class WarningCode(Enum):
    PALM_NOT_PARALLEL = "palm_not_parallel"
    PHONE_NOT_PARALLEL = "phone_not_parallel"
    DELTA_CLAMPED = "delta_clamped"
    RANGE_CLIPPED = "range_clipped"
    INVALID_FRAME = "invalid_frame"


@dataclass(frozen=True)
class WarningNote:
    code: WarningCode
    t_ms: int

    def to_json(self) -> dict:
        return {"code": self.code.value, "t_ms": self.t_ms}


@dataclass(frozen=True)
class MeasurementResult:
    gesture: GestureKind
    value: float
    raw_value: float
    started_ms: int
    ended_ms: int
    frames_processed: int
    warnings: tuple[WarningNote, ...] = ()

    def __post_init__(self):
        if self.ended_ms <= self.started_ms:
            raise InvalidValueError(
                f"ended_ms {self.ended_ms} must exceed started_ms {self.started_ms}"
            )

    def to_json(self) -> dict:
        return {
            "gesture": self.gesture.value,
            "value": self.value,
            "raw_value": self.raw_value,
            "started_ms": self.started_ms,
            "ended_ms": self.ended_ms,
            "frames_processed": self.frames_processed,
            "warnings": [w.to_json() for w in self.warnings],
        }


# --- feedback events ---------------------------------------------------------

class FeedbackKind(Enum):
    BEEP_CORRECT = "beep_correct"
    BEEP_ERROR = "beep_error"
    SPEECH = "speech"
    VIBRATION = "vibration"


@dataclass(frozen=True)
class FeedbackEvent:
    t_ms: int
    kind: FeedbackKind
    text: Optional[str] = None
    amplitude: Optional[float] = None
    duration_ms: Optional[int] = None

    def __post_init__(self):
        if self.kind is FeedbackKind.SPEECH and not self.text:
            raise InvalidValueError("speech event needs text")
        if self.kind is FeedbackKind.VIBRATION:
            if self.amplitude is None or not (0.0 < self.amplitude <= 1.0):
                raise InvalidValueError(f"vibration amplitude {self.amplitude} outside (0, 1]")
            if self.duration_ms is None or self.duration_ms <= 0:
                raise InvalidValueError("vibration needs a positive duration_ms")

    @classmethod
    def beep_correct(cls, t_ms: int) -> "FeedbackEvent":
        return cls(t_ms=t_ms, kind=FeedbackKind.BEEP_CORRECT)

    @classmethod
    def beep_error(cls, t_ms: int) -> "FeedbackEvent":
        return cls(t_ms=t_ms, kind=FeedbackKind.BEEP_ERROR)

    @classmethod
    def speech(cls, t_ms: int, text: str) -> "FeedbackEvent":
        return cls(t_ms=t_ms, kind=FeedbackKind.SPEECH, text=text)

    @classmethod
    def vibration(cls, t_ms: int, amplitude: float, duration_ms: int) -> "FeedbackEvent":
        return cls(t_ms=t_ms, kind=FeedbackKind.VIBRATION,
                   amplitude=amplitude, duration_ms=duration_ms)

    def to_json(self) -> dict:
        obj: dict = {"t_ms": self.t_ms, "kind": self.kind.value}
        if self.kind is FeedbackKind.SPEECH:
            obj["text"] = self.text
        elif self.kind is FeedbackKind.VIBRATION:
            obj["amplitude"] = self.amplitude
            obj["duration_ms"] = self.duration_ms
        return obj


__all__ = [
    "AngleSizerError",
    "InvalidValueError",
    "InvalidProfileError",
    "InvalidConfigError",
    "GestureKind",
    "round_to_resolution",
    "validate_range",
    "format_value",
    "DeviceProfile",
    "DEFAULT_PROFILE",
    "TouchPhase",
    "TouchContact",
    "Touch",
    "Pose",
    "Orientation",
    "Palm",
    "Press",
    "Payload",
    "SensorFrame",
    "decode_frame",
    "validate_frame",
    "StabilityBands",
    "EngineConfig",
    "load_config",
    "config_to_json",
    "WarningCode",
    "WarningNote",
    "MeasurementResult",
    "FeedbackKind",
    "FeedbackEvent",
]
