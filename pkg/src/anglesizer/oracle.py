"""Synthetic trace generator with known ground truth.

This is the independent oracle the measurement pipeline is validated
against: each generator builds a sensor stream directly from the target
value and the device calibration, with optional noise models exercising the
pipeline's countermeasures (uniform pixel noise for touch, Gaussian jitter
for poses, single-frame coordinate spikes for tracking leaps).

Generators are pure functions of their parameters and seed: the same seed
always yields byte-identical trace text.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .core import (
    AngleSizerError,
    DEFAULT_PROFILE,
    DeviceProfile,
    GestureKind,
    Orientation,
    Palm,
    Pose,
    Press,
    SensorFrame,
    Touch,
    TouchContact,
    TouchPhase,
)
from .traceio import GroundTruth, TraceDocument


class BadParamsError(AngleSizerError):
    code = "BadParams"


class OffScreenError(AngleSizerError):
    code = "OffScreen"


FRAME_STEP_MS = 33  # ~30 Hz
DEFAULT_HOLD_FRAMES = 25  # covers the default 15-frame stability window

# nominal motion speeds, per frame at ~30 Hz; slow enough to be human,
# fast enough that motion never looks stable to the detector
TOUCH_STEP_CM = 0.1
HAND_STEP_CM = 1.0

IDENTITY_Q = (1.0, 0.0, 0.0, 0.0)


def _times(n: int, start: int = 0) -> list[int]:
    return [start + i * FRAME_STEP_MS for i in range(n)]


def gen_touch_trace(distance_cm: float, profile: Optional[DeviceProfile] = None,
                    two_fingers: bool = False, noise_px: float = 0.0,
                    seed: int = 0, move_frames: Optional[int] = None,
                    hold_frames: int = DEFAULT_HOLD_FRAMES) -> TraceDocument:
    """On-screen drag (or pinch-open) covering distance_cm, then a held position.

    The pixel span is distance_cm * dpi_x / 2.54 along the x axis; each frame
    gets independent Uniform[-noise_px, noise_px] noise on that axis.
    """
    profile = profile or DEFAULT_PROFILE
    if not (0.0 <= distance_cm <= 12.0):
        raise BadParamsError(f"distance_cm {distance_cm} outside [0, 12]")
    if noise_px < 0:
        raise BadParamsError("noise_px must be >= 0")
    if hold_frames < 1:
        raise BadParamsError("hold_frames must be >= 1")
    rng = np.random.default_rng(seed)

    span_px = distance_cm * profile.dpi_x / 2.54
    margin = 20.0 + noise_px
    if margin + span_px + margin > profile.screen_w_px:
        raise OffScreenError(
            f"{distance_cm} cm needs {span_px:.0f} px, screen is {profile.screen_w_px} px"
        )
    y = profile.screen_h_px / 2.0

    if move_frames is None:
        move_frames = max(2, round(distance_cm / TOUCH_STEP_CM))
    if move_frames < 2:
        raise BadParamsError("move_frames must be >= 2")
    n = move_frames + hold_frames
    path = np.concatenate([np.linspace(0.0, span_px, move_frames),
                           np.full(hold_frames, span_px)])
    if noise_px > 0:
        path = path + rng.uniform(-noise_px, noise_px, size=n)

    frames: list[SensorFrame] = []
    if two_fingers:
        x_center = profile.screen_w_px / 2.0
        for i, t in enumerate(_times(n)):
            half = path[i] / 2.0
            phase = (TouchPhase.DOWN if i == 0
                     else TouchPhase.UP if i == n - 1 else TouchPhase.MOVE)
            contacts = (
                TouchContact(id=0, x_px=_clip(x_center - half, profile.screen_w_px),
                             y_px=y, phase=phase),
                TouchContact(id=1, x_px=_clip(x_center + half, profile.screen_w_px),
                             y_px=y, phase=phase),
            )
            frames.append(SensorFrame(t_ms=t, payload=Touch(contacts=contacts)))
    else:
        x0 = margin
        for i, t in enumerate(_times(n)):
            phase = (TouchPhase.DOWN if i == 0
                     else TouchPhase.UP if i == n - 1 else TouchPhase.MOVE)
            x = _clip(x0 + path[i], profile.screen_w_px)
            contacts = (TouchContact(id=0, x_px=x, y_px=y, phase=phase),)
            frames.append(SensorFrame(t_ms=t, payload=Touch(contacts=contacts)))

    gesture = GestureKind.TWO_FINGERS if two_fingers else GestureKind.ONE_FINGER
    return TraceDocument(profile=profile, frames=tuple(frames),
                         ground_truth=GroundTruth(gesture=gesture, value=distance_cm))


def _clip(x: float, hi: float) -> float:
    return min(max(x, 0.0), hi)


def clean_pose_path(distance_cm: float, n_frames: int,
                    hold_frames: int = 20, three_axis: bool = False) -> np.ndarray:
    """The noiseless position path gen_pose_trace perturbs: linear ramp + hold.

    Exposed so tests can compare engine estimates against per-frame truth.
    """
    move = n_frames - hold_frames
    if move < 2:
        raise BadParamsError(f"n_frames {n_frames} leaves fewer than 2 motion frames")
    d_m = distance_cm / 100.0
    ramp = np.concatenate([np.linspace(0.0, d_m, move), np.full(hold_frames, d_m)])
    positions = np.zeros((n_frames, 3))
    if three_axis:
        positions[:, :] = ramp[:, None] / math.sqrt(3.0)
    else:
        positions[:, 0] = ramp
    return positions


def gen_pose_trace(distance_cm: float, n_frames: Optional[int] = None,
                   jitter_m: float = 0.0, outlier_count: int = 0,
                   outlier_mag_m: float = 0.0, seed: int = 0,
                   profile: Optional[DeviceProfile] = None,
                   hold_frames: int = 20,
                   three_axis: bool = False) -> TraceDocument:
    """Device-in-hand motion: linear path to distance_cm, then a held position.

    Gaussian jitter (sigma jitter_m per axis) models hand shake; outliers add
    a single-frame spike of outlier_mag_m along the motion axis, the way a
    tracking reset leaps and recovers.
    """
    profile = profile or DEFAULT_PROFILE
    if not (0.0 <= distance_cm <= 120.0):
        raise BadParamsError(f"distance_cm {distance_cm} outside [0, 120]")
    if n_frames is None:
        n_frames = max(5, round(distance_cm / HAND_STEP_CM)) + hold_frames
    if n_frames < 25:
        raise BadParamsError(f"n_frames {n_frames} too short; need >= 25")
    if outlier_count < 0 or (outlier_count > 0 and outlier_mag_m <= 0):
        raise BadParamsError("outliers need a positive magnitude")
    rng = np.random.default_rng(seed)

    positions = clean_pose_path(distance_cm, n_frames, hold_frames, three_axis)
    if jitter_m > 0:
        positions = positions + rng.normal(0.0, jitter_m, size=positions.shape)
    move = n_frames - hold_frames
    if outlier_count > 0:
        candidates = np.arange(2, max(3, move - 2))
        if outlier_count > len(candidates):
            raise BadParamsError("more outliers than motion frames")
        spikes = rng.choice(candidates, size=outlier_count, replace=False)
        for idx in spikes:
            positions[idx, 0] += outlier_mag_m

    t = 0
    frames: list[SensorFrame] = [SensorFrame(t_ms=t, payload=Press(pressed=True))]
    for i in range(n_frames):
        t += FRAME_STEP_MS
        frames.append(SensorFrame(
            t_ms=t,
            payload=Pose(position_m=tuple(float(v) for v in positions[i]),
                         orientation_q=IDENTITY_Q),
        ))
    frames.append(SensorFrame(t_ms=t + FRAME_STEP_MS, payload=Press(pressed=False)))
    return TraceDocument(
        profile=profile, frames=tuple(frames),
        ground_truth=GroundTruth(gesture=GestureKind.ONE_HAND, value=distance_cm),
    )


def gen_palm_trace(distance_cm: float, profile: Optional[DeviceProfile] = None,
                   hold_frames: int = DEFAULT_HOLD_FRAMES, seed: int = 0,
                   arch_spread: float = 0.0) -> TraceDocument:
    """Palm held in front of the camera at distance_cm.

    The observed width follows the pinhole model. arch_spread > 0 offsets one
    knuckle depth by that fraction of the palm width, simulating a palm
    rotated out of the screen plane.
    """
    profile = profile or DEFAULT_PROFILE
    if distance_cm <= 0:
        raise BadParamsError(f"distance_cm must be positive, got {distance_cm}")
    if hold_frames < 2:
        raise BadParamsError("hold_frames must be >= 2")
    width_px = profile.focal_px * profile.palm_width_cm / distance_cm
    depths = [0.0, 0.0, 0.0, 0.0, 0.0]
    if arch_spread > 0:
        depths[2] = arch_spread * width_px

    t = 0
    frames: list[SensorFrame] = [SensorFrame(t_ms=t, payload=Press(pressed=True))]
    for _ in range(hold_frames):
        t += FRAME_STEP_MS
        frames.append(SensorFrame(
            t_ms=t,
            payload=Palm(detected=True, width_px=width_px,
                         arch_depths=tuple(depths), wrist_depth=0.0),
        ))
    frames.append(SensorFrame(t_ms=t + FRAME_STEP_MS, payload=Press(pressed=False)))
    return TraceDocument(
        profile=profile, frames=tuple(frames),
        ground_truth=GroundTruth(gesture=GestureKind.TWO_HANDS, value=distance_cm),
    )


def gen_rotation_trace(angle_deg: float, start_yaw_deg: float = 0.0,
                       rate_deg_per_frame: float = 5.0, seed: int = 0,
                       profile: Optional[DeviceProfile] = None,
                       hold_frames: int = DEFAULT_HOLD_FRAMES,
                       pitch_deg: float = 0.0,
                       roll_deg: float = 0.0) -> TraceDocument:
    """Body rotation by angle_deg starting at start_yaw_deg.

    Yaw steps at rate_deg_per_frame toward the target (a partial final step
    lands exactly), stored modulo 360, then holds. Ground truth is the
    unsigned angle. pitch/roll are constant, 0 by default; non-zero values
    exercise the parallelism warning.
    """
    profile = profile or DEFAULT_PROFILE
    if abs(angle_deg) > 360.0:
        raise BadParamsError(f"|angle_deg| {abs(angle_deg)} exceeds 360")
    if not (0.0 < rate_deg_per_frame < 180.0):
        raise BadParamsError(f"rate {rate_deg_per_frame} outside (0, 180)")
    if hold_frames < 2:
        raise BadParamsError("hold_frames must be >= 2")

    yaws: list[float] = [start_yaw_deg % 360.0]
    travelled = 0.0
    direction = 1.0 if angle_deg >= 0 else -1.0
    while travelled < abs(angle_deg) - 1e-12:
        step = min(rate_deg_per_frame, abs(angle_deg) - travelled)
        travelled += step
        yaws.append((start_yaw_deg + direction * travelled) % 360.0)
    yaws.extend([yaws[-1]] * hold_frames)

    t = 0
    frames: list[SensorFrame] = [SensorFrame(t_ms=t, payload=Press(pressed=True))]
    for yaw in yaws:
        t += FRAME_STEP_MS
        frames.append(SensorFrame(
            t_ms=t,
            payload=Orientation(yaw_deg=yaw, pitch_deg=pitch_deg, roll_deg=roll_deg),
        ))
    frames.append(SensorFrame(t_ms=t + FRAME_STEP_MS, payload=Press(pressed=False)))
    return TraceDocument(
        profile=profile, frames=tuple(frames),
        ground_truth=GroundTruth(gesture=GestureKind.BODY_ROTATION, value=abs(angle_deg)),
    )


def gen_trace(gesture: GestureKind, value: float, **kwargs) -> TraceDocument:
    """Dispatch to the generator for a gesture; used by the CLI and tests."""
    if gesture is GestureKind.ONE_FINGER:
        return gen_touch_trace(value, two_fingers=False, **kwargs)
    if gesture is GestureKind.TWO_FINGERS:
        return gen_touch_trace(value, two_fingers=True, **kwargs)
    if gesture is GestureKind.ONE_HAND:
        return gen_pose_trace(value, **kwargs)
    if gesture is GestureKind.TWO_HANDS:
        return gen_palm_trace(value, **kwargs)
    return gen_rotation_trace(value, **kwargs)


__all__ = [
    "BadParamsError",
    "OffScreenError",
    "FRAME_STEP_MS",
    "DEFAULT_HOLD_FRAMES",
    "gen_touch_trace",
    "clean_pose_path",
    "gen_pose_trace",
    "gen_palm_trace",
    "gen_rotation_trace",
    "gen_trace",
]
