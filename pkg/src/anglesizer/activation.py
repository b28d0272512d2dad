"""Gesture activation for free exploration.

Given a recent window of sensor frames, decide which gesture the user is
starting. The rules run in strict priority order and the first match wins;
a window matching nothing yields None, never a default.
"""
from __future__ import annotations

from typing import Optional, Sequence

from .core import (
    EngineConfig,
    GestureKind,
    Orientation,
    Palm,
    Pose,
    Press,
    SensorFrame,
    Touch,
    TouchPhase,
)
from .engine import accumulate_rotation, phone_parallel_ok


def detect_activation(window: Sequence[SensorFrame],
                      cfg: Optional[EngineConfig] = None) -> Optional[GestureKind]:
    """Classify the gesture a frame window activates, or None.

    Priority: two contacts > held single contact > pressed+palm >
    pressed+flat+turning > pressed+moving. Finger gestures need no press;
    the rest only count while the screen is pressed.
    """
    cfg = cfg or EngineConfig()
    if not window:
        return None
    end_t = window[-1].t_ms

    touches = [f for f in window if isinstance(f.payload, Touch)]
    if touches:
        latest = touches[-1].payload
        assert isinstance(latest, Touch)
        if len(latest.contacts) == 2:
            return GestureKind.TWO_FINGERS
        if len(latest.contacts) == 1 and _held_ms(touches, latest.contacts[0].id,
                                                  end_t) >= cfg.hold_to_start_ms:
            return GestureKind.ONE_FINGER

    pressed = False
    for f in window:
        if isinstance(f.payload, Press):
            pressed = f.payload.pressed
    if not pressed:
        return None

    palms = [f.payload for f in window if isinstance(f.payload, Palm)]
    if palms and palms[-1].detected:
        return GestureKind.TWO_HANDS

    orientations = [f.payload for f in window if isinstance(f.payload, Orientation)]
    if orientations:
        latest_o = orientations[-1]
        yaw_travel = abs(accumulate_rotation([o.yaw_deg for o in orientations]))
        if (phone_parallel_ok(latest_o.pitch_deg, latest_o.roll_deg, cfg)
                and yaw_travel > cfg.activation_yaw_deg):
            return GestureKind.BODY_ROTATION

    poses = [f.payload for f in window if isinstance(f.payload, Pose)]
    if len(poses) >= 2:
        a, b = poses[0].position_m, poses[-1].position_m
        moved_cm = 100.0 * ((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
                            + (b[2] - a[2]) ** 2) ** 0.5
        if moved_cm > cfg.activation_move_cm:
            return GestureKind.ONE_HAND

    return None


def _held_ms(touch_frames: Sequence[SensorFrame], contact_id: int, end_t: int) -> int:
    """How long the contact has been continuously down at the window's end."""
    since: Optional[int] = None
    for f in touch_frames:
        payload = f.payload
        assert isinstance(payload, Touch)
        contact = next((c for c in payload.contacts if c.id == contact_id), None)
        if contact is None or contact.phase is TouchPhase.UP:
            since = None
        elif since is None:
            since = f.t_ms
    return end_t - since if since is not None else 0


__all__ = ["detect_activation"]
