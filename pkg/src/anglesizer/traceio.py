"""Line-delimited trace and session-log I/O.

A `.trace.jsonl` file is one header line (device profile, optional ground
truth) followed by one sensor frame per line. A `.log.jsonl` session log is
one record per line with a `type` discriminator. Appends are committed a
whole line at a time, so a reader never sees a partial record.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

from .core import (
    AngleSizerError,
    DeviceProfile,
    GestureKind,
    SensorFrame,
    decode_frame,
    validate_frame,
)


class TraceError(AngleSizerError):
    """Parse failure; `line` is the 1-based line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line

    def __str__(self) -> str:
        base = super().__str__()
        return f"line {self.line}: {base}" if self.line is not None else base


class EmptyTraceError(TraceError):
    code = "EmptyTrace"


class NonMonotonicTimeError(TraceError):
    code = "NonMonotonicTime"


class MalformedFrameError(TraceError):
    code = "MalformedFrame"


class IoFailureError(AngleSizerError):
    code = "IoFailure"


@dataclass(frozen=True)
class GroundTruth:
    gesture: GestureKind
    value: float

    def to_json(self) -> dict:
        return {"gesture": self.gesture.value, "value": self.value}


@dataclass(frozen=True)
class TraceDocument:
    profile: DeviceProfile
    frames: tuple[SensorFrame, ...]
    ground_truth: Optional[GroundTruth] = None


def parse_trace(text: Union[str, bytes]) -> TraceDocument:
    """Parse and fully validate a line-delimited trace.

    Raises EmptyTraceError, NonMonotonicTimeError or MalformedFrameError;
    the latter two carry the offending 1-based line number.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise MalformedFrameError("missing header line", line=1)

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MalformedFrameError(f"header is not valid JSON: {exc}", line=1) from exc
    if not isinstance(header, dict):
        raise MalformedFrameError("header must be a JSON object", line=1)
    unknown = set(header) - {"profile", "ground_truth"}
    if unknown:
        raise MalformedFrameError(f"unknown header keys: {sorted(unknown)}", line=1)
    if "profile" not in header:
        raise MalformedFrameError("header missing profile", line=1)
    try:
        profile = DeviceProfile.from_json(header["profile"])
    except AngleSizerError as exc:
        raise MalformedFrameError(f"bad profile: {exc}", line=1) from exc

    ground_truth = None
    if header.get("ground_truth") is not None:
        gt = header["ground_truth"]
        try:
            gesture = GestureKind(gt["gesture"])
            value = float(gt["value"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFrameError(f"bad ground_truth: {exc}", line=1) from exc
        lo, hi = gesture.valid_range
        if not (lo <= value <= hi):
            raise MalformedFrameError(
                f"ground_truth {value} outside {gesture.value} range [{lo}, {hi}]", line=1
            )
        ground_truth = GroundTruth(gesture=gesture, value=value)

    frames: list[SensorFrame] = []
    prev_t: Optional[int] = None
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedFrameError(f"not valid JSON: {exc}", line=lineno) from exc
        try:
            frame = decode_frame(obj)
        except ValueError as exc:
            raise MalformedFrameError(str(exc), line=lineno) from exc
        problems = validate_frame(frame, profile)
        if problems:
            raise MalformedFrameError("; ".join(problems), line=lineno)
        if prev_t is not None and frame.t_ms <= prev_t:
            raise NonMonotonicTimeError(
                f"t_ms {frame.t_ms} not after previous {prev_t}", line=lineno
            )
        prev_t = frame.t_ms
        frames.append(frame)

    if not frames:
        raise EmptyTraceError("trace has no frames")
    return TraceDocument(profile=profile, frames=tuple(frames), ground_truth=ground_truth)


def _dump(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True)


def write_trace(doc: TraceDocument) -> str:
    """Serialize a trace; parse_trace(write_trace(doc)) == doc field for field."""
    header: dict = {"profile": doc.profile.to_json()}
    if doc.ground_truth is not None:
        header["ground_truth"] = doc.ground_truth.to_json()
    lines = [_dump(header)]
    lines.extend(_dump(f.to_json()) for f in doc.frames)
    return "\n".join(lines) + "\n"


def read_trace_file(path: Union[str, Path]) -> TraceDocument:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailureError(f"cannot read trace {path}: {exc}") from exc
    return parse_trace(text)


def write_trace_file(doc: TraceDocument, path: Union[str, Path]) -> None:
    try:
        Path(path).write_text(write_trace(doc))
    except OSError as exc:
        raise IoFailureError(f"cannot write trace {path}: {exc}") from exc


def append_session_log(record: dict, path: Union[str, Path]) -> None:
    """Append one record (a JSON-ready dict with a `type` key) as a single line.

    The line is written with one os.write call and flushed, so a crash can
    only lose the record being written, never corrupt earlier lines.
    """
    if "type" not in record:
        raise IoFailureError("session log records need a 'type' discriminator")
    line = (_dump(record) + "\n").encode("utf-8")
    try:
        fd = os.open(str(path), os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)
        try:
            os.write(fd, line)
        finally:
            os.close(fd)
    except OSError as exc:
        raise IoFailureError(f"cannot append to log {path}: {exc}") from exc


def iter_session_log(path: Union[str, Path]) -> Iterator[dict]:
    """Yield complete records; a truncated trailing line (no newline) is skipped."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailureError(f"cannot read log {path}: {exc}") from exc
    if not data:
        return
    text = data.decode("utf-8", errors="replace")
    complete, sep, _tail = text.rpartition("\n")
    if not sep:
        return  # single partial line, nothing committed yet
    for raw in complete.split("\n"):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError:
            continue  # torn write from a crashed writer; skip, do not fail the log
        if isinstance(obj, dict):
            yield obj


__all__ = [
    "TraceError",
    "EmptyTraceError",
    "NonMonotonicTimeError",
    "MalformedFrameError",
    "IoFailureError",
    "GroundTruth",
    "TraceDocument",
    "parse_trace",
    "write_trace",
    "read_trace_file",
    "write_trace_file",
    "append_session_log",
    "iter_session_log",
]
