"""Evaluation statistics: relative error, grouped means, improvement,
paired t, least-squares regression, and daily report tables.

Standard deviations are sample (n-1) throughout, matching mean (SD)
reporting. p-values are deliberately absent: tests compare t statistics
directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import AngleSizerError, GestureKind
from .teaching import AssessmentRecord


class InvalidTaskError(AngleSizerError):
    code = "InvalidTask"


class InvalidBaselineError(AngleSizerError):
    code = "InvalidBaseline"


class LengthMismatchError(AngleSizerError):
    code = "LengthMismatch"


class DegenerateVarianceError(AngleSizerError):
    code = "DegenerateVariance"


class DegenerateXError(AngleSizerError):
    code = "DegenerateX"


class EmptyGroupError(AngleSizerError):
    code = "EmptyGroup"


@dataclass(frozen=True)
class StatResult:
    t_stat: Optional[float] = None
    df: Optional[int] = None
    slope: Optional[float] = None
    intercept: Optional[float] = None
    r_squared: Optional[float] = None


@dataclass(frozen=True)
class GroupStats:
    mean: float
    sd: float
    n: int
    sd_defined: bool  # False for single-record groups, where sd reads 0


def relative_error(result: float, task: float) -> float:
    """|result - task| / task; the primary accuracy metric."""
    if task <= 0:
        raise InvalidTaskError(f"task value must be positive, got {task}")
    return abs(result - task) / task


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def _sample_sd(xs: Sequence[float]) -> float:
    m = _mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def mean_relative_error(records: Sequence[AssessmentRecord],
                        group_by: Optional[str] = None) -> dict:
    """Mean and sample SD of relative error, optionally grouped.

    group_by is "gesture", "day", or None for a single overall group keyed
    "all". Single-record groups report sd 0 with sd_defined False.
    """
    if group_by not in (None, "gesture", "day"):
        raise ValueError(f"group_by must be 'gesture', 'day' or None, got {group_by!r}")
    if not records:
        raise EmptyGroupError("no records to aggregate")
    groups: dict = {}
    for r in records:
        key = r.gesture if group_by == "gesture" else r.day if group_by == "day" else "all"
        groups.setdefault(key, []).append(r.relative_error)
    out = {}
    for key, errs in groups.items():
        if len(errs) == 1:
            out[key] = GroupStats(mean=errs[0], sd=0.0, n=1, sd_defined=False)
        else:
            out[key] = GroupStats(mean=_mean(errs), sd=_sample_sd(errs),
                                  n=len(errs), sd_defined=True)
    return out


def improvement(pre: float, post: float) -> float:
    """Fractional decrease in error from pre to post: (pre - post) / pre."""
    if pre <= 0:
        raise InvalidBaselineError(f"baseline must be positive, got {pre}")
    return (pre - post) / pre


def paired_t(pre: Sequence[float], post: Sequence[float]) -> StatResult:
    """Paired t statistic on pre - post differences, df = n - 1."""
    if len(pre) != len(post):
        raise LengthMismatchError(f"{len(pre)} pre but {len(post)} post values")
    n = len(pre)
    if n < 2:
        raise LengthMismatchError("need at least 2 pairs")
    diffs = [a - b for a, b in zip(pre, post)]
    sd = _sample_sd(diffs)
    if sd == 0.0:
        raise DegenerateVarianceError("all differences equal; t undefined")
    t = _mean(diffs) / (sd / math.sqrt(n))
    return StatResult(t_stat=t, df=n - 1)


def linear_regression(x: Sequence[float], y: Sequence[float]) -> StatResult:
    """Least-squares line; r_squared = 1 - SS_res/SS_tot, 0 for constant y."""
    if len(x) != len(y):
        raise LengthMismatchError(f"{len(x)} x but {len(y)} y values")
    n = len(x)
    if n < 2:
        raise LengthMismatchError("need at least 2 points")
    mx = _mean(x)
    my = _mean(y)
    sxx = sum((xi - mx) ** 2 for xi in x)
    if sxx == 0.0:
        raise DegenerateXError("all x equal; slope undefined")
    sxy = sum((xi - mx) * (yi - my) for xi, yi in zip(x, y))
    slope = sxy / sxx
    intercept = my - slope * mx
    ss_tot = sum((yi - my) ** 2 for yi in y)
    if ss_tot == 0.0:
        return StatResult(slope=slope, intercept=intercept, r_squared=0.0)
    ss_res = sum((yi - (slope * xi + intercept)) ** 2 for xi, yi in zip(x, y))
    return StatResult(slope=slope, intercept=intercept, r_squared=1.0 - ss_res / ss_tot)


# --- daily report --------------------------------------------------------------

@dataclass(frozen=True)
class DailyRow:
    day: int
    per_gesture: dict  # GestureKind -> GroupStats; absent gestures are missing keys
    overall: GroupStats


@dataclass(frozen=True)
class DailyReport:
    participant: str
    rows: tuple[DailyRow, ...]  # ordered by day


def daily_report(records: Sequence[AssessmentRecord], participant: str) -> DailyReport:
    """Per-day, per-gesture mean relative error for one participant.

    Gestures with no records on a day are simply absent from that row, never
    reported as zero.
    """
    mine = [r for r in records if r.participant == participant]
    rows = []
    for day in sorted({r.day for r in mine}):
        day_records = [r for r in mine if r.day == day]
        per_gesture = mean_relative_error(day_records, group_by="gesture")
        overall = mean_relative_error(day_records)["all"]
        rows.append(DailyRow(day=day, per_gesture=per_gesture, overall=overall))
    return DailyReport(participant=participant, rows=tuple(rows))


GESTURE_ORDER = (
    GestureKind.ONE_FINGER,
    GestureKind.TWO_FINGERS,
    GestureKind.ONE_HAND,
    GestureKind.TWO_HANDS,
    GestureKind.BODY_ROTATION,
)

CSV_HEADER = "participant,day,gesture,mean_rel_err,sd,n"


def report_csv(report: DailyReport) -> str:
    lines = [CSV_HEADER]
    for row in report.rows:
        for gesture in GESTURE_ORDER:
            stats = row.per_gesture.get(gesture)
            if stats is None:
                continue
            lines.append(
                f"{report.participant},{row.day},{gesture.value},"
                f"{stats.mean:.6f},{stats.sd:.6f},{stats.n}")
        lines.append(
            f"{report.participant},{row.day},all,"
            f"{row.overall.mean:.6f},{row.overall.sd:.6f},{row.overall.n}")
    return "\n".join(lines) + "\n"


def report_text(report: DailyReport) -> str:
    if not report.rows:
        return f"No records for participant {report.participant}.\n"
    names = {g: g.value.replace("_", " ") for g in GESTURE_ORDER}
    width = max(len(n) for n in names.values())
    lines = [f"Relative error by day — participant {report.participant}"]
    for row in report.rows:
        lines.append(f"day {row.day}:")
        for gesture in GESTURE_ORDER:
            stats = row.per_gesture.get(gesture)
            if stats is None:
                lines.append(f"  {names[gesture]:<{width}}  —")
            else:
                lines.append(
                    f"  {names[gesture]:<{width}}  {stats.mean:.3f} "
                    f"(sd {stats.sd:.3f}, n={stats.n})")
        lines.append(
            f"  {'overall':<{width}}  {row.overall.mean:.3f} "
            f"(sd {row.overall.sd:.3f}, n={row.overall.n})")
    return "\n".join(lines) + "\n"


__all__ = [
    "InvalidTaskError",
    "InvalidBaselineError",
    "LengthMismatchError",
    "DegenerateVarianceError",
    "DegenerateXError",
    "EmptyGroupError",
    "StatResult",
    "GroupStats",
    "relative_error",
    "mean_relative_error",
    "improvement",
    "paired_t",
    "linear_regression",
    "DailyRow",
    "DailyReport",
    "daily_report",
    "report_csv",
    "report_text",
    "GESTURE_ORDER",
    "CSV_HEADER",
]
