"""Segment-length bins, coverage and pixel-usage metrics."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

from .frames import ActivitySegment, FrameRecord
from .temporal import SampleTrace

Bin = Literal["short", "medium", "long"]
BINS: tuple[Bin, ...] = ("short", "medium", "long")

# one minute and 2.7 minutes
DEFAULT_THRESHOLDS_S = (60.0, 162.0)
DEFAULT_MIN_FRAMES = 4


class DegenerateDistributionError(ValueError):
    """All lengths are equal, so no head/tail split exists."""


class TraceConsistencyError(ValueError):
    """A trace refers to frames the base stream does not have."""


@dataclass(frozen=True)
class SegmentBins:
    t1_s: float
    t2_s: float
    bins: dict[int, Bin] = field(default_factory=dict)  # segment_id -> bin

    def __post_init__(self) -> None:
        if not self.t1_s < self.t2_s:
            raise ValueError("need t1 < t2")


@dataclass
class CoverageReport:
    min_frames: int
    counts: dict[tuple[str, int], int]  # (participant, segment_id) -> sampled frames
    bins: dict[tuple[str, int], Bin]
    per_bin: dict[str, float]
    per_bin_total: dict[str, int]
    overall: float

    def to_json(self) -> dict:
        return {
            "min_frames": self.min_frames,
            "overall": self.overall,
            "per_bin": self.per_bin,
            "segments_per_bin": self.per_bin_total,
        }


@dataclass
class UsageReport:
    pixels_sampled: int
    pixels_total: int
    per_participant: dict[str, tuple[int, int]]
    frames_sampled: int = 0

    @property
    def ratio(self) -> float:
        return self.pixels_sampled / self.pixels_total if self.pixels_total else 0.0

    def participant_ratio(self, pid: str) -> float:
        sampled, total = self.per_participant[pid]
        return sampled / total if total else 0.0

    def to_json(self) -> dict:
        return {
            "pixels_sampled": self.pixels_sampled,
            "pixels_total": self.pixels_total,
            "ratio": self.ratio,
            "frames_sampled": self.frames_sampled,
            "per_participant": {
                pid: {"pixels_sampled": s, "pixels_total": t, "ratio": s / t if t else 0.0}
                for pid, (s, t) in sorted(self.per_participant.items())
            },
        }


def head_tail_thresholds(lengths_s: Sequence[float]) -> tuple[float, float]:
    """Two nested mean splits: t1 = mean of all, t2 = mean of lengths above t1."""
    if len(lengths_s) == 0:
        raise ValueError("no lengths given")
    if min(lengths_s) == max(lengths_s):
        raise DegenerateDistributionError("constant length distribution")
    t1 = sum(lengths_s) / len(lengths_s)
    head = [x for x in lengths_s if x > t1]
    t2 = sum(head) / len(head)
    return t1, t2


def bin_of(length_s: float, t1_s: float, t2_s: float) -> Bin:
    if length_s < t1_s:
        return "short"
    if length_s < t2_s:
        return "medium"
    return "long"


def bin_segments(
    segments: Sequence[ActivitySegment],
    thresholds: tuple[float, float] = DEFAULT_THRESHOLDS_S,
) -> SegmentBins:
    t1, t2 = thresholds
    return SegmentBins(t1, t2, {s.segment_id: bin_of(s.duration_s, t1, t2) for s in segments})


def _frame_index(records: Sequence[FrameRecord]) -> dict[int, FrameRecord]:
    return {r.frame_id: r for r in records}


def coverage(
    trace: SampleTrace,
    segments: Sequence[ActivitySegment],
    records: Sequence[FrameRecord] | None = None,
    min_frames: int = DEFAULT_MIN_FRAMES,
    thresholds: tuple[float, float] = DEFAULT_THRESHOLDS_S,
) -> CoverageReport:
    """Share of segments holding at least ``min_frames`` sampled frames.

    A sampled frame counts toward the segment of its participant whose
    [start, end) interval contains its timestamp. ``records`` maps trace frames
    to participants; without it every segment is matched on time alone, which
    is only meaningful for single-participant streams.
    """
    index = _frame_index(records) if records is not None else None
    by_participant: dict[str, list[ActivitySegment]] = {}
    for seg in segments:
        by_participant.setdefault(seg.participant_id, []).append(seg)
    starts: dict[str, list[int]] = {}
    for pid, segs in by_participant.items():
        segs.sort(key=lambda s: s.start_ms)
        starts[pid] = [s.start_ms for s in segs]

    counts = {(s.participant_id, s.segment_id): 0 for s in segments}
    for entry in trace.entries:
        if index is not None:
            rec = index.get(entry.frame_id)
            if rec is None:
                raise TraceConsistencyError(f"trace frame {entry.frame_id} not in stream")
            pids = [rec.participant_id]
        else:
            pids = list(by_participant)
        for pid in pids:
            segs = by_participant.get(pid)
            if not segs:
                continue
            k = bisect.bisect_right(starts[pid], entry.timestamp_ms) - 1
            if k >= 0 and segs[k].contains(entry.timestamp_ms):
                counts[(pid, segs[k].segment_id)] += 1

    t1, t2 = thresholds
    bins = {(s.participant_id, s.segment_id): bin_of(s.duration_s, t1, t2) for s in segments}
    covered = {key: n >= min_frames for key, n in counts.items()}
    per_bin: dict[str, float] = {}
    per_bin_total: dict[str, int] = {}
    for b in BINS:
        keys = [k for k, v in bins.items() if v == b]
        per_bin_total[b] = len(keys)
        per_bin[b] = sum(covered[k] for k in keys) / len(keys) if keys else float("nan")
    overall = sum(covered.values()) / len(covered) if covered else float("nan")
    return CoverageReport(min_frames, counts, bins, per_bin, per_bin_total, overall)


def pixel_usage(
    trace: SampleTrace,
    base_stream: Sequence[FrameRecord],
    frame_dims: tuple[int, int] | Mapping[str, tuple[int, int]],
) -> UsageReport:
    """Sampled pixels over the pixels of full-frame capture of every frame.

    ``frame_dims`` is the RGB (width, height), or a per-participant mapping.
    """
    index = _frame_index(base_stream)

    def dims(pid: str) -> tuple[int, int]:
        return frame_dims[pid] if isinstance(frame_dims, Mapping) else frame_dims

    per: dict[str, list[int]] = {}
    for rec in base_stream:
        w, h = dims(rec.participant_id)
        per.setdefault(rec.participant_id, [0, 0])[1] += w * h
    for entry in trace.entries:
        rec = index.get(entry.frame_id)
        if rec is None:
            raise TraceConsistencyError(f"trace frame {entry.frame_id} not in stream")
        if entry.crop is None:
            w, h = dims(rec.participant_id)
            area = w * h
        else:
            area = entry.crop[2] * entry.crop[3]
        per[rec.participant_id][0] += area
    sampled = sum(v[0] for v in per.values())
    total = sum(v[1] for v in per.values())
    return UsageReport(sampled, total, {k: (v[0], v[1]) for k, v in per.items()}, len(trace))
