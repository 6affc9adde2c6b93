"""Frame data model and the on-disk stream format.

A stream lives in a directory holding ``manifest.jsonl`` (one frame record per
line), optional ``segments.jsonl`` and the frame files the manifest points at.
Thermal frames are 16-bit binary PGM files, RGB frames binary PPM files.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from itertools import groupby
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TEMP_OFFSET_C = 40.0
TEMP_SCALE = 100.0
TEMP_MIN_C = -TEMP_OFFSET_C
TEMP_MAX_C = 65535 / TEMP_SCALE - TEMP_OFFSET_C

BASE_RATE_FPS = 4.0
FRAME_PERIOD_MS = 250

MANIFEST_NAME = "manifest.jsonl"
SEGMENTS_NAME = "segments.jsonl"
MANIFEST_KEYS = ("frame_id", "t_ms", "thermal", "rgb", "participant", "label", "segment")
SEGMENT_KEYS = ("segment", "participant", "label", "start_ms", "end_ms")


class FormatError(ValueError):
    """Raised for malformed PGM/PPM payloads."""


class ManifestError(ValueError):
    """Raised when a manifest line cannot be parsed."""


class StreamValidationError(ValueError):
    """Raised when records or segments break the stream invariants."""


@dataclass(frozen=True, eq=False)
class ThermalFrame:
    timestamp_ms: int
    temps: np.ndarray  # (height, width), degrees Celsius

    def __post_init__(self) -> None:
        temps = np.asarray(self.temps, dtype=np.float64)
        if temps.ndim != 2:
            raise ValueError("thermal grid must be 2-D (height, width)")
        if not np.all(np.isfinite(temps)):
            raise ValueError("thermal grid contains non-finite values")
        if temps.size and (temps.min() < TEMP_MIN_C or temps.max() > TEMP_MAX_C + 1e-9):
            raise ValueError(f"temperatures must lie in [{TEMP_MIN_C}, {TEMP_MAX_C}] C")
        object.__setattr__(self, "temps", temps)

    @property
    def width(self) -> int:
        return self.temps.shape[1]

    @property
    def height(self) -> int:
        return self.temps.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ThermalFrame):
            return NotImplemented
        return self.timestamp_ms == other.timestamp_ms and np.array_equal(self.temps, other.temps)


@dataclass(frozen=True, eq=False)
class RgbFrame:
    timestamp_ms: int
    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError("RGB raster must have shape (height, width, 3)")
        object.__setattr__(self, "pixels", pixels.astype(np.uint8, copy=False))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RgbFrame):
            return NotImplemented
        return self.timestamp_ms == other.timestamp_ms and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class FrameRecord:
    frame_id: int
    timestamp_ms: int
    thermal_path: str
    rgb_path: str
    participant_id: str
    activity_label: str | None = None
    segment_id: int | None = None

    def to_json(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "t_ms": self.timestamp_ms,
            "thermal": self.thermal_path,
            "rgb": self.rgb_path,
            "participant": self.participant_id,
            "label": self.activity_label,
            "segment": self.segment_id,
        }


@dataclass(frozen=True)
class ActivitySegment:
    segment_id: int
    participant_id: str
    label: str
    start_ms: int
    end_ms: int

    def __post_init__(self) -> None:
        if self.end_ms <= self.start_ms:
            raise StreamValidationError(
                f"segment {self.segment_id}: end_ms must exceed start_ms"
            )

    @property
    def duration_s(self) -> float:
        return (self.end_ms - self.start_ms) / 1000.0

    def contains(self, t_ms: int) -> bool:
        return self.start_ms <= t_ms < self.end_ms

    def to_json(self) -> dict:
        return {
            "segment": self.segment_id,
            "participant": self.participant_id,
            "label": self.label,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
        }


# --- netpbm ------------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_header(data: bytes, magic: bytes) -> tuple[int, int, int, int]:
    """Parse a netpbm header; returns (width, height, maxval, payload offset)."""
    if data[:2] != magic:
        raise FormatError(f"expected magic {magic!r}, got {data[:2]!r}")
    pos = 2
    fields = []
    for _ in range(3):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise FormatError("truncated header")
        try:
            fields.append(int(m.group(1)))
        except ValueError:
            raise FormatError(f"bad header field {m.group(1)!r}") from None
        pos = m.end()
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after header")
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise FormatError("non-positive image dimensions")
    return width, height, maxval, pos + 1


def encode_thermal(frame: ThermalFrame) -> bytes:
    samples = np.rint((frame.temps + TEMP_OFFSET_C) * TEMP_SCALE)
    samples = np.clip(samples, 0, 65535).astype(">u2")
    header = f"P5\n{frame.width} {frame.height}\n65535\n".encode("ascii")
    return header + samples.tobytes()


def decode_thermal(data: bytes, timestamp_ms: int = 0) -> ThermalFrame:
    width, height, maxval, offset = _read_header(data, b"P5")
    if maxval != 65535:
        raise FormatError(f"thermal PGM must have maxval 65535, got {maxval}")
    n = width * height
    payload = data[offset : offset + 2 * n]
    if len(payload) != 2 * n:
        raise FormatError(f"truncated payload: need {2 * n} bytes, got {len(payload)}")
    samples = np.frombuffer(payload, dtype=">u2").reshape(height, width)
    return ThermalFrame(timestamp_ms, samples / TEMP_SCALE - TEMP_OFFSET_C)


def encode_rgb(frame: RgbFrame) -> bytes:
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(frame.pixels, dtype=np.uint8).tobytes()


def decode_rgb(data: bytes, timestamp_ms: int = 0) -> RgbFrame:
    width, height, maxval, offset = _read_header(data, b"P6")
    if maxval != 255:
        raise FormatError(f"RGB PPM must have maxval 255, got {maxval}")
    n = 3 * width * height
    payload = data[offset : offset + n]
    if len(payload) != n:
        raise FormatError(f"truncated payload: need {n} bytes, got {len(payload)}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return RgbFrame(timestamp_ms, pixels)


def read_thermal(path: str | Path, timestamp_ms: int = 0) -> ThermalFrame:
    return decode_thermal(Path(path).read_bytes(), timestamp_ms)


def read_rgb(path: str | Path, timestamp_ms: int = 0) -> RgbFrame:
    return decode_rgb(Path(path).read_bytes(), timestamp_ms)


# --- manifests ---------------------------------------------------------------


def _record_from_json(obj: dict, lineno: int) -> FrameRecord:
    missing = [k for k in MANIFEST_KEYS[:5] if k not in obj]
    extra = [k for k in obj if k not in MANIFEST_KEYS]
    if missing or extra:
        raise ManifestError(f"line {lineno}: missing keys {missing}, unknown keys {extra}")
    try:
        return FrameRecord(
            frame_id=int(obj["frame_id"]),
            timestamp_ms=int(obj["t_ms"]),
            thermal_path=str(obj["thermal"]),
            rgb_path=str(obj["rgb"]),
            participant_id=str(obj["participant"]),
            activity_label=obj.get("label"),
            segment_id=None if obj.get("segment") is None else int(obj["segment"]),
        )
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"line {lineno}: {exc}") from None


def _read_jsonl(path: Path) -> list[tuple[int, dict]]:
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path.name} line {lineno}: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ManifestError(f"{path.name} line {lineno}: expected a JSON object")
            rows.append((lineno, obj))
    return rows


def validate_records(records: Sequence[FrameRecord]) -> None:
    for prev, cur in zip(records, records[1:]):
        if cur.frame_id <= prev.frame_id:
            raise StreamValidationError(
                f"frame_id not strictly increasing: {prev.frame_id} then {cur.frame_id}"
            )
    last_t: dict[str, int] = {}
    for rec in records:
        prev_t = last_t.get(rec.participant_id)
        if prev_t is not None and rec.timestamp_ms < prev_t:
            raise StreamValidationError(
                f"frame {rec.frame_id}: timestamp decreases for participant {rec.participant_id}"
            )
        last_t[rec.participant_id] = rec.timestamp_ms


def validate_segments(segments: Sequence[ActivitySegment]) -> None:
    by_participant = sorted(segments, key=lambda s: (s.participant_id, s.start_ms))
    for _, group in groupby(by_participant, key=lambda s: s.participant_id):
        group = list(group)
        for a, b in zip(group, group[1:]):
            if b.start_ms < a.end_ms:
                raise StreamValidationError(
                    f"segments {a.segment_id} and {b.segment_id} overlap"
                )


def derive_segments(
    records: Sequence[FrameRecord], frame_period_ms: int = FRAME_PERIOD_MS
) -> list[ActivitySegment]:
    """Coalesce runs of identical labels into segments.

    A run breaks on a label change, a participant change, or a timestamp jump of
    more than two frame periods. The segment ends one frame period after its
    last frame. Unlabeled frames never form segments.
    """
    segments: list[ActivitySegment] = []
    run: list[FrameRecord] = []

    def close() -> None:
        if run and run[0].activity_label is not None:
            sid = run[0].segment_id if run[0].segment_id is not None else len(segments)
            segments.append(
                ActivitySegment(
                    segment_id=sid,
                    participant_id=run[0].participant_id,
                    label=run[0].activity_label,
                    start_ms=run[0].timestamp_ms,
                    end_ms=run[-1].timestamp_ms + frame_period_ms,
                )
            )
        run.clear()

    ordered = sorted(records, key=lambda r: (r.participant_id, r.timestamp_ms, r.frame_id))
    for rec in ordered:
        if run:
            last = run[-1]
            if (
                rec.participant_id != last.participant_id
                or rec.activity_label != last.activity_label
                or rec.timestamp_ms - last.timestamp_ms > 2 * frame_period_ms
            ):
                close()
        run.append(rec)
    close()
    return segments


def load_stream(
    manifest_path: str | Path, frame_period_ms: int = FRAME_PERIOD_MS
) -> tuple[list[FrameRecord], list[ActivitySegment]]:
    """Read a manifest (and ``segments.jsonl`` beside it, if present)."""
    manifest_path = Path(manifest_path)
    records = [_record_from_json(obj, n) for n, obj in _read_jsonl(manifest_path)]
    validate_records(records)
    seg_path = manifest_path.with_name(SEGMENTS_NAME)
    if seg_path.exists():
        segments = []
        for n, obj in _read_jsonl(seg_path):
            try:
                segments.append(
                    ActivitySegment(
                        int(obj["segment"]),
                        str(obj["participant"]),
                        str(obj["label"]),
                        int(obj["start_ms"]),
                        int(obj["end_ms"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"{seg_path.name} line {n}: {exc}") from None
    else:
        segments = derive_segments(records, frame_period_ms)
    validate_segments(segments)
    return records, segments


def _write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def store_stream(
    records: Sequence[FrameRecord],
    segments: Sequence[ActivitySegment] | None,
    out_dir: str | Path,
) -> Path:
    """Write the manifest (and segments, when given) into ``out_dir``.

    Frame files are not touched; records only carry their relative paths.
    """
    validate_records(records)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / MANIFEST_NAME
    _write_jsonl(manifest, (r.to_json() for r in records))
    seg_path = out_dir / SEGMENTS_NAME
    if segments is not None:
        validate_segments(segments)
        _write_jsonl(seg_path, (s.to_json() for s in segments))
    elif seg_path.exists():
        seg_path.unlink()
    return manifest


def participants(records: Sequence[FrameRecord]) -> list[str]:
    return sorted({r.participant_id for r in records})


def split_by_participant(records: Sequence[FrameRecord]) -> dict[str, list[FrameRecord]]:
    out: dict[str, list[FrameRecord]] = {}
    for rec in records:
        out.setdefault(rec.participant_id, []).append(rec)
    return out
