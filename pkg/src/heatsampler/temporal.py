"""Dynamic RGB frame-rate control and frame scheduling.

The rate law maps the min-max normalized rolling similarity of the newest
thermal frame onto [fps_min, fps_max]: low similarity relative to the recent
window (a transition) drives the rate up, sustained activity drives it down.
A credit scheduler turns the rate into concrete sample instants.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .embeddings import Embedding
from .frames import BASE_RATE_FPS, FRAME_PERIOD_MS, FrameRecord
from .similarity import DEFAULT_EPSILON, SimilarityWindow

Box = tuple[int, int, int, int]
DegeneratePolicy = Literal["min_rate", "max_rate"]

# guards the credit comparison against accumulated rounding
CREDIT_TOL = 1e-9


class SequencingError(ValueError):
    """Timestamps fed to the scheduler went backwards."""


@dataclass(frozen=True)
class SamplerConfig:
    T: int = 32
    fps_min: float = 0.125
    fps_max: float = 4.0
    epsilon: float = DEFAULT_EPSILON
    degenerate_policy: DegeneratePolicy = "min_rate"
    base_rate: float = BASE_RATE_FPS

    def __post_init__(self) -> None:
        if not 0 < self.fps_min <= self.fps_max <= self.base_rate:
            raise ValueError(
                f"need 0 < fps_min <= fps_max <= base_rate, got "
                f"{self.fps_min}, {self.fps_max}, {self.base_rate}"
            )
        if self.T < 2:
            raise ValueError("window length T must be >= 2")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.degenerate_policy not in ("min_rate", "max_rate"):
            raise ValueError(f"unknown degenerate_policy {self.degenerate_policy!r}")

    def with_overrides(self, **overrides: object) -> "SamplerConfig":
        known = {f.name: f.type for f in fields(self)}
        coerced = {}
        for key, value in overrides.items():
            if key not in known:
                raise KeyError(f"unknown sampler setting {key!r}")
            current = getattr(self, key)
            if isinstance(current, bool) or isinstance(current, str):
                coerced[key] = str(value)
            elif isinstance(current, int):
                coerced[key] = int(value)
            else:
                coerced[key] = _parse_rate(value)
        return replace(self, **coerced)


def _parse_rate(value: object) -> float:
    """Floats, with ``a/b`` fractions accepted for readability (``1/32``)."""
    if isinstance(value, str) and "/" in value:
        num, den = value.split("/", 1)
        return float(num) / float(den)
    return float(value)


# Window lengths, rate bounds and epsilon were tuned once on the seed-42
# reference corpus and are frozen here. Epsilon sits above the spread of the
# rolling similarity under 0.3 C sensor noise, so steady activity reads as a
# flat window.
PRESET_EPSILON = 1e-3
PRESETS: dict[str, SamplerConfig] = {
    "thor_high": SamplerConfig(T=32, fps_min=1 / 8, fps_max=4.0, epsilon=PRESET_EPSILON),
    "thor_mid": SamplerConfig(T=64, fps_min=1 / 16, fps_max=1.0, epsilon=PRESET_EPSILON),
    "thor_low": SamplerConfig(T=128, fps_min=1 / 32, fps_max=0.5, epsilon=PRESET_EPSILON),
}

# uniform baselines: seconds between frames
UNIFORM_PERIODS_S = {"uni_high": 2.0, "uni_mid": 8.0, "uni_low": 17.0}


def variant_preset(name: str) -> SamplerConfig:
    key = name.strip().lower().replace("-", "_")
    try:
        return PRESETS[key]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; choose from {sorted(PRESETS)}") from None


def update_fps(window: SimilarityWindow, config: SamplerConfig, i: int | None = None) -> float:
    w = window.rolling_means(i)
    lo, hi = float(w.min()), float(w.max())
    if hi - lo < config.epsilon:
        return config.fps_min if config.degenerate_policy == "min_rate" else config.fps_max
    r = (float(w[-1]) - lo) / (hi - lo + config.epsilon)
    s = 1.0 - r
    # interpolation form that is exact at both ends
    f = config.fps_min * (1.0 - s) + config.fps_max * s
    return min(config.fps_max, max(config.fps_min, f))


@dataclass
class SamplerState:
    window: SimilarityWindow
    current_fps: float
    credit: float = 1.0
    last_decision_ms: int | None = None

    @classmethod
    def initial(cls, config: SamplerConfig) -> "SamplerState":
        return cls(SimilarityWindow(config.T), config.fps_min)


def step(
    state: SamplerState,
    embedding: Embedding | np.ndarray,
    timestamp_ms: int,
    config: SamplerConfig,
    frame_period_ms: int = FRAME_PERIOD_MS,
) -> tuple[SamplerState, bool]:
    """Advance the scheduler by one thermal frame; returns (state, sample?).

    The state is updated in place and returned for convenience. Credit is
    re-seeded to 1 after a capture gap longer than two frame periods so the
    first frame after the device comes back is always taken.
    """
    if state.last_decision_ms is not None and timestamp_ms < state.last_decision_ms:
        raise SequencingError(
            f"timestamp {timestamp_ms} precedes previous {state.last_decision_ms}"
        )
    state.window.push(embedding)
    state.current_fps = update_fps(state.window, config)
    if state.last_decision_ms is None:
        dt = 0.0
    else:
        gap = timestamp_ms - state.last_decision_ms
        if gap > 2 * frame_period_ms:
            state.credit = 1.0
            dt = 0.0
        else:
            dt = gap / 1000.0
    state.credit = min(1.0, state.credit + state.current_fps * dt)
    state.last_decision_ms = timestamp_ms
    if state.credit >= 1.0 - CREDIT_TOL:
        state.credit = max(0.0, state.credit - 1.0)
        return state, True
    return state, False


# --- traces ------------------------------------------------------------------


@dataclass(frozen=True)
class TraceEntry:
    frame_id: int
    timestamp_ms: int
    fps: float | None
    crop: Box | None = None

    def to_json(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "t_ms": self.timestamp_ms,
            "fps": self.fps,
            "crop": None if self.crop is None else list(self.crop),
        }


@dataclass
class SampleTrace:
    entries: list[TraceEntry]
    config: dict = field(default_factory=dict)
    stream: str = ""
    # per-frame rate for every input frame (not serialized); useful for plots
    fps_track: list[tuple[int, int, float]] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        for a, b in zip(self.entries, self.entries[1:]):
            if b.frame_id <= a.frame_id:
                raise ValueError("trace frame_ids must be strictly increasing")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def frame_ids(self) -> list[int]:
        return [e.frame_id for e in self.entries]

    def header(self) -> dict:
        return {"header": {"stream": self.stream, "config": self.config}}

    def dumps(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True, separators=(",", ":"))]
        lines += [json.dumps(e.to_json(), separators=(",", ":")) for e in self.entries]
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "SampleTrace":
        entries: list[TraceEntry] = []
        config: dict = {}
        stream = ""
        with Path(path).open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                if "header" in obj:
                    config = obj["header"].get("config", {})
                    stream = obj["header"].get("stream", "")
                    continue
                try:
                    crop = obj["crop"]
                    entries.append(
                        TraceEntry(
                            int(obj["frame_id"]),
                            int(obj["t_ms"]),
                            None if obj["fps"] is None else float(obj["fps"]),
                            None if crop is None else tuple(int(c) for c in crop),
                        )
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{Path(path).name} line {lineno}: {exc}") from None
        return cls(entries, config, stream)

    @staticmethod
    def merge(traces: Iterable["SampleTrace"], config: dict, stream: str) -> "SampleTrace":
        entries = sorted((e for t in traces for e in t.entries), key=lambda e: e.frame_id)
        return SampleTrace(entries, config, stream)


def run_temporal(
    records: Sequence[FrameRecord],
    embeddings: np.ndarray,
    config: SamplerConfig,
    frame_period_ms: int = FRAME_PERIOD_MS,
) -> tuple[list[int], list[float]]:
    """Drive one participant's stream; returns (sampled positions, fps per frame)."""
    if len(records) != len(embeddings):
        raise ValueError("one embedding per record required")
    state = SamplerState.initial(config)
    picked: list[int] = []
    rates: list[float] = []
    for pos, (rec, emb) in enumerate(zip(records, embeddings)):
        state, take = step(state, emb, rec.timestamp_ms, config, frame_period_ms)
        rates.append(state.current_fps)
        if take:
            picked.append(pos)
    return picked, rates


def uniform_positions(records: Sequence[FrameRecord], period_s: float) -> list[int]:
    """Positions of the first frame at/after each multiple of the period."""
    if not period_s > 0:
        raise ValueError("period must be positive")
    if not records:
        return []
    period_ms = period_s * 1000.0
    start = records[0].timestamp_ms
    picked = []
    next_due = 0.0
    for pos, rec in enumerate(records):
        elapsed = rec.timestamp_ms - start
        if elapsed >= next_due:
            picked.append(pos)
            next_due = (math.floor(elapsed / period_ms) + 1) * period_ms
    return picked


def uniform_sampler(records: Sequence[FrameRecord], period_s: float) -> SampleTrace:
    """Fixed-period full-frame baseline over one or more participants' streams."""
    by_participant: dict[str, list[FrameRecord]] = {}
    for rec in records:
        by_participant.setdefault(rec.participant_id, []).append(rec)
    entries = []
    for recs in by_participant.values():
        entries += [
            TraceEntry(recs[p].frame_id, recs[p].timestamp_ms, 1.0 / period_s, None)
            for p in uniform_positions(recs, period_s)
        ]
    entries.sort(key=lambda e: e.frame_id)
    return SampleTrace(entries, {"uniform_period_s": period_s}, "")


def config_dict(config: SamplerConfig) -> dict:
    return asdict(config)
