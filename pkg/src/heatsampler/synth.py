"""Seeded synthetic thermal/RGB corpora with known activity segments.

Each activity is a fixed thermal template (one or two Gaussian hot blobs over a
room-temperature background) plus per-frame sensor noise. Neighbouring
activities are cross-faded linearly over ``transition_s`` centred on the
boundary. RGB frames are flat renders with a coloured block over each blob,
placed with the full-frame calibration, so crops can be checked by eye and by
test.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .frames import (
    ActivitySegment,
    FrameRecord,
    RgbFrame,
    ThermalFrame,
    TEMP_OFFSET_C,
    TEMP_SCALE,
    encode_rgb,
    encode_thermal,
    store_stream,
)
from .recognition import load_keyword_map
from .spatial import Calibration


@dataclass(frozen=True)
class Blob:
    cx: float  # thermal pixels
    cy: float
    sigma: float
    peak_c: float


@dataclass(frozen=True)
class Template:
    background_c: float
    blobs: tuple[Blob, ...]
    color: tuple[int, int, int]


# Pose library. Single-hand poses sit fully on one side of the centre column,
# two-hand poses straddle it.
TEMPLATES: tuple[Template, ...] = (
    Template(22.0, (Blob(23.0, 15.0, 2.2, 35.5),), (220, 60, 60)),
    Template(21.5, (Blob(8.0, 16.0, 2.0, 34.5),), (60, 180, 75)),
    Template(23.0, (Blob(9.0, 16.0, 2.0, 36.0), Blob(23.0, 17.0, 2.0, 35.0)), (0, 130, 200)),
    Template(20.5, (Blob(26.0, 8.0, 2.4, 34.0),), (245, 130, 48)),
    Template(22.5, (Blob(6.0, 7.0, 2.3, 36.5),), (145, 30, 180)),
    Template(21.0, (Blob(12.0, 19.0, 2.0, 33.5), Blob(20.0, 19.0, 2.0, 34.0)), (70, 240, 240)),
    Template(23.5, (Blob(22.0, 5.0, 2.0, 37.0),), (240, 50, 230)),
    Template(20.0, (Blob(10.0, 4.0, 2.1, 35.0),), (210, 245, 60)),
    Template(22.0, (Blob(16.0, 12.0, 2.6, 36.0),), (250, 190, 212)),
    Template(21.0, (Blob(5.0, 20.0, 2.0, 35.0), Blob(27.0, 20.0, 2.0, 35.5)), (0, 128, 128)),
)
RGB_BACKGROUND = (90, 90, 90)


@dataclass(frozen=True)
class PlannedSegment:
    label: str
    duration_s: float
    template: int


@dataclass(frozen=True)
class ParticipantPlan:
    participant_id: str
    segments: tuple[PlannedSegment, ...]


@dataclass(frozen=True)
class ScenarioSpec:
    participants: tuple[ParticipantPlan, ...]
    transition_s: float = 2.0
    noise_sigma: float = 0.3
    base_rate: float = 4.0
    rgb_dims: tuple[int, int] = (956, 720)
    thermal_dims: tuple[int, int] = (32, 24)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.transition_s < 0:
            raise ValueError("transition_s must be >= 0")
        period_ms = self.frame_period_ms
        for plan in self.participants:
            for seg in plan.segments:
                if not seg.duration_s > 0:
                    raise ValueError(f"{plan.participant_id}: durations must be positive")
                if round(seg.duration_s * 1000) % period_ms:
                    raise ValueError(f"{plan.participant_id}: duration {seg.duration_s}s is not a whole number of frames")
                if not 0 <= seg.template < len(TEMPLATES):
                    raise ValueError(f"unknown template {seg.template}")

    @property
    def frame_period_ms(self) -> int:
        return round(1000 / self.base_rate)

    def to_json(self) -> dict:
        d = asdict(self)
        d["participants"] = [
            {"id": p.participant_id, "segments": [asdict(s) for s in p.segments]} for p in self.participants
        ]
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioSpec":
        extra = {k: obj[k] for k in ("transition_s", "noise_sigma", "base_rate", "seed") if k in obj}
        for k in ("rgb_dims", "thermal_dims"):
            if k in obj:
                extra[k] = tuple(int(v) for v in obj[k])
        if obj.get("reference"):
            return reference_spec(**extra)
        plans = tuple(
            ParticipantPlan(
                str(p["id"]),
                tuple(
                    PlannedSegment(str(s["label"]), float(s["duration_s"]), int(s["template"]))
                    for s in p["segments"]
                ),
            )
            for p in obj["participants"]
        )
        return cls(plans, **extra)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioSpec":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def reference_spec(seed: int = 42, n_participants: int = 3, **overrides) -> ScenarioSpec:
    """Reference scenario: per participant 6 short (20-50 s), 6 medium
    (70-150 s) and 4 long (180-400 s) segments in shuffled order."""
    rng = np.random.default_rng(seed)
    activities = sorted(load_keyword_map())
    plans = []
    for p in range(n_participants):
        durations = np.concatenate(
            [rng.integers(20, 51, 6), rng.integers(70, 151, 6), rng.integers(180, 401, 4)]
        )
        rng.shuffle(durations)
        labels = rng.choice(len(activities), size=len(durations), replace=False)
        templates = []
        for _ in durations:
            choices = [t for t in range(len(TEMPLATES)) if not templates or t != templates[-1]]
            templates.append(int(rng.choice(choices)))
        plans.append(
            ParticipantPlan(
                f"P{p + 1:02d}",
                tuple(
                    PlannedSegment(activities[int(lbl)], float(d), t)
                    for lbl, d, t in zip(labels, durations, templates)
                ),
            )
        )
    return ScenarioSpec(tuple(plans), seed=seed, **overrides)


# --- rendering ---------------------------------------------------------------


def render_template(template: Template, thermal_dims: tuple[int, int] = (32, 24)) -> np.ndarray:
    w, h = thermal_dims
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    temps = np.full((h, w), template.background_c)
    for b in template.blobs:
        bump = template.background_c + (b.peak_c - template.background_c) * np.exp(
            -((xx - b.cx) ** 2 + (yy - b.cy) ** 2) / (2 * b.sigma**2)
        )
        temps = np.maximum(temps, bump)
    return temps


def quantize(temps: np.ndarray) -> np.ndarray:
    """Snap to the 0.01 C storage grid so disk and memory corpora agree exactly."""
    samples = np.clip(np.rint((temps + TEMP_OFFSET_C) * TEMP_SCALE), 0, 65535)
    return samples / TEMP_SCALE - TEMP_OFFSET_C


def render_rgb(
    template: Template, rgb_dims: tuple[int, int], thermal_dims: tuple[int, int] = (32, 24)
) -> np.ndarray:
    w, h = rgb_dims
    pixels = np.empty((h, w, 3), dtype=np.uint8)
    pixels[:] = RGB_BACKGROUND
    cal = Calibration.full_frame(thermal_dims, rgb_dims)
    for b in template.blobs:
        x0 = int(max(0, (b.cx - 2 * b.sigma) * cal.scale_x))
        x1 = int(min(w, (b.cx + 2 * b.sigma + 1) * cal.scale_x))
        y0 = int(max(0, (b.cy - 2 * b.sigma) * cal.scale_y))
        y1 = int(min(h, (b.cy + 2 * b.sigma + 1) * cal.scale_y))
        pixels[y0:y1, x0:x1] = template.color
    return pixels


@dataclass
class ParticipantStream:
    participant_id: str
    records: list[FrameRecord]
    segments: list[ActivitySegment]
    thermal: np.ndarray  # (n, h, w), quantized C
    rgb_template: list[int]  # template index shown in each RGB frame
    midpoints_ms: list[int] = field(default_factory=list)  # blend midpoints (boundaries)


def _timeline(plan: ParticipantPlan, period_ms: int) -> tuple[list[int], list[int]]:
    bounds = [0]
    for seg in plan.segments:
        bounds.append(bounds[-1] + round(seg.duration_s * 1000))
    return bounds, list(range(0, bounds[-1], period_ms))


def render_participant(
    spec: ScenarioSpec,
    plan: ParticipantPlan,
    rng: np.random.Generator,
    first_frame_id: int = 0,
    first_segment_id: int = 0,
) -> ParticipantStream:
    period = spec.frame_period_ms
    bounds, times = _timeline(plan, period)
    base = [render_template(TEMPLATES[s.template], spec.thermal_dims) for s in plan.segments]
    half = spec.transition_s * 1000 / 2
    w, h = spec.thermal_dims
    noise = rng.normal(0.0, spec.noise_sigma, size=(len(times), h, w)) if spec.noise_sigma > 0 else None

    thermal = np.empty((len(times), h, w))
    shown: list[int] = []
    records: list[FrameRecord] = []
    m = 0
    for k, t in enumerate(times):
        while t >= bounds[m + 1]:
            m += 1
        temps, tpl = base[m], plan.segments[m].template
        # cross-fade into the next segment / out of the previous one
        if m + 1 < len(plan.segments) and half > 0 and t >= bounds[m + 1] - half:
            alpha = (t - (bounds[m + 1] - half)) / (2 * half)
            temps = (1 - alpha) * base[m] + alpha * base[m + 1]
            tpl = plan.segments[m + 1].template if alpha >= 0.5 else tpl
        elif m > 0 and half > 0 and t < bounds[m] + half:
            alpha = (t - (bounds[m] - half)) / (2 * half)
            temps = (1 - alpha) * base[m - 1] + alpha * base[m]
            tpl = plan.segments[m - 1].template if alpha < 0.5 else tpl
        if noise is not None:
            temps = temps + noise[k]
        thermal[k] = temps
        shown.append(tpl)
        fid = first_frame_id + k
        records.append(
            FrameRecord(
                frame_id=fid,
                timestamp_ms=t,
                thermal_path=f"thermal/{plan.participant_id}/{fid:07d}.pgm",
                rgb_path=f"rgb/tpl{tpl:02d}.ppm",
                participant_id=plan.participant_id,
                activity_label=plan.segments[m].label,
                segment_id=first_segment_id + m,
            )
        )
    segments = [
        ActivitySegment(first_segment_id + i, plan.participant_id, s.label, bounds[i], bounds[i + 1])
        for i, s in enumerate(plan.segments)
    ]
    return ParticipantStream(
        plan.participant_id, records, segments, quantize(thermal), shown, bounds[1:-1]
    )


def render_corpus(spec: ScenarioSpec) -> list[ParticipantStream]:
    """Whole corpus in memory, one stream per participant."""
    seeds = np.random.SeedSequence(spec.seed).spawn(len(spec.participants))
    streams = []
    next_frame = next_segment = 0
    for plan, ss in zip(spec.participants, seeds):
        stream = render_participant(spec, plan, np.random.default_rng(ss), next_frame, next_segment)
        streams.append(stream)
        next_frame += len(stream.records)
        next_segment += len(stream.segments)
    return streams


def generate_corpus(spec: ScenarioSpec, out_dir: str | Path) -> Path:
    """Write the corpus to ``out_dir``; returns the manifest path.

    RGB renders depend only on the displayed template, so each distinct render
    is stored once and shared by every frame showing it.
    """
    out_dir = Path(out_dir)
    streams = render_corpus(spec)
    (out_dir / "rgb").mkdir(parents=True, exist_ok=True)
    used = sorted({t for s in streams for t in s.rgb_template})
    for t in used:
        pixels = render_rgb(TEMPLATES[t], spec.rgb_dims, spec.thermal_dims)
        (out_dir / "rgb" / f"tpl{t:02d}.ppm").write_bytes(encode_rgb(RgbFrame(0, pixels)))
    records: list[FrameRecord] = []
    segments: list[ActivitySegment] = []
    for stream in streams:
        pdir = out_dir / "thermal" / stream.participant_id
        pdir.mkdir(parents=True, exist_ok=True)
        for rec, temps in zip(stream.records, stream.thermal):
            (out_dir / rec.thermal_path).write_bytes(encode_thermal(ThermalFrame(rec.timestamp_ms, temps)))
        records += stream.records
        segments += stream.segments
    (out_dir / "scenario.json").write_text(
        json.dumps(spec.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return store_stream(records, segments, out_dir)


def random_blob_frame(
    rng: np.random.Generator,
    thermal_dims: tuple[int, int] = (32, 24),
    noise_sigma: float = 0.3,
) -> tuple[np.ndarray, Template]:
    """A frame with one or two randomly placed blobs (for spatial checks)."""
    w, h = thermal_dims
    n = int(rng.integers(1, 3))
    blobs = tuple(
        Blob(
            float(rng.uniform(2, w - 3)),
            float(rng.uniform(2, h - 3)),
            float(rng.uniform(1.5, 3.0)),
            float(rng.uniform(33.0, 37.0)),
        )
        for _ in range(n)
    )
    tpl = Template(float(rng.uniform(20.0, 24.0)), blobs, (255, 0, 0))
    temps = render_template(tpl, thermal_dims)
    if noise_sigma > 0:
        temps = temps + rng.normal(0.0, noise_sigma, size=temps.shape)
    return quantize(temps), tpl

