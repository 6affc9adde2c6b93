"""End-to-end sampling over a corpus: embed, schedule, crop."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .embeddings import Embedding, embed_array
from .frames import (
    MANIFEST_NAME,
    ActivitySegment,
    FrameRecord,
    RgbFrame,
    decode_rgb,
    decode_thermal,
    load_stream,
    split_by_participant,
)
from .spatial import DEFAULT_MARGIN_PX, MIN_BODY_HEAT_C, Calibration, Patch, crop, crop_box
from .synth import ScenarioSpec, TEMPLATES, render_corpus, render_rgb
from .temporal import SamplerConfig, SampleTrace, TraceEntry, run_temporal, uniform_sampler


@dataclass
class Corpus:
    """Records, segments and frame access for a multi-participant stream."""

    records: list[FrameRecord]
    segments: list[ActivitySegment]
    rgb_dims: tuple[int, int]
    root: Path | None = None
    identity: str = "memory"
    _thermal: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    _rgb_cache: dict[str, RgbFrame] = field(default_factory=dict, repr=False)
    _spec: ScenarioSpec | None = field(default=None, repr=False)
    _rgb_template: dict[int, int] = field(default_factory=dict, repr=False)

    @classmethod
    def from_dir(cls, path: str | Path) -> "Corpus":
        path = Path(path)
        manifest = path / MANIFEST_NAME if path.is_dir() else path
        records, segments = load_stream(manifest)
        root = manifest.parent
        rgb_dims = (0, 0)
        if records:
            rgb = decode_rgb((root / records[0].rgb_path).read_bytes())
            rgb_dims = (rgb.width, rgb.height)
        digest = hashlib.sha256(manifest.read_bytes()).hexdigest()[:16]
        return cls(records, segments, rgb_dims, root, f"manifest-sha256:{digest}")

    @classmethod
    def from_spec(cls, spec: ScenarioSpec) -> "Corpus":
        """Render a synthetic corpus in memory (RGB frames rendered on demand)."""
        streams = render_corpus(spec)
        corpus = cls(
            [r for s in streams for r in s.records],
            [seg for s in streams for seg in s.segments],
            spec.rgb_dims,
            identity=f"synthetic-seed:{spec.seed}",
            _spec=spec,
        )
        for s in streams:
            corpus._thermal[s.participant_id] = s.thermal
            for rec, tpl in zip(s.records, s.rgb_template):
                corpus._rgb_template[rec.frame_id] = tpl
        return corpus

    @property
    def participants(self) -> dict[str, list[FrameRecord]]:
        return split_by_participant(self.records)

    def thermal_stack(self, participant: str) -> np.ndarray:
        if participant not in self._thermal:
            if self.root is None:
                raise KeyError(participant)
            recs = self.participants[participant]
            self._thermal[participant] = np.stack(
                [decode_thermal((self.root / r.thermal_path).read_bytes()).temps for r in recs]
            )
        return self._thermal[participant]

    def rgb(self, record: FrameRecord) -> RgbFrame:
        if self._spec is not None:
            tpl = self._rgb_template[record.frame_id]
            key = f"tpl{tpl}"
            if key not in self._rgb_cache:
                self._rgb_cache[key] = RgbFrame(
                    0, render_rgb(TEMPLATES[tpl], self._spec.rgb_dims, self._spec.thermal_dims)
                )
        else:
            key = record.rgb_path
            if key not in self._rgb_cache:
                self._rgb_cache[key] = decode_rgb((self.root / key).read_bytes())
        return self._rgb_cache[key]


@dataclass(frozen=True)
class SpatialConfig:
    margin_px: int = DEFAULT_MARGIN_PX
    min_heat_c: float | None = MIN_BODY_HEAT_C
    calibration: Calibration | None = None  # None: full-frame stretch
    enabled: bool = True


def run_sampler(
    corpus: Corpus,
    config: SamplerConfig,
    spatial: SpatialConfig = SpatialConfig(),
    embeddings: Mapping[int, Embedding] | None = None,
    patch_dir: str | Path | None = None,
    name: str = "",
    keep_fps: bool = False,
) -> SampleTrace:
    """Adaptive sampling over every participant; participants run independently."""
    entries: list[TraceEntry] = []
    track: list[tuple[int, int, float]] = []
    if patch_dir is not None:
        Path(patch_dir).mkdir(parents=True, exist_ok=True)
    for pid, recs in sorted(corpus.participants.items()):
        stack = corpus.thermal_stack(pid)
        if embeddings is None:
            vecs = embed_array(stack)
        else:
            vecs = np.stack([embeddings[r.frame_id].values for r in recs])
        picked, rates = run_temporal(recs, vecs, config)
        if keep_fps:
            track += [(r.frame_id, r.timestamp_ms, f) for r, f in zip(recs, rates)]
        h, w = stack.shape[1:]
        cal = spatial.calibration or Calibration.full_frame((w, h), corpus.rgb_dims)
        for pos in picked:
            rec = recs[pos]
            box = None
            if spatial.enabled:
                box = crop_box(stack[pos], corpus.rgb_dims, cal, spatial.margin_px, spatial.min_heat_c)
            entries.append(TraceEntry(rec.frame_id, rec.timestamp_ms, rates[pos], box))
            if patch_dir is not None and box is not None:
                Patch(rec.frame_id, box, crop(corpus.rgb(rec), box)).save(patch_dir)
    entries.sort(key=lambda e: e.frame_id)
    header = {"variant": name, "sampler": asdict(config), "spatial": _spatial_json(spatial)}
    return SampleTrace(entries, header, corpus.identity, track if keep_fps else None)


def run_uniform(corpus: Corpus, period_s: float, name: str = "") -> SampleTrace:
    trace = uniform_sampler(corpus.records, period_s)
    trace.config = {"variant": name or f"uniform_{period_s:g}s", "uniform_period_s": period_s}
    trace.stream = corpus.identity
    return trace


def _spatial_json(spatial: SpatialConfig) -> dict:
    cal = spatial.calibration
    return {
        "margin_px": spatial.margin_px,
        "min_heat_c": spatial.min_heat_c,
        "enabled": spatial.enabled,
        "calibration": None if cal is None else asdict(cal),
    }
