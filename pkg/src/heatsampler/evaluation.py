"""Assemble coverage, usage, recognition and energy reports for a set of traces."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .energy import PowerProfile, device_energy, phone_energy, reduction_report
from .frames import FrameRecord
from .pipeline import Corpus
from .recognition import CaptionRecord, KeywordMap, evaluate
from .segments import (
    BINS,
    DEFAULT_MIN_FRAMES,
    DEFAULT_THRESHOLDS_S,
    CoverageReport,
    UsageReport,
    coverage,
    head_tail_thresholds,
    pixel_usage,
)
from .temporal import SampleTrace, TraceEntry


class CorpusMismatchError(ValueError):
    """A trace was produced from a different corpus."""


@dataclass
class EvalResult:
    thresholds: tuple[float, float]
    coverage: dict[str, CoverageReport] = field(default_factory=dict)
    usage: dict[str, UsageReport] = field(default_factory=dict)
    energy: dict[str, dict] = field(default_factory=dict)
    recognition: dict | None = None
    traces: dict[str, SampleTrace] = field(default_factory=dict)


def trace_name(trace: SampleTrace, fallback: str) -> str:
    return str(trace.config.get("variant") or fallback)


def check_trace(trace: SampleTrace, corpus: Corpus) -> None:
    if trace.stream and corpus.identity != "memory" and trace.stream != corpus.identity:
        raise CorpusMismatchError(
            f"trace was sampled from {trace.stream}, corpus is {corpus.identity}"
        )
    known = {r.frame_id: r.timestamp_ms for r in corpus.records}
    for e in trace.entries:
        if known.get(e.frame_id) != e.timestamp_ms:
            raise CorpusMismatchError(f"trace frame {e.frame_id} does not match the corpus")


def corpus_hours(records: Sequence[FrameRecord], base_rate: float = 4.0) -> float:
    return len(records) / base_rate / 3600.0


def energy_summary(
    trace: SampleTrace, corpus: Corpus, profile: PowerProfile
) -> dict:
    """Per-reference-hour device and phone energy for one trace."""
    records = corpus.records
    full = SampleTrace([TraceEntry(r.frame_id, r.timestamp_ms, None) for r in sorted(records, key=lambda r: r.frame_id)])
    stream_full = device_energy(full, records, profile, 1.0, "stream", corpus.rgb_dims)
    stream_trace = device_energy(trace, records, profile, 1.0, "stream", corpus.rgb_dims)
    thor = device_energy(trace, records, profile, 1.0, "thor", corpus.rgb_dims)
    hours = corpus_hours(records)
    # queries per reference hour implied by the trace's sampling rate
    per_hour = round(len(trace) / hours) if hours else 0
    has_patches = any(e.crop is not None for e in trace.entries)
    phone_ours = phone_energy(per_hour, profile, "patch" if has_patches else "full", True)
    phone_full = phone_energy(per_hour, profile, "full", True)
    return {
        "corpus_hours": hours,
        "queries_per_hour": per_hour,
        "device": {
            "continuous_stream": stream_full.to_json(),
            "trace_stream": stream_trace.to_json(),
            "on_device": thor.to_json(),
            "reduction_on_device_vs_continuous_pct": reduction_report(thor, stream_full),
        },
        "phone": {
            "ours": phone_ours.to_json(),
            "full_image": phone_full.to_json(),
            "reduction_pct": reduction_report(phone_ours, phone_full) if phone_full.total > 0 else 0.0,
        },
    }


def evaluate_traces(
    corpus: Corpus,
    traces: Mapping[str, SampleTrace],
    captions: Sequence[CaptionRecord] | None = None,
    kmap: KeywordMap | None = None,
    profile: PowerProfile | None = None,
    thresholds: tuple[float, float] | str = DEFAULT_THRESHOLDS_S,
    min_frames: int = DEFAULT_MIN_FRAMES,
) -> EvalResult:
    if thresholds == "data":
        thresholds = head_tail_thresholds([s.duration_s for s in corpus.segments])
    profile = profile or PowerProfile()
    result = EvalResult(tuple(thresholds))
    for name, trace in traces.items():
        check_trace(trace, corpus)
        result.traces[name] = trace
        result.coverage[name] = coverage(trace, corpus.segments, corpus.records, min_frames, result.thresholds)
        result.usage[name] = pixel_usage(trace, corpus.records, corpus.rgb_dims)
        result.energy[name] = energy_summary(trace, corpus, profile)
    if captions:
        if kmap is None:
            raise ValueError("captions given without a keyword map")
        result.recognition = evaluate(captions, kmap).to_json()
    return result


def _fmt(x: float) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else f"{x:.6f}"


def write_reports(result: EvalResult, out_dir: str | Path) -> list[Path]:
    """CSV/JSON outputs; rows follow the order the traces were given."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "coverage_usage.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trace", *(f"coverage_{b}" for b in BINS), "coverage_overall", "usage_ratio", "frames_sampled"])
        for name, cov in result.coverage.items():
            u = result.usage[name]
            w.writerow([name, *(_fmt(cov.per_bin[b]) for b in BINS), _fmt(cov.overall), _fmt(u.ratio), u.frames_sampled])
    written.append(path)

    path = out / "usage_by_participant.csv"
    names = list(result.usage)
    pids = sorted({p for u in result.usage.values() for p in u.per_participant})
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["participant", *(f"{n}_pct" for n in names)])
        for pid in pids:
            w.writerow([pid, *(_fmt(100 * result.usage[n].participant_ratio(pid)) for n in names)])
        w.writerow(["mean", *(_fmt(100 * sum(result.usage[n].participant_ratio(p) for p in pids) / len(pids)) for n in names)])
    written.append(path)

    summary = {
        "thresholds_s": list(result.thresholds),
        "traces": {
            name: {"coverage": result.coverage[name].to_json(), "usage": result.usage[name].to_json()}
            for name in result.coverage
        },
    }
    for fname, payload in (("summary.json", summary), ("energy.json", result.energy)):
        path = out / fname
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(path)
    if result.recognition is not None:
        path = out / "recognition.json"
        path.write_text(json.dumps(result.recognition, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(path)
    return written
