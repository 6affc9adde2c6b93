"""Figures for evaluation reports, written next to the CSV/JSON files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import EvalResult  # noqa: E402
from .frames import ActivitySegment  # noqa: E402
from .segments import BINS  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 4.0),
    "figure.dpi": 120,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def _save(fig: plt.Figure, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def coverage_usage_figure(result: EvalResult, path: Path) -> Path:
    """Per-bin coverage (bars) and pixel usage (right axis, log) per trace."""
    names = list(result.coverage)
    x = np.arange(len(names))
    width = 0.8 / len(BINS)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for k, b in enumerate(BINS):
            vals = [100 * result.coverage[n].per_bin[b] for n in names]
            ax.bar(x + (k - 1) * width, vals, width, label=f"{b} segments")
        ax.set_ylabel("segments with >= %d frames (%%)" % next(iter(result.coverage.values())).min_frames)
        ax.set_ylim(0, 105)
        ax.set_xticks(x, names, rotation=20, ha="right")
        ax2 = ax.twinx()
        ax2.plot(x, [100 * result.usage[n].ratio for n in names], "ko--", label="pixel usage")
        ax2.set_yscale("log")
        ax2.set_ylabel("pixels used (% of full capture)")
        h1, l1 = ax.get_legend_handles_labels()
        h2, l2 = ax2.get_legend_handles_labels()
        ax.legend(h1 + h2, l1 + l2, loc="upper center", bbox_to_anchor=(0.5, -0.22), ncol=4)
        ax.set_title("Segment coverage and data usage")
        return _save(fig, path)


def participant_usage_figure(result: EvalResult, path: Path) -> Path:
    names = list(result.usage)
    pids = sorted({p for u in result.usage.values() for p in u.per_participant})
    grid = np.array([[100 * result.usage[n].participant_ratio(p) for n in names] for p in pids])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(names), 0.9 + 0.35 * len(pids)))
        im = ax.imshow(grid, aspect="auto", cmap="viridis")
        ax.set_xticks(range(len(names)), names, rotation=20, ha="right")
        ax.set_yticks(range(len(pids)), pids)
        for i in range(len(pids)):
            for j in range(len(names)):
                ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center", color="w", fontsize=7)
        fig.colorbar(im, ax=ax, label="% of pixels")
        ax.set_title("Data used per participant")
        return _save(fig, path)


def fps_timeline_figure(
    result: EvalResult,
    segments: Sequence[ActivitySegment],
    participant: str,
    frame_participant: dict[int, str],
    path: Path,
) -> Path:
    """Sampled instants and the rate at each decision for one participant."""
    segs = [s for s in segments if s.participant_id == participant]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(9.0, 3.6))
        for s in segs[1:]:
            ax.axvline(s.start_ms / 1000, color="0.8", lw=0.8)
        for name, trace in result.traces.items():
            pts = [(e.timestamp_ms / 1000, e.fps) for e in trace.entries
                   if frame_participant.get(e.frame_id) == participant and e.fps is not None]
            if pts:
                t, f = zip(*pts)
                ax.plot(t, f, ".", ms=2.5, label=name)
        ax.set_yscale("log")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("rate at sampled frame (FPS)")
        ax.set_title(f"Sampling decisions, participant {participant} (grey: segment boundaries)")
        ax.legend(loc="upper right", markerscale=3)
        return _save(fig, path)


def render_figures(result: EvalResult, segments: Sequence[ActivitySegment],
                   frame_participant: dict[int, str], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [
        coverage_usage_figure(result, out / "coverage_usage.png"),
        participant_usage_figure(result, out / "usage_by_participant.png"),
    ]
    pids = sorted(set(frame_participant.values()))
    if pids:
        paths.append(fps_timeline_figure(result, segments, pids[0], frame_participant, out / "sampling_timeline.png"))
    return paths
