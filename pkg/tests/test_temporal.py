from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from heatsampler.frames import FrameRecord
from heatsampler.similarity import SimilarityWindow
from heatsampler.temporal import (
    PRESETS,
    SamplerConfig,
    SamplerState,
    SampleTrace,
    SequencingError,
    TraceEntry,
    run_temporal,
    step,
    uniform_positions,
    uniform_sampler,
    update_fps,
    variant_preset,
)


class FixedW:
    def __init__(self, w):
        self.w = np.asarray(w, dtype=float)

    def rolling_means(self, i=None):
        return self.w


def records(n, period=250, participant="P01", start_id=0):
    return [FrameRecord(start_id + k, k * period, "t", "r", participant, "A") for k in range(n)]


def units(rng, n, dim=64):
    x = rng.normal(size=(n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def step_stream(n_before, n_after, dim=64):
    a, b = np.zeros(dim), np.zeros(dim)
    a[0], b[1] = 1.0, 1.0
    return np.array([a] * n_before + [b] * n_after)


# --- config -----------------------------------------------------------------


def test_presets():
    assert variant_preset("thor_high").fps_max == 4.0
    assert variant_preset("thor-low").T == 128
    high, mid, low = (PRESETS[k] for k in ("thor_high", "thor_mid", "thor_low"))
    assert (high.T, high.fps_min, high.fps_max) == (32, 1 / 8, 4.0)
    assert (mid.T, mid.fps_min, mid.fps_max) == (64, 1 / 16, 1.0)
    assert (low.T, low.fps_min, low.fps_max) == (128, 1 / 32, 0.5)
    with pytest.raises(ValueError):
        variant_preset("thor_ultra")


@pytest.mark.parametrize(
    "kw",
    [dict(fps_min=0), dict(fps_min=2, fps_max=1), dict(fps_max=5), dict(T=1), dict(epsilon=0),
     dict(degenerate_policy="loud")],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SamplerConfig(**kw)


def test_overrides():
    cfg = variant_preset("thor_low").with_overrides(fps_max="0.25", fps_min="1/64", T="100")
    assert (cfg.fps_max, cfg.fps_min, cfg.T) == (0.25, 1 / 64, 100)
    with pytest.raises(KeyError):
        cfg.with_overrides(speed="2")


# --- update_fps -------------------------------------------------------------


def test_hand_evaluated_rate():
    cfg = SamplerConfig(fps_min=0.25, fps_max=4.0)
    assert update_fps(FixedW([0.2, 0.8, 0.5]), cfg) == pytest.approx(2.125, abs=1e-7)


def test_window_minimum_gives_max_rate():
    cfg = SamplerConfig(fps_min=0.25, fps_max=4.0)
    assert update_fps(FixedW([0.9, 0.4, 0.7, 0.2]), cfg) == 4.0


def test_window_maximum_gives_near_min_rate():
    cfg = SamplerConfig(fps_min=0.25, fps_max=4.0)
    f = update_fps(FixedW([0.2, 0.4, 0.9]), cfg)
    assert f == pytest.approx(0.25, abs=1e-6)


def test_degenerate_policy():
    w = FixedW([0.5, 0.5, 0.5])
    assert update_fps(w, SamplerConfig(fps_min=0.25)) == 0.25
    assert update_fps(w, SamplerConfig(fps_min=0.25, degenerate_policy="max_rate")) == 4.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=30), st.floats(0, 1))
def test_monotone_response(w, drop):
    """Lowering the current w (others fixed) never lowers the rate.

    A drop that makes the window constant hands over to the degenerate policy,
    which is outside the rate law.
    """
    cfg = SamplerConfig(fps_min=0.25, fps_max=4.0)
    w = np.array(w)
    lower = w.copy()
    lower[-1] -= drop
    assume(np.ptp(lower) >= cfg.epsilon and np.ptp(w) >= cfg.epsilon)
    assert update_fps(FixedW(lower), cfg) >= update_fps(FixedW(w), cfg) - 1e-12


# --- step / scheduler -------------------------------------------------------


def _run_fixed_rate(rate, n):
    cfg = SamplerConfig(T=2, fps_min=rate, fps_max=rate)
    state = SamplerState.initial(cfg)
    v = np.eye(64)[0]
    picks = []
    for k in range(n):
        state, take = step(state, v, k * 250, cfg)
        assert 0.0 <= state.credit <= 1.0
        if take:
            picks.append(k)
    return picks


def test_full_rate_samples_every_frame():
    assert _run_fixed_rate(4.0, 12) == list(range(12))


def test_one_fps_samples_every_fourth_frame():
    assert _run_fixed_rate(1.0, 16) == [0, 4, 8, 12]


def test_constant_stream_min_rate():
    cfg = SamplerConfig(T=4, fps_min=0.25, fps_max=4.0)
    state = SamplerState.initial(cfg)
    v = np.eye(64)[3]
    picks = []
    for k in range(33):
        state, take = step(state, v, k * 250, cfg)
        assert state.current_fps == 0.25
        picks.append(take)
    # credit seeded to 1: frame 0, then one sample per 4 s
    assert [k for k, p in enumerate(picks) if p] == [0, 16, 32]
    assert [k for k, p in enumerate(picks[:16]) if p] == [0]


def test_decreasing_timestamp_rejected():
    cfg = SamplerConfig()
    state = SamplerState.initial(cfg)
    state, _ = step(state, np.eye(64)[0], 1000, cfg)
    with pytest.raises(SequencingError):
        step(state, np.eye(64)[0], 750, cfg)


def test_gap_reseeds_credit():
    cfg = SamplerConfig(T=4, fps_min=0.25, fps_max=4.0)
    state = SamplerState.initial(cfg)
    v = np.eye(64)[0]
    takes = []
    for t in [0, 250, 500, 60_000, 60_250]:
        state, take = step(state, v, t, cfg)
        takes.append(take)
    assert takes == [True, False, False, True, False]


def test_step_change_reaches_max_within_T():
    cfg = SamplerConfig(T=16, fps_min=0.25, fps_max=4.0)
    emb = step_stream(48, 48)
    _, rates = run_temporal(records(96), emb, cfg)
    assert max(rates[48 : 48 + cfg.T]) == cfg.fps_max
    assert rates[47] == cfg.fps_min


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(PRESETS)))
def test_bounds_and_budget(seed, variant):
    rng = np.random.default_rng(seed)
    cfg = PRESETS[variant].with_overrides(T=8)
    n = 200
    # slowly drifting embeddings with occasional jumps
    base = units(rng, 5)
    emb = np.array([base[(k // 37) % 5] + 0.2 * rng.normal(size=64) for k in range(n)])
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    recs = records(n)
    picked, rates = run_temporal(recs, emb, cfg)
    assert all(cfg.fps_min <= f <= cfg.fps_max for f in rates)
    times = [recs[p].timestamp_ms / 1000 for p in picked]
    for a in range(len(times)):
        for b in range(a, len(times)):
            span = times[b] - times[a]
            assert b - a + 1 <= math.ceil(cfg.fps_max * span) + 1


def test_determinism(rng):
    emb = units(rng, 300)
    recs = records(300)
    cfg = PRESETS["thor_high"]
    traces = []
    for _ in range(2):
        picked, rates = run_temporal(recs, emb, cfg)
        traces.append(SampleTrace([TraceEntry(recs[p].frame_id, recs[p].timestamp_ms, rates[p]) for p in picked]).dumps())
    assert traces[0] == traces[1]


def test_run_temporal_length_mismatch(rng):
    with pytest.raises(ValueError):
        run_temporal(records(3), units(rng, 2), SamplerConfig())


# --- uniform baselines ------------------------------------------------------


@pytest.mark.parametrize("period, count, times", [
    (2.0, 30, None),
    (8.0, 8, [0, 8, 16, 24, 32, 40, 48, 56]),
    (17.0, 4, [0, 17, 34, 51]),
])
def test_uniform_over_60s(period, count, times):
    trace = uniform_sampler(records(240), period)
    assert len(trace) == count
    if times is not None:
        assert [e.timestamp_ms / 1000 for e in trace.entries] == times
    assert all(e.crop is None for e in trace.entries)


def test_uniform_first_frame_at_or_after_multiple():
    recs = [FrameRecord(k, t, "t", "r", "P", "A") for k, t in enumerate([0, 900, 2100, 2600, 4000])]
    assert uniform_positions(recs, 2.0) == [0, 2, 4]
    with pytest.raises(ValueError):
        uniform_positions(recs, 0)


def test_uniform_runs_per_participant():
    recs = records(8) + records(8, participant="P02", start_id=8)
    trace = uniform_sampler(recs, 1.0)
    assert trace.frame_ids == [0, 4, 8, 12]


# --- traces -----------------------------------------------------------------


def test_trace_round_trip(tmp_path):
    trace = SampleTrace(
        [TraceEntry(1, 250, 4.0, (1, 2, 3, 4)), TraceEntry(5, 1250, 0.125, None)],
        {"variant": "x", "sampler": {"T": 32}},
        "synthetic-seed:1",
    )
    path = trace.save(tmp_path / "t.jsonl")
    back = SampleTrace.load(path)
    assert back.entries == trace.entries
    assert back.config == trace.config and back.stream == trace.stream
    assert back.dumps() == trace.dumps()
    lines = path.read_text().splitlines()
    assert lines[2] == '{"frame_id":5,"t_ms":1250,"fps":0.125,"crop":null}'


def test_trace_requires_increasing_ids():
    with pytest.raises(ValueError):
        SampleTrace([TraceEntry(2, 0, 1.0), TraceEntry(2, 250, 1.0)])


def test_trace_merge():
    a = SampleTrace([TraceEntry(0, 0, 1.0), TraceEntry(4, 1000, 1.0)])
    b = SampleTrace([TraceEntry(2, 500, 1.0)])
    assert SampleTrace.merge([a, b], {}, "s").frame_ids == [0, 2, 4]


def test_sampler_state_initial():
    state = SamplerState.initial(SamplerConfig(T=5))
    assert isinstance(state.window, SimilarityWindow) and state.credit == 1.0
