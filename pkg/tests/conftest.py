from __future__ import annotations

import numpy as np
import pytest

from heatsampler.pipeline import Corpus, SpatialConfig, run_sampler, run_uniform
from heatsampler.synth import ParticipantStream, reference_spec, render_corpus
from heatsampler.temporal import PRESETS, UNIFORM_PERIODS_S


@pytest.fixture(scope="session")
def reference_corpus() -> Corpus:
    return Corpus.from_spec(reference_spec(42))


@pytest.fixture(scope="session")
def clean_streams() -> list[ParticipantStream]:
    """Noise-free reference corpus, with blend midpoints per participant."""
    return render_corpus(reference_spec(42, noise_sigma=0.0))


@pytest.fixture(scope="session")
def reference_traces(reference_corpus):
    """Every preset and uniform baseline over the seed-42 reference corpus."""
    traces = {}
    for name, cfg in PRESETS.items():
        traces[name] = run_sampler(reference_corpus, cfg, SpatialConfig(), name=name)
    for name, period in UNIFORM_PERIODS_S.items():
        traces[name] = run_uniform(reference_corpus, period, name)
    return traces


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


# --- acceptance reporting ----------------------------------------------------

ACCEPTANCE: dict[str, list[tuple[bool, str]]] = {}


@pytest.fixture
def acceptance():
    """record(ac, ok, detail): note one check of a criterion and return ok."""

    def record(ac: str, ok: bool, detail: str) -> bool:
        ok = bool(ok)
        ACCEPTANCE.setdefault(ac, []).append((ok, detail))
        print(f"{ac} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for ac in sorted(ACCEPTANCE, key=lambda k: int(k.split("-")[1])):
        parts = ACCEPTANCE[ac]
        ok = all(p for p, _ in parts)
        terminalreporter.write_line(f"{ac} {'PASS' if ok else 'FAIL'}: " + "; ".join(d for _, d in parts))
