from __future__ import annotations

import pytest

from heatsampler.energy import (
    PowerProfile,
    device_energy,
    phone_energy,
    reduction_report,
)
from heatsampler.frames import FrameRecord
from heatsampler.temporal import SampleTrace, TraceEntry

PROFILE = PowerProfile.load()


def stream(n=40):
    return [FrameRecord(k, 250 * k, "t", "r", "P01", "A") for k in range(n)]


def trace(recs, crop=None):
    return SampleTrace([TraceEntry(r.frame_id, r.timestamp_ms, 4.0, crop) for r in recs])


def test_bundled_profile_values():
    assert PROFILE.device == {
        "thermal_only": 50, "rgb_only": 60, "rgb_thermal": 65,
        "rgb_network_stream": 80, "rgb_thermal_model": 69,
    }
    assert PROFILE.phone == {"patch_input": 31, "patch_io": 36.5, "full_input": 80, "full_io": 131}
    assert PROFILE.reference_query_rate == 14400


def test_profile_file_overrides(tmp_path):
    path = tmp_path / "p.ini"
    path.write_text("[device]\nrgb_only = 55\n[phone]\nreference_query_rate = 3600\n")
    prof = PowerProfile.load(path)
    assert prof.device["rgb_only"] == 55 and prof.device["rgb_thermal_model"] == 69
    assert prof.reference_query_rate == 3600
    with pytest.raises(FileNotFoundError):
        PowerProfile.load(tmp_path / "missing.ini")


def test_profile_rejects_non_positive():
    with pytest.raises(ValueError):
        PowerProfile({**PROFILE.device, "rgb_only": 0}, PROFILE.phone)


def test_continuous_stream_is_80():
    recs = stream()
    assert device_energy(trace(recs), recs, PROFILE, 1.0, "stream").total == 80.0


def test_thor_device_is_69():
    recs = stream()
    rep = device_energy(trace(recs[::8], (0, 0, 100, 100)), recs, PROFILE, 1.0, "thor")
    assert rep.total == 69.0
    assert reduction_report(rep, 80.0) == 13.75


def test_empty_trace_has_no_network_energy():
    recs = stream()
    rep = device_energy(SampleTrace([]), recs, PROFILE, 1.0, "stream")
    assert rep.components["network"] == 0.0 and rep.components["rgb_sensor"] == 60.0
    rep = device_energy(SampleTrace([]), recs, PROFILE, 2.0, "thor", transmit_patches=True)
    assert rep.components == {"sensing_and_model": 138.0, "network": 0.0}


def test_energy_monotone_in_pixels():
    recs = stream()
    small = device_energy(trace(recs[::4], (0, 0, 50, 50)), recs, PROFILE, 1.0, "stream")
    big = device_energy(trace(recs[::2], (0, 0, 50, 50)), recs, PROFILE, 1.0, "stream")
    assert big.total >= small.total
    assert big.total == sum(big.components.values())


def test_device_energy_errors():
    with pytest.raises(ValueError):
        device_energy(None, stream(), PROFILE, 0.0)
    with pytest.raises(ValueError):
        device_energy(None, stream(), PROFILE, 1.0, "satellite")


def test_phone_reference_hour():
    n = int(PROFILE.reference_query_rate)
    full = phone_energy(n, PROFILE, "full", True)
    patch = phone_energy(n, PROFILE, "patch", True)
    assert full.total == 131.0 and patch.total == 36.5
    assert phone_energy(n, PROFILE, "patch", False).total == 31.0
    assert phone_energy(n, PROFILE, "full", False).total == 80.0
    assert round(reduction_report(patch, full), 1) == 72.1
    assert phone_energy(SampleTrace([]), PROFILE, "full").total == 0.0
    with pytest.raises(ValueError):
        phone_energy(1, PROFILE, "thumbnail")


def test_reduction_report():
    assert reduction_report(80.0, 80.0) == 0.0
    assert reduction_report(69, 80) == 13.75
    assert reduction_report(36.5, 131) == pytest.approx(72.137, abs=1e-3)
    with pytest.raises(ValueError):
        reduction_report(1.0, 0.0)
