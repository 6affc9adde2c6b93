"""Duty-cycle energy accounting for the wearable and the phone.

Component powers are bench readings in mWh per reference hour. Network energy
scales with the share of pixels sent, inference energy with the number of
queries; everything else is a fixed draw.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal, Sequence

from .frames import BASE_RATE_FPS, FrameRecord
from .segments import pixel_usage
from .temporal import SampleTrace

DEVICE_DEFAULTS = {
    "thermal_only": 50.0,
    "rgb_only": 60.0,
    "rgb_thermal": 65.0,
    "rgb_network_stream": 80.0,
    "rgb_thermal_model": 69.0,
}
PHONE_DEFAULTS = {
    "patch_input": 31.0,
    "patch_io": 36.5,
    "full_input": 80.0,
    "full_io": 131.0,
}
# queries per reference hour behind the phone readings: one per frame at the
# base capture rate
DEFAULT_REFERENCE_QUERY_RATE = BASE_RATE_FPS * 3600


@dataclass(frozen=True)
class PowerProfile:
    device: dict[str, float] = field(default_factory=lambda: dict(DEVICE_DEFAULTS))
    phone: dict[str, float] = field(default_factory=lambda: dict(PHONE_DEFAULTS))
    reference_query_rate: float = DEFAULT_REFERENCE_QUERY_RATE

    def __post_init__(self) -> None:
        for name, value in {**self.device, **self.phone}.items():
            if not value > 0:
                raise ValueError(f"power for {name!r} must be positive")
        if not self.reference_query_rate > 0:
            raise ValueError("reference_query_rate must be positive")

    @property
    def network_increment(self) -> float:
        """Extra draw of continuous full-frame streaming over the bare RGB sensor."""
        return self.device["rgb_network_stream"] - self.device["rgb_only"]

    @classmethod
    def load(cls, path: str | Path | None = None) -> "PowerProfile":
        parser = configparser.ConfigParser()
        if path is None:
            parser.read_string(
                resources.files("heatsampler.data").joinpath("power_profile.ini").read_text(encoding="utf-8")
            )
        else:
            if not Path(path).exists():
                raise FileNotFoundError(path)
            parser.read(path)
        device = dict(DEVICE_DEFAULTS)
        phone = dict(PHONE_DEFAULTS)
        rate = DEFAULT_REFERENCE_QUERY_RATE
        if parser.has_section("device"):
            device.update({k: parser.getfloat("device", k) for k in parser.options("device")})
        if parser.has_section("phone"):
            opts = parser.options("phone")
            phone.update({k: parser.getfloat("phone", k) for k in opts if k != "reference_query_rate"})
            if "reference_query_rate" in opts:
                rate = parser.getfloat("phone", "reference_query_rate")
        return cls(device, phone, rate)


@dataclass(frozen=True)
class EnergyReport:
    components: dict[str, float]
    label: str = ""

    @property
    def total(self) -> float:
        return sum(self.components.values())

    def to_json(self) -> dict:
        return {"label": self.label, "components": dict(self.components), "total_mwh": self.total}


def device_energy(
    trace: SampleTrace | None,
    base_stream: Sequence[FrameRecord],
    profile: PowerProfile,
    hours: float = 1.0,
    pipeline: Literal["thor", "stream"] = "thor",
    rgb_dims: tuple[int, int] = (956, 720),
    transmit_patches: bool = False,
) -> EnergyReport:
    """Wearable energy over ``hours`` for a sampling trace.

    ``stream``: the RGB sensor plus network transmission scaled by the trace's
    pixel-usage ratio (a full-duty trace is the continuous-stream baseline).
    ``thor``: the measured sensing-plus-on-device-model draw; patches only
    cost network energy when ``transmit_patches`` is set.
    """
    if not hours > 0:
        raise ValueError("hours must be positive")
    ratio = 0.0
    if trace is not None and len(trace):
        ratio = pixel_usage(trace, base_stream, rgb_dims).ratio
    network = ratio * profile.network_increment * hours
    if pipeline == "stream":
        return EnergyReport({"rgb_sensor": profile.device["rgb_only"] * hours, "network": network}, "stream")
    if pipeline == "thor":
        return EnergyReport(
            {
                "sensing_and_model": profile.device["rgb_thermal_model"] * hours,
                "network": network if transmit_patches else 0.0,
            },
            "thor",
        )
    raise ValueError(f"unknown pipeline {pipeline!r}")


def phone_energy(
    trace: SampleTrace | int,
    profile: PowerProfile,
    mode: Literal["patch", "full"] = "patch",
    with_output: bool = True,
) -> EnergyReport:
    """Inference energy: the per-query share of the reading times the query count."""
    key = {("patch", False): "patch_input", ("patch", True): "patch_io",
           ("full", False): "full_input", ("full", True): "full_io"}.get((mode, with_output))
    if key is None:
        raise ValueError(f"unknown mode {mode!r}")
    n = trace if isinstance(trace, int) else len(trace)
    return EnergyReport({key: profile.phone[key] * n / profile.reference_query_rate}, f"phone_{key}")


def reduction_report(ours: EnergyReport | float, baseline: EnergyReport | float) -> float:
    """Percent saved relative to the baseline."""
    ours_total = ours.total if isinstance(ours, EnergyReport) else float(ours)
    base_total = baseline.total if isinstance(baseline, EnergyReport) else float(baseline)
    if not base_total > 0:
        raise ValueError("baseline energy must be positive")
    return (base_total - ours_total) * 100.0 / base_total
