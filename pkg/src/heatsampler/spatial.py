"""Thermal-guided region-of-interest cropping.

Pipeline per frame: Otsu threshold on the thermal grid, binary heat mask and
its bounding box, left/right/spanning classification against the vertical
center line, mapping into RGB pixel space, directional margin growth, crop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .frames import RgbFrame, ThermalFrame, encode_rgb

Box = tuple[int, int, int, int]  # x, y, w, h
Side = Literal["right_of_center", "left_of_center", "spanning", "empty"]

OTSU_BINS = 256
DEFAULT_MARGIN_PX = 20
# below skin temperature nothing in frame is treated as body heat
MIN_BODY_HEAT_C = 30.0


class DegenerateThresholdError(ValueError):
    """The frame has a single temperature level, so no threshold exists."""


@dataclass(frozen=True, eq=False)
class HeatMask:
    bits: np.ndarray  # (height, width) bool
    bbox: Box | None

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def empty(self) -> bool:
        return self.bbox is None


@dataclass(frozen=True)
class Calibration:
    scale_x: float
    scale_y: float
    offset_x: float = 0.0
    offset_y: float = 0.0

    def __post_init__(self) -> None:
        if not (self.scale_x > 0 and self.scale_y > 0):
            raise ValueError("calibration scales must be positive")

    @classmethod
    def full_frame(cls, thermal_dims: tuple[int, int], rgb_dims: tuple[int, int]) -> "Calibration":
        """Stretch the thermal grid over the whole RGB frame; dims are (width, height)."""
        return cls(rgb_dims[0] / thermal_dims[0], rgb_dims[1] / thermal_dims[1])


@dataclass(frozen=True, eq=False)
class Patch:
    frame_id: int
    box: Box
    pixels: np.ndarray

    def filename(self) -> str:
        x, y, w, h = self.box
        return f"{self.frame_id}_{x}_{y}_{w}_{h}.ppm"

    def save(self, directory: str | Path) -> Path:
        path = Path(directory) / self.filename()
        path.write_bytes(encode_rgb(RgbFrame(0, self.pixels)))
        return path


# --- Otsu --------------------------------------------------------------------


def otsu_histogram(temps: np.ndarray) -> tuple[np.ndarray, float, float]:
    """256-bin histogram over the frame's own [min, max]; returns (counts, lo, bin width)."""
    t = np.asarray(temps, dtype=np.float64).ravel()
    quantized = np.unique(np.rint(t * 100.0))
    if quantized.size < 2:
        raise DegenerateThresholdError("constant frame has no Otsu threshold")
    lo, hi = float(t.min()), float(t.max())
    width = (hi - lo) / OTSU_BINS
    idx = np.clip(np.floor((t - lo) / width).astype(np.int64), 0, OTSU_BINS - 1)
    return np.bincount(idx, minlength=OTSU_BINS), lo, width


def otsu_bin(hist: np.ndarray) -> int:
    """Cut index k in 1..255 (class 0 = bins < k) maximizing between-class variance.

    Compared as exact rationals: N^2 * var_between = (N*S0 - n0*S)^2 / (n0*n1),
    so near-ties cannot flip on rounding. Ties go to the lower cut.
    """
    counts = [int(c) for c in hist]
    n_total = sum(counts)
    s_total = sum(b * c for b, c in enumerate(counts))
    best_k, best_num, best_den = 1, -1, 1
    n0 = s0 = 0
    for k in range(1, len(counts)):
        n0 += counts[k - 1]
        s0 += (k - 1) * counts[k - 1]
        n1 = n_total - n0
        if n0 == 0 or n1 == 0:
            num, den = 0, 1
        else:
            num, den = (n_total * s0 - n0 * s_total) ** 2, n0 * n1
        if num * best_den > best_num * den:
            best_k, best_num, best_den = k, num, den
    return best_k


def otsu_threshold(frame: ThermalFrame | np.ndarray) -> float:
    temps = frame.temps if isinstance(frame, ThermalFrame) else frame
    hist, lo, width = otsu_histogram(temps)
    return lo + otsu_bin(hist) * width


# --- mask and boxes ----------------------------------------------------------


def bbox_of(bits: np.ndarray) -> Box | None:
    ys, xs = np.nonzero(bits)
    if xs.size == 0:
        return None
    x0, x1, y0, y1 = int(xs.min()), int(xs.max()), int(ys.min()), int(ys.max())
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def heat_mask(frame: ThermalFrame | np.ndarray, threshold: float) -> HeatMask:
    temps = frame.temps if isinstance(frame, ThermalFrame) else np.asarray(frame)
    bits = temps > threshold
    return HeatMask(bits, bbox_of(bits))


def classify_mask(mask: HeatMask) -> Side:
    if mask.bbox is None:
        return "empty"
    x, _, w, _ = mask.bbox
    center = mask.width / 2
    if x >= center:
        return "right_of_center"
    if x + w <= center:
        return "left_of_center"
    return "spanning"


def _clamp(x0: float, y0: float, x1: float, y1: float, bounds: tuple[int, int]) -> Box | None:
    width, height = bounds
    x0, y0 = max(0, int(x0)), max(0, int(y0))
    x1, y1 = min(width, int(x1)), min(height, int(y1))
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, y0, x1 - x0, y1 - y0)


def expand_box(
    bbox: Box | None, side: Side, margin_px: int, frame_bounds: tuple[int, int]
) -> Box | None:
    """Grow a box by ``margin_px`` upward plus toward the frame's other half.

    right_of_center grows up and left, left_of_center up and right, spanning
    up, left and right. Clamped to ``frame_bounds`` (width, height). Returns
    None for an empty box.
    """
    if margin_px < 0:
        raise ValueError("margin must be non-negative")
    if bbox is None or side == "empty":
        return None
    x, y, w, h = bbox
    x0, y0, x1, y1 = x, y - margin_px, x + w, y + h
    if side in ("right_of_center", "spanning"):
        x0 -= margin_px
    if side in ("left_of_center", "spanning"):
        x1 += margin_px
    return _clamp(x0, y0, x1, y1, frame_bounds)


def map_to_rgb(bbox_thermal: Box | None, calibration: Calibration, rgb_bounds: tuple[int, int]) -> Box | None:
    """Scale/offset a thermal-pixel box into RGB pixels, rounding outward."""
    if bbox_thermal is None:
        return None
    x, y, w, h = bbox_thermal
    c = calibration
    x0 = math.floor(x * c.scale_x + c.offset_x)
    y0 = math.floor(y * c.scale_y + c.offset_y)
    x1 = math.ceil((x + w) * c.scale_x + c.offset_x)
    y1 = math.ceil((y + h) * c.scale_y + c.offset_y)
    return _clamp(x0, y0, x1, y1, rgb_bounds)


def crop_box(
    thermal: ThermalFrame | np.ndarray,
    rgb_bounds: tuple[int, int],
    calibration: Calibration,
    margin_px: int = DEFAULT_MARGIN_PX,
    min_heat_c: float | None = MIN_BODY_HEAT_C,
) -> Box | None:
    """RGB crop box for a thermal frame, or None when there is nothing to crop.

    A frame whose hottest pixel does not exceed ``min_heat_c`` holds no body
    heat and yields None; pass ``min_heat_c=None`` to disable that check.
    """
    temps = thermal.temps if isinstance(thermal, ThermalFrame) else np.asarray(thermal)
    if min_heat_c is not None and float(temps.max()) <= min_heat_c:
        return None
    try:
        threshold = otsu_threshold(thermal)
    except DegenerateThresholdError:
        return None
    mask = heat_mask(thermal, threshold)
    side = classify_mask(mask)
    mapped = map_to_rgb(mask.bbox, calibration, rgb_bounds)
    if mapped is None:
        return None
    return expand_box(mapped, side, margin_px, rgb_bounds)


def crop(rgb: RgbFrame, box: Box) -> np.ndarray:
    x, y, w, h = box
    return rgb.pixels[y : y + h, x : x + w].copy()


def extract_patch(
    rgb_frame: RgbFrame,
    thermal_frame: ThermalFrame,
    calibration: Calibration | None = None,
    margin_px: int = DEFAULT_MARGIN_PX,
    frame_id: int = 0,
    min_heat_c: float | None = MIN_BODY_HEAT_C,
) -> Patch | None:
    bounds = (rgb_frame.width, rgb_frame.height)
    if calibration is None:
        calibration = Calibration.full_frame((thermal_frame.width, thermal_frame.height), bounds)
    box = crop_box(thermal_frame, bounds, calibration, margin_px, min_heat_c)
    if box is None:
        return None
    return Patch(frame_id, box, crop(rgb_frame, box))
