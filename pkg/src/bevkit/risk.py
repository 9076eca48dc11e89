"""Local risk maps, violation masks and the global risk density."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import FrameMismatchError, KernelTooLargeError
from .raster import Frame, Heatmap, KeypointSet
from .warp import bilinear_sample

# kernel radii above this (in px) go through the FFT path under method="auto"
FFT_RADIUS_THRESHOLD = 64
# Risk sits on exact integer plateaus wherever whole Gaussians fall inside the
# disk; f32 grid files perturb those by ~1e-7, so thresholds get this slack.
THRESHOLD_TOL = 1e-5


@dataclass(frozen=True)
class RiskConfig:
    d0_m: float = 1.5
    r0: float = 2.0

    def __post_init__(self):
        if not self.d0_m > 0:
            raise ValueError(f"safe distance must be positive, got {self.d0_m}")
        if not self.r0 >= 1:
            raise ValueError(f"risk threshold must be >= 1, got {self.r0}")

    def radius_px(self, scale_m_per_px: float) -> float:
        return self.d0_m / scale_m_per_px


def _half_widths(r: float) -> list[tuple[int, int]]:
    """(dy, w) pairs: offsets (dy, dx) with |dx| <= w are exactly those with dx^2 + dy^2 <= r^2."""
    r2 = r * r
    R = math.floor(r)
    while R * R > r2:
        R -= 1
    rows = []
    for dy in range(-R, R + 1):
        w = math.floor(math.sqrt(max(r2 - dy * dy, 0.0)))
        while (w + 1) ** 2 + dy * dy <= r2:
            w += 1
        while w > 0 and w * w + dy * dy > r2:
            w -= 1
        rows.append((dy, w))
    return rows


def disk_kernel(r: float) -> np.ndarray:
    """Indicator of integer offsets within distance r of the center pixel."""
    R = max(abs(dy) for dy, _ in _half_widths(r))
    yy, xx = np.mgrid[-R : R + 1, -R : R + 1]
    return (xx * xx + yy * yy <= r * r).astype(np.float64)


def _disk_sum_direct(m: np.ndarray, r: float) -> np.ndarray:
    H, W = m.shape
    csum = np.zeros((H, W + 1))
    np.cumsum(m, axis=1, out=csum[:, 1:])
    cols = np.arange(W)
    boxes = {}
    out = np.zeros_like(m)
    for dy, w in _half_widths(r):
        if w not in boxes:
            hi = np.minimum(cols + w + 1, W)
            lo = np.maximum(cols - w, 0)
            boxes[w] = csum[:, hi] - csum[:, lo]
        box = boxes[w]
        if dy >= 0:
            out[: H - dy] += box[dy:]
        else:
            out[-dy:] += box[: H + dy]
    return out


def _disk_sum_fft(m: np.ndarray, r: float) -> np.ndarray:
    out = fftconvolve(m, disk_kernel(r), mode="same")
    if np.array_equal(m, np.round(m)):
        # integer maps have integer disk sums; FFT noise is far below 0.5
        return np.round(out) + 0.0
    return np.maximum(out, 0.0)


def disk_sum(m: np.ndarray, r: float, method: str = "auto") -> np.ndarray:
    """Sum of ``m`` over a pixel-center disk of radius r around every pixel.

    ``method`` is "direct", "fft" or "auto" (direct for radii up to
    FFT_RADIUS_THRESHOLD).
    """
    if method == "auto":
        method = "direct" if r <= FFT_RADIUS_THRESHOLD else "fft"
    if method == "direct":
        return _disk_sum_direct(m, r)
    if method == "fft":
        return _disk_sum_fft(m, r)
    raise ValueError(f"unknown convolution method {method!r}")


def risk_map(bev: Heatmap, cfg: RiskConfig | None = None, method: str = "auto") -> Heatmap:
    """Count of people within d0 of every BEV pixel.

    Raises:
        KernelTooLargeError: the kernel radius d0 / s exceeds the raster.
    """
    cfg = cfg or RiskConfig()
    bev.require(Frame.BEV, need_grid=True)
    r = cfg.radius_px(bev.grid.scale_m_per_px)
    if r > max(bev.shape):
        raise KernelTooLargeError(f"kernel radius {r:.1f} px exceeds raster {bev.shape}")
    return Heatmap(disk_sum(bev.values, r, method), Frame.BEV, bev.grid)


def risk_mask(risk: Heatmap, cfg: RiskConfig | None = None) -> np.ndarray:
    """Boolean mask of pixels whose risk reaches r0."""
    cfg = cfg or RiskConfig()
    risk.require(Frame.BEV)
    return risk.values >= cfg.r0 - THRESHOLD_TOL


def global_risk(bev: Heatmap, cfg: RiskConfig | None = None, risk: Heatmap | None = None) -> float:
    """People mass inside the violation mask per square meter of BEV area."""
    cfg = cfg or RiskConfig()
    bev.require(Frame.BEV, need_grid=True)
    risk = risk if risk is not None else risk_map(bev, cfg)
    mask = risk_mask(risk, cfg)
    return float(np.sum(bev.values[mask])) / bev.grid.area_m2


def individual_risks(persons: KeypointSet, risk: Heatmap) -> np.ndarray:
    """Local risk sampled at each person's BEV location."""
    if persons.frame is not Frame.BEV:
        raise FrameMismatchError("person locations must be BEV keypoints")
    risk.require(Frame.BEV)
    if len(persons) == 0:
        return np.zeros(0)
    return bilinear_sample(risk.values, persons.points[:, 0], persons.points[:, 1])


def compliance_rate(risks, threshold: float = 2.0) -> float:
    """Fraction of persons whose individual risk stays below ``threshold``."""
    risks = np.asarray(risks, dtype=np.float64)
    if risks.size == 0:
        return float("nan")
    return float(np.mean(risks < threshold - THRESHOLD_TOL))
