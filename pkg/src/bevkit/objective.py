"""Multi-task loss values for heatmap and pose predictions."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import DimensionMismatchError
from .geometry import CameraPose
from .raster import Heatmap


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.25e-6
    m: float = 100.0
    lambda_bev: float = 8.0
    lambda_head: float = 1.0
    lambda_feet: float = 1.0
    lambda_height: float = 0.02
    lambda_angle: float = 2.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be positive")


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, Heatmap) else np.asarray(x, dtype=np.float64)


def heatmap_loss(pred, gt, w: LossWeights | None = None) -> float:
    """Pixel MSE against the amplified target plus an alpha-weighted count error.

    ``pred`` is in amplified units (target is ``m * gt``); the count term
    compares ``sum(pred / m)`` with ``sum(gt)``. Accepts Heatmaps or arrays.
    """
    w = w or LossWeights()
    p, g = _values(pred), _values(gt)
    if p.shape != g.shape:
        raise DimensionMismatchError(f"prediction {p.shape} vs ground truth {g.shape}")
    resid = p - w.m * g
    # sum(resid) / m equals sum(pred / m) - sum(gt) but is exactly 0 on a match
    count_err = float(np.sum(resid)) / w.m
    return float(np.mean(resid**2)) + w.alpha * count_err**2


def heatmap_loss_grad(pred, gt, w: LossWeights | None = None) -> np.ndarray:
    """Analytic gradient of :func:`heatmap_loss` with respect to ``pred``."""
    w = w or LossWeights()
    p, g = _values(pred), _values(gt)
    resid = p - w.m * g
    count_err = float(np.sum(resid)) / w.m
    return 2 * resid / p.size + 2 * w.alpha * count_err / w.m


def pose_loss(pred: CameraPose, gt: CameraPose, w: LossWeights | None = None) -> float:
    """Weighted squared errors of pitch (radians) and height (meters)."""
    w = w or LossWeights()
    d_theta = pred.pitch_rad - gt.pitch_rad
    d_h = pred.height_m - gt.height_m
    return w.lambda_angle * d_theta**2 + w.lambda_height * d_h**2


def total_loss(
    bev: float = 0.0, head: float = 0.0, feet: float = 0.0, pose: float = 0.0, w: LossWeights | None = None
) -> float:
    w = w or LossWeights()
    parts = {"bev": bev, "head": head, "feet": feet, "pose": pose}
    for name, val in parts.items():
        if val < 0:
            raise ValueError(f"{name} loss must be nonnegative, got {val}")
    return w.lambda_bev * bev + w.lambda_head * head + w.lambda_feet * feet + pose
