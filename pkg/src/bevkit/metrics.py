"""Localization and risk evaluation: peak extraction, Chamfer, IoU, global-risk MSE."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatchError, FrameMismatchError, UndefinedMetricError
from .geometry import world_from_bev
from .raster import Frame, Heatmap, KeypointSet
from .risk import RiskConfig, global_risk, risk_map, risk_mask

logger = logging.getLogger(__name__)

NMS_WINDOW = 5
PEAK_THRESHOLD = 1e-3


@dataclass(frozen=True)
class LocalizationResult:
    chamfer_m: float
    chamfer_normalized: float


def nms_peaks(values: np.ndarray, threshold: float = PEAK_THRESHOLD, window: int = NMS_WINDOW):
    """Row and column indices of window-local maxima at or above ``threshold``.

    A plateau of equal values inside one window keeps only its
    lexicographically smallest (row, col) pixel.
    """
    half = window // 2
    H, W = values.shape
    padded = np.full((H + 2 * half, W + 2 * half), -np.inf)
    padded[half : half + H, half : half + W] = values
    keep = values >= threshold
    for dr in range(-half, half + 1):
        for dc in range(-half, half + 1):
            if dr == 0 and dc == 0:
                continue
            nb = padded[half + dr : half + dr + H, half + dc : half + dc + W]
            if (dr, dc) < (0, 0):
                keep &= values > nb
            else:
                keep &= values >= nb
    rows, cols = np.nonzero(keep)
    return rows, cols


def extract_locations(bev: Heatmap, threshold: float = PEAK_THRESHOLD, window: int = NMS_WINDOW) -> KeypointSet:
    """World-frame (meters) locations of the NMS peaks of a BEV map."""
    bev.require(Frame.BEV, need_grid=True)
    rows, cols = nms_peaks(bev.values, threshold, window)
    if rows.size == 0:
        return KeypointSet(np.zeros((0, 2)), Frame.WORLD)
    px = np.stack([cols + 0.5, rows + 0.5], axis=1)
    return KeypointSet(world_from_bev(bev.grid).apply(px), Frame.WORLD)


def _world_points(pts) -> np.ndarray:
    if isinstance(pts, KeypointSet):
        if pts.frame is not Frame.WORLD:
            raise FrameMismatchError(f"chamfer needs world points, got {pts.frame.value}")
        return pts.points
    return np.asarray(pts, dtype=np.float64).reshape(-1, 2)


def chamfer(pred, gt, d0_m: float = 1.5) -> LocalizationResult:
    """Symmetric Chamfer distance (m) between predicted and true locations.

    Raises:
        UndefinedMetricError: exactly one of the sets is empty.
    """
    p, g = _world_points(pred), _world_points(gt)
    if len(p) == 0 and len(g) == 0:
        return LocalizationResult(0.0, 0.0)
    if len(p) == 0 or len(g) == 0:
        raise UndefinedMetricError(f"chamfer undefined for {len(p)} predicted vs {len(g)} true points")
    dist = cdist(p, g)
    d = float(np.mean(dist.min(axis=1)) + np.mean(dist.min(axis=0)))
    return LocalizationResult(d, d / (2 * d0_m))


def risk_iou(pred_mask, gt_mask) -> float:
    pred_mask = np.asarray(pred_mask, dtype=bool)
    gt_mask = np.asarray(gt_mask, dtype=bool)
    if pred_mask.shape != gt_mask.shape:
        raise DimensionMismatchError(f"mask shapes differ: {pred_mask.shape} vs {gt_mask.shape}")
    union = np.count_nonzero(pred_mask | gt_mask)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred_mask & gt_mask) / union


def global_risk_mse(pred, gt) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    gt = np.asarray(gt, dtype=np.float64).ravel()
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"length mismatch: {pred.size} vs {gt.size}")
    if pred.size == 0:
        raise ValueError("global risk MSE needs at least one value")
    return float(np.mean((pred - gt) ** 2))


def evaluate_pair(pred: Heatmap, gt: Heatmap, cfg: RiskConfig | None = None, pred_locations=None) -> dict:
    """Score one predicted BEV map against its ground truth.

    ``pred_locations`` (world meters) overrides peak extraction on ``pred``.
    """
    cfg = cfg or RiskConfig()
    pred.require(Frame.BEV, need_grid=True)
    gt.require(Frame.BEV, need_grid=True)
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"prediction {pred.shape} vs ground truth {gt.shape}")
    p_loc = extract_locations(pred) if pred_locations is None else pred_locations
    g_loc = extract_locations(gt)
    rec = {"n_pred": len(_world_points(p_loc)), "n_gt": len(g_loc), "missed": False}
    try:
        loc = chamfer(p_loc, g_loc, cfg.d0_m)
        rec["chamfer_m"] = loc.chamfer_m
        rec["chamfer_normalized"] = loc.chamfer_normalized
    except UndefinedMetricError:
        rec.update(missed=True, chamfer_m=None, chamfer_normalized=None)
    p_risk, g_risk = risk_map(pred, cfg), risk_map(gt, cfg)
    rec["iou"] = risk_iou(risk_mask(p_risk, cfg), risk_mask(g_risk, cfg))
    rec["global_risk_pred"] = global_risk(pred, cfg, p_risk)
    rec["global_risk_gt"] = global_risk(gt, cfg, g_risk)
    rec["global_risk_sq_err"] = (rec["global_risk_pred"] - rec["global_risk_gt"]) ** 2
    return rec


def aggregate(records: list[dict]) -> dict:
    """Means over images; missed images are left out of the Chamfer means."""
    hit = [r for r in records if not r["missed"]]
    out = {
        "n_images": len(records),
        "n_missed": len(records) - len(hit),
        "chamfer_m": float(np.mean([r["chamfer_m"] for r in hit])) if hit else None,
        "chamfer_normalized": float(np.mean([r["chamfer_normalized"] for r in hit])) if hit else None,
        "iou": float(np.mean([r["iou"] for r in records])) if records else None,
        "global_risk_mse": None,
    }
    if records:
        out["global_risk_mse"] = global_risk_mse(
            [r["global_risk_pred"] for r in records], [r["global_risk_gt"] for r in records]
        )
    return out


def evaluate_batch(pairs, cfg: RiskConfig | None = None, jobs: int = 1) -> dict:
    """Evaluate (name, pred, gt[, pred_locations]) tuples; results keep input order."""
    cfg = cfg or RiskConfig()

    def one(item):
        name, pred, gt, *rest = item
        rec = evaluate_pair(pred, gt, cfg, rest[0] if rest else None)
        logger.debug("evaluated %s: %s", name, rec)
        return {"name": name, **rec}

    pairs = list(pairs)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(one, pairs))
    else:
        records = [one(p) for p in pairs]
    return {"images": records, "aggregate": aggregate(records)}
