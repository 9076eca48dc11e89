"""Keypoint sets, heatmaps and density rasterization."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FrameMismatchError
from .geometry import BevGrid, CameraIntrinsics, CameraPose, image_from_bev

KERNEL_TRUNCATE = 4.0


class Frame(enum.Enum):
    IMAGE = "image"
    BEV = "bev"
    # ground-plane meters; point sets only, never rasterized
    WORLD = "world"


class RasterMode(enum.Enum):
    GAUSSIAN = "gaussian"
    IMPULSE = "impulse"


@dataclass(frozen=True)
class RasterConfig:
    sigma_px: float = 5.0
    mode: RasterMode = RasterMode.GAUSSIAN
    normalize_mass: bool = True

    def __post_init__(self):
        if not self.sigma_px > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma_px}")
        object.__setattr__(self, "mode", RasterMode(self.mode))


@dataclass(frozen=True)
class KeypointSet:
    """(N, 2) array of (u, v) pixel coordinates tagged with their frame.

    ``in_roi`` marks points that fall inside the raster they belong to; it is
    only filled in by projections that can leave the raster.
    """

    points: np.ndarray
    frame: Frame
    in_roi: np.ndarray | None = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise ValueError("keypoints must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "frame", Frame(self.frame))
        if self.in_roi is not None:
            flags = np.asarray(self.in_roi, dtype=bool).reshape(-1)
            if flags.shape[0] != pts.shape[0]:
                raise ValueError("in_roi length differs from point count")
            object.__setattr__(self, "in_roi", flags)

    def __len__(self):
        return self.points.shape[0]

    def inside(self) -> "KeypointSet":
        """Subset flagged as inside the raster (all points when unflagged)."""
        if self.in_roi is None:
            return self
        return KeypointSet(self.points[self.in_roi], self.frame)


@dataclass(frozen=True)
class Heatmap:
    """Nonnegative raster in image view or BEV. BEV maps carry their grid."""

    values: np.ndarray
    frame: Frame
    grid: BevGrid | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] == 0 or vals.shape[1] == 0:
            raise ValueError(f"heatmap must be a nonempty 2D array, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("heatmap values must be finite")
        if np.any(vals < 0):
            raise ValueError("heatmap values must be nonnegative")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "frame", Frame(self.frame))
        if self.frame is Frame.WORLD:
            raise FrameMismatchError("heatmaps live in image view or BEV")
        if self.grid is not None:
            if self.frame is not Frame.BEV:
                raise FrameMismatchError("only BEV heatmaps carry a grid")
            if self.grid.shape != vals.shape:
                raise ValueError(f"grid {self.grid.shape} does not match values {vals.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def require(self, frame: Frame, need_grid: bool = False) -> "Heatmap":
        if self.frame is not frame:
            raise FrameMismatchError(f"expected a {frame.value} heatmap, got {self.frame.value}")
        if need_grid and self.grid is None:
            raise ValueError("BEV heatmap has no grid attached")
        return self


def _splat_gaussian(out, u, v, sigma, normalize):
    H, W = out.shape
    rad = KERNEL_TRUNCATE * sigma
    c0 = max(math.ceil(u - 0.5 - rad), 0)
    c1 = min(math.floor(u - 0.5 + rad), W - 1)
    r0 = max(math.ceil(v - 0.5 - rad), 0)
    r1 = min(math.floor(v - 0.5 + rad), H - 1)
    if c0 > c1 or r0 > r1:
        return
    dx = np.arange(c0, c1 + 1) + 0.5 - u
    dy = np.arange(r0, r1 + 1) + 0.5 - v
    k = np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) / (2 * sigma**2))
    k /= k.sum() if normalize else 2 * math.pi * sigma**2
    out[r0 : r1 + 1, c0 : c1 + 1] += k


def _splat_impulse(out, u, v, normalize):
    H, W = out.shape
    x, y = u - 0.5, v - 0.5
    x0, y0 = math.floor(x), math.floor(y)
    fx, fy = x - x0, y - y0
    taps = [
        (y0, x0, (1 - fy) * (1 - fx)),
        (y0, x0 + 1, (1 - fy) * fx),
        (y0 + 1, x0, fy * (1 - fx)),
        (y0 + 1, x0 + 1, fy * fx),
    ]
    taps = [(r, c, w) for r, c, w in taps if 0 <= r < H and 0 <= c < W and w > 0]
    total = sum(w for _, _, w in taps)
    if total == 0:
        return
    for r, c, w in taps:
        out[r, c] += w / total if normalize else w


def rasterize(
    points: KeypointSet,
    shape: tuple[int, int],
    cfg: RasterConfig | None = None,
    *,
    frame: Frame | None = None,
    grid: BevGrid | None = None,
) -> Heatmap:
    """Render keypoints into a density heatmap of the given (H, W) shape.

    Points outside [0, W) x [0, H) contribute nothing. Inside points each add
    unit mass when ``cfg.normalize_mass`` is set, with the Gaussian truncated
    at 4 sigma and renormalized over the pixels that remain in bounds.

    Args:
        points: keypoints in pixel coordinates of the target raster.
        shape: (H, W) of the output.
        cfg: kernel settings; defaults to a sigma = 5 px normalized Gaussian.
        frame: expected frame of the output. Defaults to BEV when ``grid`` is
            given and to the keypoints' own frame otherwise.
        grid: BEV grid to attach to the result.

    Raises:
        FrameMismatchError: keypoints and target frame disagree.
    """
    cfg = cfg or RasterConfig()
    H, W = int(shape[0]), int(shape[1])
    if H <= 0 or W <= 0:
        raise ValueError(f"raster dims must be positive, got {H}x{W}")
    target = Frame(frame) if frame is not None else (Frame.BEV if grid is not None else points.frame)
    if points.frame is not target or target is Frame.WORLD:
        raise FrameMismatchError(
            f"cannot rasterize {points.frame.value} keypoints into a {target.value} heatmap"
        )
    if grid is not None and grid.shape != (H, W):
        raise ValueError(f"grid {grid.shape} does not match raster {(H, W)}")
    out = np.zeros((H, W), dtype=np.float64)
    for u, v in points.points:
        if not (0 <= u < W and 0 <= v < H):
            continue
        if cfg.mode is RasterMode.GAUSSIAN:
            _splat_gaussian(out, u, v, cfg.sigma_px, cfg.normalize_mass)
        else:
            _splat_impulse(out, u, v, cfg.normalize_mass)
    return Heatmap(out, target, grid if target is Frame.BEV else None)


def bev_points_from_feet(
    feet: KeypointSet, intr: CameraIntrinsics, pose: CameraPose, grid: BevGrid
) -> KeypointSet:
    """Project image-view feet keypoints onto the BEV raster.

    Points landing outside the raster, or on the far side of the horizon,
    are kept and flagged in ``in_roi``.
    """
    if feet.frame is not Frame.IMAGE:
        raise FrameMismatchError("feet keypoints must be in image view")
    if len(feet) == 0:
        return KeypointSet(np.zeros((0, 2)), Frame.BEV, np.zeros(0, dtype=bool))
    hom = image_from_bev(intr, pose, grid, 0.0).inverse()
    ph = hom.apply_h(feet.points)
    # third coordinate is 1/depth: negative above the horizon
    ahead = ph[:, 2] > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        pts = ph[:, :2] / ph[:, 2:3]
    pts = np.where(np.isfinite(pts), pts, -1.0)
    H, W = grid.shape
    inside = ahead & (pts[:, 0] >= 0) & (pts[:, 0] < W) & (pts[:, 1] >= 0) & (pts[:, 1] < H)
    return KeypointSet(pts, Frame.BEV, inside)


def count(hm: Heatmap) -> float:
    """Total mass of a heatmap, i.e. the people count of a density map."""
    return float(np.sum(hm.values))
