"""Bilinear homography warps from image view to BEV, single-plane and grouped."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from .errors import DimensionMismatchError
from .geometry import (
    BevGrid,
    CameraIntrinsics,
    CameraPose,
    Homography,
    image_from_bev,
    rescale_intrinsics,
)
from .raster import Frame, Heatmap

DEFAULT_PLANE_HEIGHTS = (1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8)


def bilinear_sample(values: np.ndarray, u, v) -> np.ndarray:
    """Sample a raster at continuous pixel coordinates, reading 0 outside it.

    Pixel (row j, col i) is centered at (u, v) = (i + 0.5, j + 0.5).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    H, W = values.shape
    x = u - 0.5
    y = v - 0.5
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    out = np.zeros(np.broadcast(u, v).shape, dtype=np.float64)
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            r = y0 + dy
            c = x0 + dx
            ok = (r >= 0) & (r < H) & (c >= 0) & (c < W)
            tap = np.where(ok, values[np.clip(r, 0, H - 1), np.clip(c, 0, W - 1)], 0.0)
            out += wy * wx * tap
    return out


def warp_values(src: np.ndarray, dst_to_src: Homography, out_shape: tuple[int, int]) -> np.ndarray:
    """Pull-warp ``src`` onto an ``out_shape`` raster.

    Each output pixel center is mapped through ``dst_to_src`` and the source is
    bilinearly sampled there. Samples that fall outside the source, or whose
    homogeneous coordinate is not positive, read as 0.
    """
    H, W = out_shape
    vv, uu = np.mgrid[0:H, 0:W]
    pts = np.stack([uu.ravel() + 0.5, vv.ravel() + 0.5], axis=1)
    ph = dst_to_src.apply_h(pts)
    ahead = ph[:, 2] > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        su = np.where(ahead, ph[:, 0] / ph[:, 2], -1.0)
        sv = np.where(ahead, ph[:, 1] / ph[:, 2], -1.0)
    su = np.where(np.isfinite(su), su, -1.0)
    sv = np.where(np.isfinite(sv), sv, -1.0)
    return bilinear_sample(src, su, sv).reshape(H, W)


def warp_to_bev(
    hm: Heatmap, intr: CameraIntrinsics, pose: CameraPose, grid: BevGrid, plane_height_m: float = 0.0
) -> Heatmap:
    """Resample an image-view map into BEV through the plane z = plane_height_m.

    ``intr`` is rescaled to the map size when the map is a resized feature map.
    Warping does not conserve mass.
    """
    hm.require(Frame.IMAGE)
    intr = _match_intrinsics(intr, hm.shape)
    hom = image_from_bev(intr, pose, grid, plane_height_m)
    return Heatmap(warp_values(hm.values, hom, grid.shape), Frame.BEV, grid)


def _match_intrinsics(intr: CameraIntrinsics, shape) -> CameraIntrinsics:
    H, W = shape
    if (intr.image_h, intr.image_w) == (H, W):
        return intr
    return rescale_intrinsics(intr, W, H)


@dataclass(frozen=True)
class PlaneStack:
    plane_heights_m: tuple[float, ...] = DEFAULT_PLANE_HEIGHTS

    def __post_init__(self):
        hs = tuple(float(h) for h in self.plane_heights_m)
        if not hs:
            raise ValueError("plane stack is empty")
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise ValueError(f"plane heights must be strictly increasing, got {hs}")
        object.__setattr__(self, "plane_heights_m", hs)

    def __len__(self):
        return len(self.plane_heights_m)

    def check_below(self, pose: CameraPose):
        if self.plane_heights_m[-1] >= pose.height_m:
            raise ValueError(
                f"plane at {self.plane_heights_m[-1]} m is not below camera at {pose.height_m} m"
            )


@dataclass(frozen=True)
class AttentionWeights:
    """Per-plane weight maps of shape (n_planes, H, W)."""

    weights: np.ndarray
    normalized: bool = field(default=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 3:
            raise ValueError(f"attention weights must be (planes, H, W), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("attention weights must be finite")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n_planes: int, shape) -> "AttentionWeights":
        return cls(np.full((n_planes, *shape), 1.0 / n_planes), normalized=True)

    @classmethod
    def one_hot(cls, n_planes: int, shape, index: int) -> "AttentionWeights":
        w = np.zeros((n_planes, *shape))
        w[index] = 1.0
        return cls(w, normalized=True)


def softmax_normalize(attn: AttentionWeights) -> AttentionWeights:
    """Softmax across the plane axis at every BEV pixel."""
    return AttentionWeights(softmax(attn.weights, axis=0), normalized=True)


def group_warp_heads(
    head_map: Heatmap,
    intr: CameraIntrinsics,
    pose: CameraPose,
    grid: BevGrid,
    planes: PlaneStack | None = None,
    attn: AttentionWeights | None = None,
) -> Heatmap:
    """Warp a head map through every head plane and blend with attention.

    Per-plane warps are summed in plane order. Without ``attn`` the planes
    are weighted uniformly.
    """
    planes = planes or PlaneStack()
    head_map.require(Frame.IMAGE)
    planes.check_below(pose)
    if attn is None:
        attn = AttentionWeights.uniform(len(planes), grid.shape)
    if attn.weights.shape != (len(planes), *grid.shape):
        raise DimensionMismatchError(
            f"attention {attn.weights.shape} does not match {len(planes)} planes on grid {grid.shape}"
        )
    if not attn.normalized:
        raise ValueError("attention weights must be softmax-normalized first")
    out = np.zeros(grid.shape)
    for i, h0 in enumerate(planes.plane_heights_m):
        warped = warp_to_bev(head_map, intr, pose, grid, h0).values
        out += warped * attn.weights[i]
    return Heatmap(out, Frame.BEV, grid)
