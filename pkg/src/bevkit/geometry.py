"""Camera geometry: homographies between image pixels, the ground plane and BEV pixels.

Coordinate conventions
----------------------
World frame: origin at the camera's foot point on the ground (z = 0), camera
at (0, 0, h), looking along +x and pitched down by ``pitch_rad`` below the
horizon. Yaw and roll are zero.

Image and BEV rasters use continuous pixel coordinates (u, v): u runs along
columns, v along rows, and pixel (row j, col i) covers [i, i+1) x [j, j+1),
so its center sits at (i + 0.5, j + 0.5).

The BEV raster is anchored so that its center (W/2, H/2) lands on the ground
point seen at the principal point, and its bottom-center (W/2, H) lands on
the ground point seen at the bottom-center image pixel (u_c, image_h).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, DegeneratePlaneError


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels, without skew."""

    f_u: float
    f_v: float
    u_c: float
    v_c: float
    image_w: int
    image_h: int

    def __post_init__(self):
        if not (self.f_u > 0 and self.f_v > 0):
            raise ValueError(f"focal lengths must be positive, got ({self.f_u}, {self.f_v})")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError(f"image dims must be positive, got {self.image_w}x{self.image_h}")
        if not (0 <= self.u_c < self.image_w and 0 <= self.v_c < self.image_h):
            raise ValueError(
                f"principal point ({self.u_c}, {self.v_c}) outside {self.image_w}x{self.image_h} image"
            )

    @classmethod
    def centered(cls, f: float, image_w: int, image_h: int, f_v: float | None = None) -> "CameraIntrinsics":
        """Intrinsics with the principal point at the image center."""
        return cls(f, f if f_v is None else f_v, image_w / 2, image_h / 2, image_w, image_h)

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.f_u, 0.0, self.u_c], [0.0, self.f_v, self.v_c], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class CameraPose:
    """Camera height above the ground (m) and downward pitch (rad)."""

    height_m: float
    pitch_rad: float

    def __post_init__(self):
        if not self.height_m > 0:
            raise ValueError(f"camera height must be positive, got {self.height_m}")
        if not 0 < self.pitch_rad <= math.pi / 2:
            raise DegenerateGeometryError(
                f"pitch must lie in (0, pi/2], got {self.pitch_rad}"
            )

    @classmethod
    def from_degrees(cls, height_m: float, pitch_deg: float) -> "CameraPose":
        return cls(height_m, math.radians(pitch_deg))

    @property
    def pitch_deg(self) -> float:
        return math.degrees(self.pitch_rad)


class Homography:
    """Invertible 3x3 projective map acting on column vectors [a, b, 1]^T.

    Matrices are stored unnormalized; use :meth:`normalized` or
    :func:`projective_distance` to compare two of them.
    """

    __slots__ = ("m",)

    def __init__(self, m):
        m = np.array(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DegenerateGeometryError("homography has non-finite entries")
        det = np.linalg.det(m)
        if det == 0 or not np.isfinite(det):
            raise DegenerateGeometryError("homography is singular")
        m.setflags(write=False)
        self.m = m

    def __matmul__(self, other: "Homography") -> "Homography":
        return Homography(self.m @ other.m)

    def __repr__(self):
        return f"Homography({self.m.tolist()!r})"

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    def normalized(self) -> np.ndarray:
        """Frobenius-normalized matrix with the largest-magnitude entry positive."""
        m = self.m / np.linalg.norm(self.m)
        k = np.argmax(np.abs(m))
        return m if m.flat[k] > 0 else -m

    def apply_h(self, pts) -> np.ndarray:
        """Map (N, 2) points, returning (N, 3) homogeneous results before division."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return pts @ self.m[:, :2].T + self.m[:, 2]

    def apply(self, pts) -> np.ndarray:
        """Map (N, 2) or (2,) points with perspective division."""
        arr = np.asarray(pts, dtype=np.float64)
        out = self.apply_h(arr)
        res = out[:, :2] / out[:, 2:3]
        return res[0] if arr.ndim == 1 else res


def projective_distance(a, b) -> float:
    """Max entrywise difference of two homographies after Frobenius normalization."""
    a = a if isinstance(a, Homography) else Homography(a)
    b = b if isinstance(b, Homography) else Homography(b)
    return float(np.max(np.abs(a.normalized() - b.normalized())))


def image_from_world(intr: CameraIntrinsics, pose: CameraPose, plane_height_m: float = 0.0) -> Homography:
    """Homography from points (x, y) on the plane z = plane_height_m to image pixels.

    Raises:
        DegeneratePlaneError: the plane is not strictly below the camera.
    """
    h_rel = pose.height_m - plane_height_m
    if not h_rel > 0:
        raise DegeneratePlaneError(
            f"plane at {plane_height_m} m is not below camera at {pose.height_m} m"
        )
    a, b = math.cos(pose.pitch_rad), math.sin(pose.pitch_rad)
    fu, fv, uc, vc = intr.f_u, intr.f_v, intr.u_c, intr.v_c
    return Homography(
        [
            [uc * a, -fu, uc * h_rel * b],
            [vc * a - fv * b, 0.0, h_rel * (fv * a + vc * b)],
            [a, 0.0, h_rel * b],
        ]
    )


@dataclass(frozen=True)
class BevGrid:
    """BEV raster dims, metric scale and its world anchoring.

    ``x_c, y_c`` is the ground point at the BEV center, ``x_bc`` the ground
    point at the BEV bottom-center (both in meters).
    """

    height_px: int
    width_px: int
    scale_m_per_px: float
    x_c: float = 0.0
    y_c: float = 0.0
    x_bc: float | None = None

    def __post_init__(self):
        if self.height_px <= 0 or self.width_px <= 0:
            raise ValueError(f"grid dims must be positive, got {self.height_px}x{self.width_px}")
        if not self.scale_m_per_px > 0:
            raise DegenerateGeometryError(f"grid scale must be positive, got {self.scale_m_per_px}")
        if self.x_bc is None:
            object.__setattr__(self, "x_bc", self.x_c - self.scale_m_per_px * self.height_px / 2)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height_px, self.width_px)

    @property
    def area_m2(self) -> float:
        return self.scale_m_per_px**2 * self.height_px * self.width_px


def closed_form_scale(intr: CameraIntrinsics, pose: CameraPose) -> float:
    """Meters per BEV pixel, h / [sin(t) (v_c cos(t) + f_v sin(t))].

    Valid for a BEV raster with the same height as the image and a vertically
    centered principal point; rescale the intrinsics to the BEV size first
    otherwise.
    """
    a, b = math.cos(pose.pitch_rad), math.sin(pose.pitch_rad)
    denom = b * (intr.v_c * a + intr.f_v * b)
    if not denom > 0:
        raise DegenerateGeometryError(f"scale denominator {denom} is not positive")
    return pose.height_m / denom


def make_bev_grid(intr: CameraIntrinsics, pose: CameraPose, H: int = 512, W: int = 512) -> BevGrid:
    """Anchor an H x W BEV raster to the camera's ground footprint.

    The scale is chosen so that BEV center and bottom-center project onto the
    image center and image bottom-center. With ``H == image_h`` and
    ``v_c == image_h / 2`` it reduces exactly to :func:`closed_form_scale`.
    """
    if H <= 0 or W <= 0:
        raise ValueError(f"grid dims must be positive, got {H}x{W}")
    a, b = math.cos(pose.pitch_rad), math.sin(pose.pitch_rad)
    h = pose.height_m
    # rows between the principal point and the bottom image edge
    d = intr.image_h - intr.v_c
    denom = b * (d * a + intr.f_v * b)
    if not denom > 0:
        raise DegenerateGeometryError(f"scale denominator {denom} is not positive")
    s = (2 * d / H) * h / denom
    x_c = h * a / b
    return BevGrid(H, W, s, x_c=x_c, y_c=0.0, x_bc=x_c - s * H / 2)


def world_from_bev(grid: BevGrid) -> Homography:
    """Homography from BEV pixels (u, v) to ground-plane world (x, y)."""
    s, H, W = grid.scale_m_per_px, grid.height_px, grid.width_px
    return Homography(
        [
            [0.0, -s, grid.x_c + s * H / 2],
            [-s, 0.0, grid.y_c + s * W / 2],
            [0.0, 0.0, 1.0],
        ]
    )


def image_from_bev(
    intr: CameraIntrinsics, pose: CameraPose, grid: BevGrid, plane_height_m: float = 0.0
) -> Homography:
    """Homography from BEV pixels to image pixels through the plane z = plane_height_m."""
    return image_from_world(intr, pose, plane_height_m) @ world_from_bev(grid)


def rescale_intrinsics(intr: CameraIntrinsics, new_w: int, new_h: int) -> CameraIntrinsics:
    """Scale intrinsics to a resized image or feature map."""
    if new_w <= 0 or new_h <= 0:
        raise ValueError(f"new dims must be positive, got {new_w}x{new_h}")
    sx, sy = new_w / intr.image_w, new_h / intr.image_h
    return CameraIntrinsics(
        intr.f_u * sx, intr.f_v * sy, intr.u_c * sx, intr.v_c * sy, new_w, new_h
    )


def world_from_image(intr: CameraIntrinsics, pose: CameraPose, uv, plane_height_m: float = 0.0) -> np.ndarray:
    """Back-project image pixels onto the plane z = plane_height_m."""
    return image_from_world(intr, pose, plane_height_m).inverse().apply(uv)


def bev_from_world(grid: BevGrid, xy) -> np.ndarray:
    """BEV pixel coordinates of ground-plane world points."""
    return world_from_bev(grid).inverse().apply(xy)
