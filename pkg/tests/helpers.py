import math

import numpy as np

from bevkit import CameraIntrinsics, CameraPose


def random_camera(rng, pitch_deg=(15.0, 90.0), height_m=(3.0, 20.0), centered=False):
    """Random intrinsics and pose over the ranges the library is meant for."""
    w = int(rng.integers(256, 1281))
    h = int(rng.integers(256, 1025))
    f_u = rng.uniform(300, 1500)
    f_v = f_u * rng.uniform(0.9, 1.1)
    if centered:
        u_c, v_c = w / 2, h / 2
    else:
        u_c, v_c = rng.uniform(0.3, 0.7) * w, rng.uniform(0.3, 0.7) * h
    intr = CameraIntrinsics(f_u, f_v, u_c, v_c, w, h)
    pose = CameraPose(rng.uniform(*height_m), math.radians(rng.uniform(*pitch_deg)))
    return intr, pose


def pairwise_distances(xy):
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    diff = xy[:, None, :] - xy[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def brute_force_counts(xy, d0):
    """People within d0 of each person, self included, by explicit pairwise distances."""
    return (pairwise_distances(xy) <= d0).sum(axis=1)


def is_borderline(xy, d0, band):
    """True when some pair of distinct persons sits within ``band`` of d0."""
    d = pairwise_distances(xy)
    off = ~np.eye(len(d), dtype=bool)
    return bool(np.any(np.abs(d[off] - d0) < band))


def snap_to_pixel_centers(bev_points):
    """Move BEV points onto pixel centers, dropping points that collide."""
    snapped = np.floor(np.asarray(bev_points, dtype=float)) + 0.5
    _, first = np.unique(snapped, axis=0, return_index=True)
    return snapped[np.sort(first)]


def chain_oracle(intr, pose, plane=0.0):
    """Plane-to-image homography composed as K [I | 0] (optical <- camera) (world <- camera)^-1."""
    a, b = math.cos(pose.pitch_rad), math.sin(pose.pitch_rad)
    h = pose.height_m - plane
    optical_from_camera = np.array([[0, -1, 0, 0], [0, 0, -1, 0], [1, 0, 0, 0], [0, 0, 0, 1]], dtype=float)
    world_from_camera = np.array([[a, 0, b, 0], [0, 1, 0, 0], [-b, 0, a, h], [0, 0, 0, 1]])
    P = np.hstack([np.eye(3), np.zeros((3, 1))])
    full = intr.K @ P @ optical_from_camera @ np.linalg.inv(world_from_camera)
    return full[:, [0, 1, 3]]


def ground_hit(intr, pose, uv):
    """World (x, y) where the ray through pixel uv meets z = 0, from the camera's optical axes."""
    a, b = math.cos(pose.pitch_rad), math.sin(pose.pitch_rad)
    fwd = np.array([a, 0.0, -b])
    right = np.array([0.0, -1.0, 0.0])
    down = np.cross(fwd, right)
    xn = (uv[0] - intr.u_c) / intr.f_u
    yn = (uv[1] - intr.v_c) / intr.f_v
    d = fwd + xn * right + yn * down
    t = pose.height_m / -d[2]
    return t * d[:2]


def subpixel_peak(values, row, col, half=2):
    """Intensity-weighted centroid (u, v) of the window around a peak pixel."""
    H, W = values.shape
    r0, r1 = max(row - half, 0), min(row + half + 1, H)
    c0, c1 = max(col - half, 0), min(col + half + 1, W)
    win = values[r0:r1, c0:c1]
    rr, cc = np.mgrid[r0:r1, c0:c1]
    total = win.sum()
    return np.array([((cc + 0.5) * win).sum() / total, ((rr + 0.5) * win).sum() / total])
