"""Synthetic crowd scenes with known camera geometry.

Scenes stand in for annotated photographs: every person has an exact ground
position and body height, so head and feet keypoints, BEV maps and risk
quantities can all be derived without labelling error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleConfigError
from .geometry import (
    BevGrid,
    CameraIntrinsics,
    CameraPose,
    image_from_world,
    make_bev_grid,
    world_from_bev,
)
from .raster import Frame, Heatmap, KeypointSet, RasterConfig, bev_points_from_feet, rasterize
from .risk import RiskConfig, global_risk, risk_map, risk_mask

MIN_PERSON_HEIGHT = 1.0
MAX_PERSON_HEIGHT = 2.1


@dataclass(frozen=True)
class Person:
    x_m: float
    y_m: float
    height_m: float
    visible_feet: bool = True

    def __post_init__(self):
        if not MIN_PERSON_HEIGHT <= self.height_m <= MAX_PERSON_HEIGHT:
            raise ValueError(f"person height {self.height_m} m outside [1.0, 2.1]")


@dataclass(frozen=True)
class Scene:
    intr: CameraIntrinsics
    pose: CameraPose
    persons: tuple[Person, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "persons", tuple(self.persons))

    @property
    def world_xy(self) -> np.ndarray:
        return np.array([[p.x_m, p.y_m] for p in self.persons], dtype=np.float64).reshape(-1, 2)

    @property
    def heights(self) -> np.ndarray:
        return np.array([p.height_m for p in self.persons], dtype=np.float64)

    def grid(self, H: int = 512, W: int | None = None) -> BevGrid:
        return make_bev_grid(self.intr, self.pose, H, H if W is None else W)


@dataclass(frozen=True)
class SceneConfig:
    """Sampling ranges for :func:`sample_scene`.

    ``clustering`` is the fraction of persons placed in tight groups whose
    members each stand within ``cluster_radius_m`` of another member; the
    rest are spread uniformly over the BEV region of interest.
    """

    n_persons: tuple[int, int] = (5, 50)
    clustering: float = 0.3
    cluster_radius_m: float = 1.0
    cluster_size: tuple[int, int] = (2, 5)
    height_mean_m: float = 1.7
    height_std_m: float = 0.1
    height_choices: tuple[float, ...] | None = None
    pitch_deg: tuple[float, float] = (15.0, 90.0)
    camera_height_m: tuple[float, float] = (3.0, 20.0)
    focal_px: tuple[float, float] = (400.0, 800.0)
    image_w: int = 512
    image_h: int = 512
    grid_size: int = 512
    min_separation_m: float = 0.3
    min_separation_px: float = 0.0
    roi_margin_px: float = 0.0
    seed: int = 0
    max_attempts: int = 20000

    def __post_init__(self):
        def check_range(name, lo, hi, low_bound=None):
            if lo > hi:
                raise ValueError(f"{name} range is empty: ({lo}, {hi})")
            if low_bound is not None and lo < low_bound:
                raise ValueError(f"{name} lower bound {lo} below {low_bound}")

        check_range("n_persons", *self.n_persons, low_bound=0)
        check_range("cluster_size", *self.cluster_size, low_bound=2)
        check_range("camera_height_m", *self.camera_height_m)
        check_range("focal_px", *self.focal_px)
        check_range("pitch_deg", *self.pitch_deg)
        if not (0 < self.pitch_deg[0] and self.pitch_deg[1] <= 90):
            raise ValueError(f"pitch range must lie in (0, 90], got {self.pitch_deg}")
        if self.camera_height_m[0] <= MAX_PERSON_HEIGHT:
            raise ValueError("camera must sit above the tallest person")
        if self.focal_px[0] <= 0:
            raise ValueError("focal length must be positive")
        if not 0 <= self.clustering <= 1:
            raise ValueError(f"clustering must lie in [0, 1], got {self.clustering}")
        if self.cluster_radius_m < self.min_separation_m:
            raise ValueError("cluster radius is smaller than the minimum separation")
        if self.height_std_m < 0:
            raise ValueError("height std must be nonnegative")
        if self.height_choices is not None:
            hs = tuple(float(h) for h in self.height_choices)
            if not hs or any(not MIN_PERSON_HEIGHT <= h <= MAX_PERSON_HEIGHT for h in hs):
                raise ValueError(f"height choices must lie in [1.0, 2.1], got {hs}")
            object.__setattr__(self, "height_choices", hs)
        if self.image_w <= 0 or self.image_h <= 0 or self.grid_size <= 0:
            raise ValueError("image and grid dims must be positive")


@dataclass
class _Placer:
    scene_intr: CameraIntrinsics
    pose: CameraPose
    grid: BevGrid
    cfg: SceneConfig
    rng: np.random.Generator
    xy: list = field(default_factory=list)
    bev: list = field(default_factory=list)
    attempts: int = 0

    def __post_init__(self):
        self.to_world = world_from_bev(self.grid)
        self.to_bev = self.to_world.inverse()

    def _tick(self):
        self.attempts += 1
        if self.attempts > self.cfg.max_attempts:
            raise InfeasibleConfigError(
                f"could not place persons after {self.cfg.max_attempts} attempts; "
                "region of interest too small for the requested count"
            )

    def valid(self, x, y, height) -> bool:
        c = self.cfg
        u, v = self.to_bev.apply([x, y])
        m = c.roi_margin_px
        if not (m <= u < self.grid.width_px - m and m <= v < self.grid.height_px - m):
            return False
        for plane in (0.0, height):
            ph = image_from_world(self.scene_intr, self.pose, plane).apply_h([[x, y]])[0]
            if ph[2] <= 0:
                return False
            iu, iv = ph[0] / ph[2], ph[1] / ph[2]
            if not (0 <= iu < self.scene_intr.image_w and 0 <= iv < self.scene_intr.image_h):
                return False
        if self.xy:
            d_m = np.hypot(*(np.asarray(self.xy) - (x, y)).T)
            if d_m.min() < c.min_separation_m:
                return False
            d_px = np.hypot(*(np.asarray(self.bev) - (u, v)).T)
            if d_px.min() <= c.min_separation_px:
                return False
        return True

    def add(self, x, y):
        self.xy.append((x, y))
        self.bev.append(tuple(self.to_bev.apply([x, y])))

    def uniform(self, height) -> tuple[float, float]:
        H, W = self.grid.shape
        while True:
            self._tick()
            u, v = self.rng.uniform(0, W), self.rng.uniform(0, H)
            x, y = self.to_world.apply([u, v])
            if self.valid(x, y, height):
                self.add(x, y)
                return x, y

    def near(self, anchors, height) -> tuple[float, float]:
        c = self.cfg
        while True:
            self._tick()
            ax, ay = anchors[self.rng.integers(len(anchors))]
            ang = self.rng.uniform(0, 2 * math.pi)
            r = self.rng.uniform(c.min_separation_m, c.cluster_radius_m)
            x, y = ax + r * math.cos(ang), ay + r * math.sin(ang)
            if self.valid(x, y, height):
                self.add(x, y)
                return x, y


def _cluster_sizes(n_clustered: int, cfg: SceneConfig, rng) -> list[int]:
    sizes = []
    left = n_clustered
    lo, hi = cfg.cluster_size
    while left > 0:
        k = min(int(rng.integers(lo, hi + 1)), left)
        # never leave a remainder too small to form its own cluster
        if 0 < left - k < lo:
            k = left if left <= hi else left - lo
        sizes.append(k)
        left -= k
    return sizes


def sample_scene(cfg: SceneConfig | None = None, seed: int | None = None) -> Scene:
    """Draw a random scene; identical (cfg, seed) give identical scenes.

    Raises:
        InfeasibleConfigError: persons cannot be placed in the region of
            interest within ``cfg.max_attempts`` draws.
    """
    cfg = cfg or SceneConfig()
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    pitch_deg = rng.uniform(*cfg.pitch_deg)
    pose = CameraPose(rng.uniform(*cfg.camera_height_m), math.radians(pitch_deg))
    f = rng.uniform(*cfg.focal_px)
    intr = CameraIntrinsics.centered(f, cfg.image_w, cfg.image_h)
    grid = make_bev_grid(intr, pose, cfg.grid_size, cfg.grid_size)
    n = int(rng.integers(cfg.n_persons[0], cfg.n_persons[1] + 1))
    n_clustered = int(round(cfg.clustering * n))
    if n_clustered == 1:
        n_clustered = 2 if n >= 2 else 0
    sizes = _cluster_sizes(n_clustered, cfg, rng)

    heights = _sample_heights(n, cfg, rng)
    # feet occlusion grows as the camera tilts toward the horizon
    p_visible = 0.5 + 0.5 * math.sin(pose.pitch_rad)
    visible = rng.random(n) < p_visible

    placer = _Placer(intr, pose, grid, cfg, rng)
    xy = []
    i = 0
    for k in sizes:
        members = [placer.uniform(heights[i])]
        for j in range(1, k):
            members.append(placer.near(members, heights[i + j]))
        xy.extend(members)
        i += k
    for j in range(i, n):
        xy.append(placer.uniform(heights[j]))

    persons = tuple(
        Person(float(x), float(y), float(h), bool(vis)) for (x, y), h, vis in zip(xy, heights, visible)
    )
    return Scene(intr, pose, persons)


def _sample_heights(n: int, cfg: SceneConfig, rng) -> np.ndarray:
    if cfg.height_choices is not None:
        return rng.choice(np.asarray(cfg.height_choices), size=n)
    h = rng.normal(cfg.height_mean_m, cfg.height_std_m, size=n)
    return np.clip(h, MIN_PERSON_HEIGHT, MAX_PERSON_HEIGHT)


@dataclass(frozen=True)
class Annotations:
    head: KeypointSet
    feet: KeypointSet

    @classmethod
    def from_records(cls, records) -> "Annotations":
        head = np.array([r["head_uv"] for r in records], dtype=np.float64).reshape(-1, 2)
        feet = np.array([r["feet_uv"] for r in records], dtype=np.float64).reshape(-1, 2)
        return cls(KeypointSet(head, Frame.IMAGE), KeypointSet(feet, Frame.IMAGE))

    def records(self) -> list[dict]:
        return [
            {"head_uv": [float(a), float(b)], "feet_uv": [float(c), float(d)]}
            for (a, b), (c, d) in zip(self.head.points, self.feet.points)
        ]


def annotate(scene: Scene) -> Annotations:
    """Image-view head and feet keypoints of every person."""
    xy = scene.world_xy
    if len(xy) == 0:
        empty = np.zeros((0, 2))
        return Annotations(KeypointSet(empty, Frame.IMAGE), KeypointSet(empty, Frame.IMAGE))
    feet = image_from_world(scene.intr, scene.pose, 0.0).apply(xy)
    head = np.array(
        [image_from_world(scene.intr, scene.pose, p.height_m).apply([p.x_m, p.y_m]) for p in scene.persons]
    )
    return Annotations(KeypointSet(head, Frame.IMAGE), KeypointSet(feet, Frame.IMAGE))


@dataclass(frozen=True)
class GroundTruth:
    grid: BevGrid
    m_head: Heatmap
    m_feet: Heatmap
    m_bev: Heatmap
    bev_points: KeypointSet
    risk: Heatmap
    mask: np.ndarray
    global_risk: float
    world_locations: np.ndarray

    @property
    def count(self) -> int:
        return int(self.world_locations.shape[0])


def ground_truth_bundle(
    scene: Scene,
    grid: BevGrid | None = None,
    raster_cfg: RasterConfig | None = None,
    risk_cfg: RiskConfig | None = None,
    annotations: Annotations | None = None,
) -> GroundTruth:
    """Image-view head/feet maps, BEV map and risk quantities for a scene.

    The BEV map is rasterized from feet keypoints projected through the
    ground-plane homography, not by warping the feet map. Persons projecting
    outside the BEV raster are dropped from ``world_locations``.

    With explicit ``annotations`` the keypoints are taken as given and world
    locations are recovered from the projected feet; otherwise both come
    from the scene's persons.
    """
    raster_cfg = raster_cfg or RasterConfig()
    risk_cfg = risk_cfg or RiskConfig()
    grid = grid or scene.grid()
    ann = annotations if annotations is not None else annotate(scene)
    img_shape = (scene.intr.image_h, scene.intr.image_w)
    m_head = rasterize(ann.head, img_shape, raster_cfg)
    m_feet = rasterize(ann.feet, img_shape, raster_cfg)
    bev_pts = bev_points_from_feet(ann.feet, scene.intr, scene.pose, grid)
    m_bev = rasterize(bev_pts.inside(), grid.shape, raster_cfg, grid=grid)
    risk = risk_map(m_bev, risk_cfg)
    mask = risk_mask(risk, risk_cfg)
    rg = global_risk(m_bev, risk_cfg, risk)
    if len(bev_pts) == 0:
        world = np.zeros((0, 2))
    elif annotations is not None:
        world = world_from_bev(grid).apply(bev_pts.points[bev_pts.in_roi])
    else:
        world = scene.world_xy[bev_pts.in_roi]
    return GroundTruth(grid, m_head, m_feet, m_bev, bev_pts, risk, mask, rg, world)
