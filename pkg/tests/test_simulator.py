import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bevkit import (
    CameraIntrinsics,
    CameraPose,
    Person,
    RiskConfig,
    Scene,
    SceneConfig,
    annotate,
    bev_from_world,
    chamfer,
    count,
    extract_locations,
    ground_truth_bundle,
    image_from_world,
    make_bev_grid,
    sample_scene,
    world_from_bev,
)
from bevkit.errors import InfeasibleConfigError
from bevkit.simulator import Annotations

from helpers import brute_force_counts, pairwise_distances

ROOMY = SceneConfig(camera_height_m=(6.0, 20.0), pitch_deg=(30.0, 90.0))


def test_same_seed_same_scene():
    assert sample_scene(ROOMY, 7) == sample_scene(ROOMY, 7)
    assert sample_scene(ROOMY, 7) != sample_scene(ROOMY, 8)


def test_zero_persons():
    scene = sample_scene(SceneConfig(n_persons=(0, 0)), 1)
    assert scene.persons == ()
    gt = ground_truth_bundle(scene)
    assert not gt.m_bev.values.any() and not gt.m_head.values.any()
    assert gt.global_risk == 0.0 and gt.count == 0


@pytest.mark.parametrize("seed", range(5))
def test_persons_valid_and_in_view(seed):
    cfg = SceneConfig(camera_height_m=(6.0, 20.0), pitch_deg=(30.0, 90.0), n_persons=(20, 40))
    scene = sample_scene(cfg, seed)
    xy, heights = scene.world_xy, scene.heights
    assert np.all((heights >= 1.0) & (heights <= 2.1))
    d = pairwise_distances(xy)
    assert d[~np.eye(len(d), dtype=bool)].min() >= cfg.min_separation_m
    ann = annotate(scene)
    for pts in (ann.head.points, ann.feet.points):
        assert np.all((pts >= 0) & (pts < [scene.intr.image_w, scene.intr.image_h]))
    bev = bev_from_world(scene.grid(), xy)
    assert np.all((bev >= 0) & (bev < 512))


def test_clustered_persons_all_at_risk():
    cfg = SceneConfig(
        n_persons=(10, 30), clustering=1.0, cluster_radius_m=1.0, camera_height_m=(8.0, 20.0), pitch_deg=(40.0, 90.0)
    )
    for seed in range(10):
        scene = sample_scene(cfg, seed)
        assert np.all(brute_force_counts(scene.world_xy, 1.5) >= 2)


def test_infeasible_request_raises():
    cfg = SceneConfig(n_persons=(400, 400), camera_height_m=(3.0, 3.0), min_separation_m=0.5, max_attempts=3000)
    with pytest.raises(InfeasibleConfigError):
        sample_scene(cfg, 0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_persons": (5, 2)},
        {"pitch_deg": (0.0, 30.0)},
        {"pitch_deg": (30.0, 95.0)},
        {"camera_height_m": (1.5, 5.0)},
        {"clustering": 1.5},
        {"height_choices": (0.5,)},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SceneConfig(**kwargs)


def test_person_height_range():
    with pytest.raises(ValueError):
        Person(0.0, 0.0, 2.5)


def test_overhead_heads_displaced_radially():
    # a pinhole camera only collapses head onto feet at the nadir
    intr = CameraIntrinsics.centered(500.0, 512, 512)
    pose = CameraPose(10.0, math.pi / 2)
    persons = [Person(0.0, 0.0, 1.8), Person(2.0, -1.0, 1.6), Person(-3.0, 2.5, 1.75)]
    ann = annotate(Scene(intr, pose, persons))
    center = np.array([intr.u_c, intr.v_c])
    assert_allclose(ann.head.points[0], ann.feet.points[0], atol=1e-9)
    for p, head, feet in zip(persons, ann.head.points, ann.feet.points):
        assert_allclose(head - center, (feet - center) * 10.0 / (10.0 - p.height_m), atol=1e-9)


def test_head_above_feet_when_tilted():
    scene = sample_scene(SceneConfig(pitch_deg=(20.0, 70.0), camera_height_m=(6.0, 20.0)), 3)
    ann = annotate(scene)
    assert np.all(ann.head.points[:, 1] < ann.feet.points[:, 1])


def test_bottom_center_person_feet_on_image_bottom():
    intr = CameraIntrinsics.centered(600.0, 512, 512)
    pose = CameraPose.from_degrees(9.0, 35.0)
    grid = make_bev_grid(intr, pose)
    x, y = world_from_bev(grid).apply([256.0, 512.0])
    ann = annotate(Scene(intr, pose, [Person(x, y, 1.7)]))
    assert_allclose(ann.feet.points[0], [256.0, 512.0], atol=1e-9)


def test_taller_person_head_further_along_same_ray():
    intr = CameraIntrinsics.centered(600.0, 512, 512)
    pose = CameraPose.from_degrees(9.0, 35.0)
    short, tall = annotate(Scene(intr, pose, [Person(12.0, 1.0, 1.5), Person(12.0, 1.0, 1.9)])).head.points
    feet = image_from_world(intr, pose).apply([12.0, 1.0])
    a, b = short - feet, tall - feet
    assert np.linalg.norm(b) > np.linalg.norm(a)
    assert abs(a[0] * b[1] - a[1] * b[0]) < 1e-6 * np.linalg.norm(a) * np.linalg.norm(b)


@pytest.mark.parametrize("seed", range(3))
def test_extraction_roundtrip_when_well_separated(seed):
    # 15 px keeps neighbouring sigma = 5 Gaussians from merging into one peak
    cfg = SceneConfig(n_persons=(10, 20), min_separation_px=15, camera_height_m=(8.0, 14.0))
    scene = sample_scene(cfg, seed)
    gt = ground_truth_bundle(scene)
    found = extract_locations(gt.m_bev)
    assert len(found) == len(scene.persons)
    assert chamfer(found, gt.world_locations).chamfer_m <= 2 * gt.grid.scale_m_per_px * math.sqrt(2)


def test_feet_visibility_follows_pitch():
    overhead = sample_scene(SceneConfig(pitch_deg=(90.0, 90.0), camera_height_m=(8.0, 12.0)), 0)
    assert all(p.visible_feet for p in overhead.persons)
    low = [sample_scene(SceneConfig(pitch_deg=(15.0, 20.0), camera_height_m=(8.0, 12.0)), s) for s in range(20)]
    frac = np.mean([p.visible_feet for sc in low for p in sc.persons])
    assert 0.5 < frac < 0.8


class TestGroundTruth:
    scene = sample_scene(SceneConfig(n_persons=(25, 25), camera_height_m=(8.0, 12.0), pitch_deg=(40.0, 60.0)), 11)
    gt = ground_truth_bundle(scene)

    def test_bev_mass_is_person_count(self):
        assert count(self.gt.m_bev) == pytest.approx(len(self.scene.persons), abs=1e-6)
        assert count(self.gt.m_feet) == pytest.approx(len(self.scene.persons), abs=1e-6)

    def test_bev_points_match_world_positions(self):
        expected = bev_from_world(self.gt.grid, self.scene.world_xy)
        assert np.max(np.abs(self.gt.bev_points.points - expected)) < 1e-9

    def test_world_locations_and_risk_consistent(self):
        assert_allclose(self.gt.world_locations, self.scene.world_xy)
        assert self.gt.mask.dtype == bool
        assert self.gt.global_risk >= 0

    def test_annotations_reproduce_bundle(self):
        ann = Annotations.from_records(annotate(self.scene).records())
        again = ground_truth_bundle(self.scene, annotations=ann)
        assert_allclose(again.m_bev.values, self.gt.m_bev.values, atol=1e-12)
        assert_allclose(again.world_locations, self.gt.world_locations, atol=1e-9)

    def test_risk_uses_config(self):
        loose = ground_truth_bundle(self.scene, risk_cfg=RiskConfig(d0_m=3.0))
        assert loose.mask.sum() >= self.gt.mask.sum()
