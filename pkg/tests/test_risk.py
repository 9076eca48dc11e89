import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.signal import convolve2d

from bevkit import (
    BevGrid,
    Frame,
    Heatmap,
    KeypointSet,
    RasterConfig,
    RasterMode,
    RiskConfig,
    global_risk,
    individual_risks,
    rasterize,
    risk_map,
    risk_mask,
    world_from_bev,
)
from bevkit.errors import FrameMismatchError, KernelTooLargeError
from bevkit.risk import compliance_rate, disk_kernel, disk_sum

from helpers import brute_force_counts, is_borderline

IMPULSE = RasterConfig(mode=RasterMode.IMPULSE)
GRID = BevGrid(200, 240, 0.05, x_c=10.0)  # d0 = 1.5 m -> r = 30 px


def bev_map(px, cfg=IMPULSE, grid=GRID):
    pts = KeypointSet(np.asarray(px, dtype=float).reshape(-1, 2), Frame.BEV)
    return rasterize(pts, grid.shape, cfg, grid=grid), pts


def random_pixel_centers(rng, n, grid=GRID, margin=0):
    flat = rng.choice(
        (grid.height_px - 2 * margin) * (grid.width_px - 2 * margin), size=n, replace=False
    )
    rows, cols = np.divmod(flat, grid.width_px - 2 * margin)
    return np.stack([cols + margin + 0.5, rows + margin + 0.5], axis=1)


def test_disk_kernel_is_pixel_center_indicator():
    k = disk_kernel(2.5)
    assert k.shape == (5, 5)
    yy, xx = np.mgrid[-2:3, -2:3]
    assert np.array_equal(k, (xx**2 + yy**2 <= 6.25).astype(float))
    assert disk_kernel(2.0).sum() == 13  # integer radius keeps its axis points


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 12.0))
def test_direct_and_fft_match_dense_convolution(seed, r):
    m = np.random.default_rng(seed).random((33, 41))
    dense = convolve2d(m, disk_kernel(r), mode="same")
    direct = disk_sum(m, r, "direct")
    fft = disk_sum(m, r, "fft")
    assert np.max(np.abs(direct - dense)) < 1e-9
    assert np.max(np.abs(fft - direct)) < 1e-9


def test_fft_path_agrees_above_switch_radius(rng):
    grid = BevGrid(256, 256, 0.015)  # r = 100 px
    hm, _ = bev_map(rng.uniform(0, 256, (40, 2)), RasterConfig(), grid)
    direct = risk_map(hm, method="direct")
    auto = risk_map(hm)
    assert np.max(np.abs(direct.values - auto.values)) < 1e-9


def test_fft_path_exact_on_integer_maps(rng):
    m = np.zeros((256, 256))
    m[rng.integers(0, 256, 60), rng.integers(0, 256, 60)] += 1.0
    assert np.array_equal(disk_sum(m, 90.3, "fft"), disk_sum(m, 90.3, "direct"))


def test_empty_map_zero_risk():
    hm, _ = bev_map([])
    assert not risk_map(hm).values.any()
    assert global_risk(hm) == 0.0


def test_lone_person():
    hm, pts = bev_map([[100.5, 80.5]])
    risk = risk_map(hm)
    assert risk.values.max() == 1.0
    assert individual_risks(pts, risk).tolist() == [1.0]
    assert not risk_mask(risk).any()
    assert global_risk(hm) == 0.0


def test_pair_one_meter_apart():
    # 20 px at 5 cm per px
    hm, pts = bev_map([[100.5, 80.5], [120.5, 80.5]])
    risk = risk_map(hm)
    assert individual_risks(pts, risk).tolist() == [2.0, 2.0]
    mask = risk_mask(risk)
    assert mask[80, 100] and mask[80, 120]
    # pixels masked are exactly those within r of both persons
    yy, xx = np.mgrid[0:200, 0:240]
    both = ((xx - 100) ** 2 + (yy - 80) ** 2 <= 900) & ((xx - 120) ** 2 + (yy - 80) ** 2 <= 900)
    assert np.array_equal(mask, both)
    assert global_risk(hm) == 2 / GRID.area_m2


def test_r0_one_masks_union_of_disks():
    hm, _ = bev_map([[60.5, 60.5], [150.5, 120.5]])
    risk = risk_map(hm)
    assert np.array_equal(risk_mask(risk, RiskConfig(r0=1.0)), risk.values > 0)


def test_three_far_apart_persons_zero_global_risk():
    hm, pts = bev_map([[40.5, 40.5], [120.5, 40.5], [80.5, 150.5]])
    risk = risk_map(hm)
    assert individual_risks(pts, risk).tolist() == [1.0, 1.0, 1.0]
    assert global_risk(hm, risk=risk) == 0.0


@given(st.integers(0, 2**32 - 1), st.integers(2, 40))
def test_matches_pairwise_oracle(seed, n):
    rng = np.random.default_rng(seed)
    px = random_pixel_centers(rng, n)
    xy = world_from_bev(GRID).apply(px)
    if is_borderline(xy, 1.5, GRID.scale_m_per_px * math.sqrt(2)):
        return
    hm, pts = bev_map(px)
    risk = risk_map(hm)
    counts = brute_force_counts(xy, 1.5)
    got = individual_risks(pts, risk)
    assert np.array_equal(got, counts)
    mask = risk_mask(risk)
    assert np.array_equal(mask[px[:, 1].astype(int), px[:, 0].astype(int)], counts >= 2)
    assert global_risk(hm, risk=risk) == np.count_nonzero(counts >= 2) / GRID.area_m2


def test_compliance_rate_matches_oracle(rng):
    px = random_pixel_centers(rng, 30)
    xy = world_from_bev(GRID).apply(px)
    hm, pts = bev_map(px)
    risks = individual_risks(pts, risk_map(hm))
    counts = brute_force_counts(xy, 1.5)
    assert compliance_rate(risks) == np.mean(counts < 2)
    assert math.isnan(compliance_rate([]))


@given(st.integers(0, 2**32 - 1), st.floats(0.3, 2.0), st.floats(0.05, 1.0))
def test_monotone_in_safe_distance(seed, d0, extra):
    rng = np.random.default_rng(seed)
    hm, pts = bev_map(rng.uniform(0, 200, (25, 2)), RasterConfig())
    small, large = RiskConfig(d0_m=d0), RiskConfig(d0_m=d0 + extra)
    r_small, r_large = risk_map(hm, small), risk_map(hm, large)
    assert np.all(individual_risks(pts, r_large) >= individual_risks(pts, r_small) - 1e-9)
    assert global_risk(hm, large, r_large) >= global_risk(hm, small, r_small)
    assert risk_mask(r_large, large).sum() >= risk_mask(r_small, small).sum()


@given(st.integers(0, 2**32 - 1), st.floats(1.0, 5.0), st.floats(0.01, 3.0))
def test_mask_nesting(seed, r0, step):
    rng = np.random.default_rng(seed)
    hm, _ = bev_map(rng.uniform(0, 200, (40, 2)), RasterConfig())
    risk = risk_map(hm)
    lo, hi = risk_mask(risk, RiskConfig(r0=r0)), risk_mask(risk, RiskConfig(r0=r0 + step))
    assert not np.any(hi & ~lo)


def test_gaussian_close_to_impulse_off_the_border(rng):
    # sigma * s = 0.25 m <= d0 / 5; skip pairs within 3 sigma of the disk edge
    band = 3 * 5 * GRID.scale_m_per_px
    checked = 0
    for _ in range(2000):
        px = random_pixel_centers(rng, 5, margin=25)
        xy = world_from_bev(GRID).apply(px)
        if is_borderline(xy, 1.5, band):
            continue
        g_hm, pts = bev_map(px, RasterConfig())
        i_hm, _ = bev_map(px)
        diff = individual_risks(pts, risk_map(g_hm)) - individual_risks(pts, risk_map(i_hm))
        assert np.max(np.abs(diff)) < 0.1
        checked += 1
        if checked == 20:
            break
    assert checked == 20


def test_kernel_larger_than_raster_rejected():
    hm = Heatmap(np.zeros((20, 20)), Frame.BEV, BevGrid(20, 20, 0.01))
    with pytest.raises(KernelTooLargeError):
        risk_map(hm)


def test_risk_requires_bev_frame():
    with pytest.raises(FrameMismatchError):
        risk_map(Heatmap(np.zeros((5, 5)), Frame.IMAGE))
    hm, _ = bev_map([[10.5, 10.5]])
    with pytest.raises(FrameMismatchError):
        individual_risks(KeypointSet([[1, 1]], Frame.IMAGE), risk_map(hm))


def test_config_validation():
    with pytest.raises(ValueError):
        RiskConfig(d0_m=0)
    with pytest.raises(ValueError):
        RiskConfig(r0=0.5)
    assert RiskConfig().radius_px(0.05) == pytest.approx(30.0)
