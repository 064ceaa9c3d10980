"""End-to-end acceptance checks: goldens, oracles and properties over many fixtures.

Byte-identity across worker counts lives with the pipeline tests.
"""

import math

import numpy as np
import pytest

from foveal_iqa.evaluation import LogisticParams, fit_zone_weights, logistic5, pcc, rmse
from foveal_iqa.foveal import (
    block_ssim,
    foveal_weight_map,
    score_fpsnr,
    score_fssim,
    score_fwsnr,
)
from foveal_iqa.geometry import (
    GEAR_VR,
    derive_virtual_geometry,
    eccentricity_at,
    eccentricity_map,
    raster_center,
    zone_map,
    zone_of,
    zone_pixel_counts,
)
from foveal_iqa.metrics import score_msssim, score_ssim, score_vpsnr, score_wsnr
from foveal_iqa.projection import ViewportSpec, extract_viewport
from foveal_iqa.stimulus import (
    PATTERNS,
    StimulusSpec,
    blend_weight_map,
    gaussian_blur,
    generate_stimulus,
    plan_stimuli,
)
from foveal_iqa.zwf import ZoneWeights, zone_mse, zwf_score

from .helpers import (
    oracle_pixel,
    planted_mos,
    smooth_equirect,
    synthetic_database,
    textured,
)

CENTER_WEIGHTED = np.array([0.728, 0.088, 0.088, 0.048, 0.048])
BLUR_SIGMAS = (1.0, 2.0, 4.0, 6.0, 8.0, 12.0)


def as_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


class TestAcceptanceGeometry:
    """Test the headset geometry goldens."""

    def test_virtual_distances(self):
        """Test S1 = 1550/37 mm and S3 = S1 + 10 mm to 1e-9 relative."""
        vg = derive_virtual_geometry(GEAR_VR)
        assert vg.lens_to_virtual == pytest.approx(1550 / 37, rel=1e-9)
        assert vg.eye_to_virtual == pytest.approx(1550 / 37 + 10, rel=1e-9)

    def test_zero_at_foveation_point(self):
        """Test the foveation point has exactly zero eccentricity, pointwise and in the map."""
        vg = derive_virtual_geometry(GEAR_VR)
        center = raster_center(vg)
        assert eccentricity_at(center, center, vg) == 0.0
        em = eccentricity_map(vg, foveation_point=(640.0, 720.0))
        assert em.values[720, 640] == 0.0


class TestAcceptanceZones:
    """Test zone classification at the boundaries and over a full headset raster."""

    @pytest.mark.parametrize("e, zone", [(0.0, 1), (2.5, 2), (4.0, 3), (9.0, 4), (30.0, 5)])
    def test_boundaries(self, e, zone):
        """Test each boundary opens the next zone."""
        assert zone_of(e) == zone

    def test_full_raster_matches_oracle(self):
        """Test every pixel of the 1280x1440 viewport against a distance-threshold oracle."""
        vg = derive_virtual_geometry(GEAR_VR)
        zones = zone_map(eccentricity_map(vg))
        assert zones.shape == (1440, 1280)

        cx, cy = (vg.width_px - 1) / 2, (vg.height_px - 1) / 2
        dx = (np.arange(vg.width_px) - cx) * vg.pitch_x
        dy = (np.arange(vg.height_px) - cy) * vg.pitch_y
        dist_sq = dx[None, :] ** 2 + dy[:, None] ** 2
        expected = np.ones(zones.shape, dtype=int)
        for boundary in (2.5, 4.0, 9.0, 30.0):
            radius = vg.eye_to_virtual * math.tan(math.radians(boundary))
            expected += dist_sq >= radius**2
        assert np.array_equal(zones, expected)


class TestAcceptanceDatabase:
    """Test stimulus database size and untouched high-quality regions."""

    def test_cardinality(self):
        """Test eight images, eight patterns and four blur levels give 256 stimuli."""
        plan = plan_stimuli([f"I{i}" for i in range(1, 9)], PATTERNS.values())
        assert len(plan) == 256
        assert len({spec.stimulus_id for spec in plan}) == 256

    @pytest.mark.parametrize("pattern_id", sorted(PATTERNS))
    def test_hq_pixels_bit_identical(self, pattern_id, small_geometry, texture64):
        """Test pixels with full source weight equal the source at every blur level."""
        em = eccentricity_map(small_geometry)
        pattern = PATTERNS[pattern_id]
        keep = blend_weight_map(pattern, em) == 1.0
        for sigma in pattern.scenario.default_sigmas:
            stimulus = generate_stimulus(texture64, StimulusSpec("I1", pattern, sigma), em)
            assert np.array_equal(stimulus[keep], texture64[keep])


class TestAcceptanceZwfEquivalence:
    """Test ZWF with area weights reproduces VPSNR."""

    def test_hundred_random_pairs(self, small_geometry):
        """Test weights proportional to zone pixel counts give VPSNR within 1e-9 dB."""
        zones = zone_map(eccentricity_map(small_geometry))
        weights = ZoneWeights.proportional(zone_pixel_counts(zones, 5))
        rng = np.random.default_rng(2024)
        for _ in range(100):
            ref = rng.integers(0, 256, (64, 64)).astype(np.uint8)
            dist = rng.integers(0, 256, (64, 64)).astype(np.uint8)
            zm = zone_mse(ref, dist, zones, 5)
            assert zwf_score(zm, weights) == pytest.approx(score_vpsnr(ref, dist), abs=1e-9)


class TestAcceptanceFlatWeights:
    """Test foveal metrics reduce to their plain versions under constant weights."""

    @pytest.mark.parametrize("seed", range(20))
    def test_reductions(self, seed, small_geometry):
        """Test FPSNR = VPSNR, FWSNR = WSNR and FSSIM = mean block SSIM."""
        ref = textured((64, 64), seed=seed)
        dist = textured((64, 64), seed=seed + 100, smooth=1.5)
        level = np.random.default_rng(seed).uniform(0.1, 3.0)
        flat = np.full((64, 64), level)
        assert score_fpsnr(ref, dist, flat) == pytest.approx(score_vpsnr(ref, dist), abs=1e-9)
        assert score_fwsnr(ref, dist, flat, small_geometry) == pytest.approx(
            score_wsnr(ref, dist, small_geometry), abs=1e-9
        )
        blocks = block_ssim(ref.astype(float), dist.astype(float))
        assert score_fssim(ref, dist, flat) == pytest.approx(blocks.mean(), abs=1e-12)


class TestAcceptanceFovealLocality:
    """Test FPSNR prefers errors away from the foveation point."""

    def test_fifty_placements(self, small_geometry, texture64):
        """Test the same error at lower eccentricity never scores higher."""
        em = eccentricity_map(small_geometry)
        weights = foveal_weight_map(em)
        rng = np.random.default_rng(7)
        violations = 0
        for _ in range(50):
            a, b = rng.integers(0, 64, size=(2, 2))
            if em.values[a[0], a[1]] > em.values[b[0], b[1]]:
                a, b = b, a
            near = texture64.astype(int)
            near[a[0], a[1]] += 20
            far = texture64.astype(int)
            far[b[0], b[1]] += 20
            fp_near = score_fpsnr(texture64, near.astype(np.uint8), weights)
            fp_far = score_fpsnr(texture64, far.astype(np.uint8), weights)
            violations += fp_near > fp_far + 1e-12
        assert violations == 0


class TestAcceptanceBlurMonotonicity:
    """Test stronger full-frame blur never scores better."""

    @pytest.mark.parametrize("seed", [21, 22, 23, 24])
    def test_full_frame_blur(self, seed, medium_geometry):
        """Test VPSNR, SSIM, MS-SSIM and FPSNR fall as sigma grows."""
        ref = textured((192, 192), seed=seed, smooth=2.0)
        weights = foveal_weight_map(eccentricity_map(medium_geometry))
        scores = {"VPSNR": [], "SSIM": [], "MS-SSIM": [], "FPSNR": []}
        for sigma in BLUR_SIGMAS:
            dist = as_uint8(gaussian_blur(ref, sigma))
            scores["VPSNR"].append(score_vpsnr(ref, dist))
            scores["SSIM"].append(score_ssim(ref, dist))
            scores["MS-SSIM"].append(score_msssim(ref, dist))
            scores["FPSNR"].append(score_fpsnr(ref, dist, weights))
        for metric_id, values in scores.items():
            assert all(b <= a for a, b in zip(values, values[1:])), metric_id


class TestAcceptanceWeightRecovery:
    """Test planted zone weights are recovered from synthetic MOS."""

    def test_recovers_center_weighted_set(self):
        """Test noise-free MOS from planted weights is inverted to within L1 0.02."""
        zone_mses = synthetic_database()
        result = fit_zone_weights(zone_mses, planted_mos(zone_mses, CENTER_WEIGHTED), seed=0)
        recovered = result.weights.as_array()
        assert np.abs(recovered - CENTER_WEIGHTED).sum() < 0.02
        assert np.all(recovered >= 0)
        assert recovered.sum() == pytest.approx(1.0, abs=1e-9)

    def test_recovers_uniform_weights(self):
        """Test planted uniform weights are recovered."""
        planted = np.full(5, 0.2)
        zone_mses = synthetic_database()
        result = fit_zone_weights(zone_mses, planted_mos(zone_mses, planted), seed=0)
        assert np.abs(result.weights.as_array() - planted).sum() < 0.02

    def test_noisy_fit_quality(self):
        """Test MOS noise of 0.1 still gives PCC >= 0.97 and RMSE <= 0.27."""
        zone_mses = synthetic_database()
        mos = planted_mos(zone_mses, CENTER_WEIGHTED, noise=0.1, seed=3)
        result = fit_zone_weights(zone_mses, mos, seed=0)
        assert result.pcc >= 0.97
        assert result.rmse <= 0.27
        assert all(b <= a + 1e-12 for a, b in zip(result.trace, result.trace[1:]))


class TestAcceptanceStatistics:
    """Test the logistic identities and correlation goldens."""

    def test_logistic_identities(self):
        """Test the linear case, the center value and the upper asymptote."""
        assert logistic5(4.0, LogisticParams(3.0, 0.0, 10.0, 0.5, 1.0)) == pytest.approx(3.0)
        p = LogisticParams(2.0, 1.5, 7.0, 0.25, 1.0)
        assert logistic5(7.0, p) == pytest.approx(0.25 * 7.0 + 1.0)
        assert logistic5(40.0, p) == pytest.approx(1.0 + 0.25 * 40.0 + 1.0)

    def test_correlation_goldens(self):
        """Test affine, negated and closed-form PCC plus RMSE values."""
        a = np.array([1.0, 2.0, 3.0, 4.0])
        assert pcc(a, 3 * a - 2) == pytest.approx(1.0)
        assert pcc(a, -a) == pytest.approx(-1.0)
        assert pcc([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)
        assert rmse([3, 4], [0, 0]) == pytest.approx(math.sqrt(12.5))


class TestAcceptanceProjection:
    """Test viewport extraction against a brute-force ray oracle on a 512x256 chart."""

    @pytest.mark.parametrize("yaw, pitch", [(0.0, 0.0), (180.0, 15.0), (-120.0, -50.0)])
    def test_every_pixel_within_one_level(self, yaw, pitch):
        """Test every viewport pixel, including a view straddling the seam."""
        chart = smooth_equirect(width=512, seed=11)
        assert chart.data.shape == (256, 512)
        spec = ViewportSpec(yaw=yaw, pitch=pitch, fov_h=90, out_width=32, out_height=24)
        viewport = extract_viewport(chart, spec)
        worst = max(
            abs(float(viewport.data[row, col]) - oracle_pixel(chart, spec, row, col))
            for row in range(spec.out_height)
            for col in range(spec.out_width)
        )
        assert worst <= 1.0
