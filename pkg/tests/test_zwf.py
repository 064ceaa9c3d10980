"""Tests for zone-masked MSE and the zone-weighted formulation."""

import math

import numpy as np
import pytest

from foveal_iqa.errors import ConfigurationError, DimensionMismatchError
from foveal_iqa.geometry import eccentricity_map, zone_map, zone_pixel_counts
from foveal_iqa.metrics import score_vpsnr
from foveal_iqa.zwf import (
    REFERENCE_ZONE_WEIGHTS,
    ZoneMseVector,
    ZoneWeights,
    reference_weights,
    resolve_weights,
    weighted_zone_mse,
    zone_mse,
    zwf_score,
)

from .helpers import textured


class TestZoneWeights:
    """Test weight validation and reference sets."""

    def test_sum_to_one(self):
        """Test weights must sum to one within 1e-9."""
        ZoneWeights((0.5, 0.5))
        with pytest.raises(ConfigurationError):
            ZoneWeights((0.5, 0.4))

    def test_non_negative(self):
        """Test negative weights are rejected even when the sum is one."""
        with pytest.raises(ConfigurationError):
            ZoneWeights((1.2, -0.2))

    def test_uniform_and_proportional(self):
        """Test the convenience constructors."""
        assert ZoneWeights.uniform(4).weights == (0.25, 0.25, 0.25, 0.25)
        assert ZoneWeights.proportional([1, 3]).weights == (0.25, 0.75)

    def test_reference_sets(self):
        """Test eight per-image sets plus their mean, each normalized."""
        assert set(REFERENCE_ZONE_WEIGHTS) == {f"I{i}" for i in range(1, 9)} | {"mean"}
        assert REFERENCE_ZONE_WEIGHTS["I1"] == (0.728, 0.088, 0.088, 0.048, 0.048)
        for name in REFERENCE_ZONE_WEIGHTS:
            assert sum(reference_weights(name).weights) == pytest.approx(1.0, abs=1e-12)
        mean = reference_weights("mean").weights
        assert mean[0] == max(mean)

    def test_resolve(self):
        """Test names, vectors and None all resolve."""
        assert resolve_weights("I3").weights[0] == pytest.approx(0.905, abs=2e-3)
        assert resolve_weights([0.2] * 5).zone_count == 5
        assert resolve_weights(None) == reference_weights("mean")
        with pytest.raises(ConfigurationError):
            resolve_weights("I9")


class TestZoneMse:
    """Test per-zone MSE."""

    def test_identical(self, texture64, small_geometry):
        """Test identical images give zero MSE in every zone."""
        zones = zone_map(eccentricity_map(small_geometry))
        zm = zone_mse(texture64, texture64, zones, 5)
        assert zm.mse == (0.0,) * 5
        assert sum(zm.pixel_counts) == 64 * 64

    def test_uniform_difference(self, small_geometry):
        """Test a uniform difference d gives d^2 everywhere."""
        zones = zone_map(eccentricity_map(small_geometry))
        ref = np.full((64, 64), 50, dtype=np.uint8)
        zm = zone_mse(ref, ref + 7, zones, 5)
        assert zm.mse == (49.0,) * 5

    def test_toy_zone_map(self):
        """Test zone map [1, 1, 2, 2] with squared differences [0, 4, 9, 25]."""
        ref = np.zeros((1, 4), dtype=np.uint8)
        dist = np.array([[0, 2, 3, 5]], dtype=np.uint8)
        zm = zone_mse(ref, dist, np.array([[1, 1, 2, 2]]), 2)
        assert zm.mse == (2.0, 17.0)
        assert zm.pixel_counts == (2, 2)

    def test_absent_zone(self):
        """Test zones without pixels are flagged absent."""
        zm = zone_mse(np.zeros((1, 2)), np.ones((1, 2)), np.array([[1, 1]]), 3)
        assert zm.present == (True, False, False)
        assert math.isnan(zm.mse[1])

    def test_dimension_mismatch(self):
        """Test the zone map must match the images."""
        with pytest.raises(DimensionMismatchError):
            zone_mse(np.zeros((2, 2)), np.zeros((2, 2)), np.ones((3, 3), dtype=int))


class TestZwfScore:
    """Test the ZWF score."""

    def test_uniform_weights(self):
        """Test w = 0.2 and MSE 100 in every zone gives 10 log10(650.25)."""
        zm = ZoneMseVector((100.0,) * 5, (10,) * 5)
        value = zwf_score(zm, ZoneWeights.uniform(5))
        assert value == pytest.approx(10 * math.log10(650.25))
        assert value == pytest.approx(28.13, abs=0.01)

    def test_center_weighted_set(self):
        """Test the I1 weights with a clean fovea."""
        zm = ZoneMseVector((0.0, 100.0, 100.0, 100.0, 100.0), (10,) * 5)
        weights = ZoneWeights((0.728, 0.088, 0.088, 0.048, 0.048))
        assert weighted_zone_mse(zm, weights) == pytest.approx(27.2)
        assert zwf_score(zm, weights) == pytest.approx(10 * math.log10(65025 / 27.2))
        assert zwf_score(zm, weights) == pytest.approx(33.78, abs=0.01)

    def test_zero_mse(self):
        """Test all-zero MSE gives the infinite sentinel."""
        zm = ZoneMseVector((0.0,) * 5, (1,) * 5)
        assert zwf_score(zm, ZoneWeights.uniform(5)) == math.inf

    def test_absent_zone_needs_zero_weight(self):
        """Test a positive weight on an absent zone is a configuration error."""
        zm = ZoneMseVector((10.0, math.nan), (4, 0))
        assert zwf_score(zm, ZoneWeights((1.0, 0.0))) == pytest.approx(10 * math.log10(6502.5))
        with pytest.raises(ConfigurationError):
            zwf_score(zm, ZoneWeights((0.5, 0.5)))

    def test_zone_count_mismatch(self):
        """Test weights must cover every zone."""
        with pytest.raises(ConfigurationError):
            zwf_score(ZoneMseVector((1.0, 1.0), (1, 1)), ZoneWeights.uniform(3))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_proportional_weights_equal_vpsnr(self, seed, small_geometry):
        """Test weights proportional to zone pixel counts reproduce VPSNR."""
        zones = zone_map(eccentricity_map(small_geometry))
        ref = textured((64, 64), seed=seed)
        dist = textured((64, 64), seed=seed + 10)
        weights = ZoneWeights.proportional(zone_pixel_counts(zones, 5))
        zm = zone_mse(ref, dist, zones, 5)
        assert zwf_score(zm, weights) == pytest.approx(score_vpsnr(ref, dist), abs=1e-9)

    def test_single_zone(self, texture64):
        """Test one zone with w = [1] equals VPSNR over that zone."""
        dist = textured((64, 64), seed=2)
        zm = zone_mse(texture64, dist, np.ones((64, 64), dtype=int), 1)
        assert zwf_score(zm, ZoneWeights((1.0,))) == pytest.approx(score_vpsnr(texture64, dist))

    def test_non_increasing_in_zone_mse(self):
        """Test raising any zone's MSE never raises ZWF."""
        weights = resolve_weights("mean")
        base = np.array([5.0, 10.0, 20.0, 40.0, 80.0])
        score = zwf_score(ZoneMseVector(tuple(base), (1,) * 5), weights)
        for k in range(5):
            bumped = base.copy()
            bumped[k] += 10.0
            assert zwf_score(ZoneMseVector(tuple(bumped), (1,) * 5), weights) <= score
