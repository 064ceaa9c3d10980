"""Tests for the foveation model and foveal metrics."""

import math

import numpy as np
import pytest

from foveal_iqa.errors import (
    DimensionMismatchError,
    DomainError,
    UndefinedReferenceError,
    ValidationError,
)
from foveal_iqa.foveal import (
    DEFAULT_FOVEATION,
    FoveationModel,
    block_center_weights,
    block_ssim,
    cutoff_frequency,
    foveal_weight,
    foveal_weight_map,
    haar_subbands,
    pool_weighted,
    score_fpsnr,
    score_fssim,
    score_fwqi,
    score_fwsnr,
    subband_center_frequency,
)
from foveal_iqa.geometry import degrees_per_pixel, display_nyquist, eccentricity_map
from foveal_iqa.metrics import mannos_sakrison_csf, score_vpsnr, score_wsnr

from .helpers import textured


def haar_matrices(n: int):
    """Dense orthonormal one-level Haar analysis matrices (lowpass, highpass)."""
    low = np.zeros((n // 2, n))
    high = np.zeros((n // 2, n))
    for i in range(n // 2):
        low[i, 2 * i : 2 * i + 2] = [1, 1]
        high[i, 2 * i : 2 * i + 2] = [1, -1]
    return low / math.sqrt(2), high / math.sqrt(2)


def fwqi_oracle(x, y, w, dpp, levels=4):
    """FWQI from dense matrix Haar transforms."""
    err = ref = 0.0
    ax, ay = x, y
    for level in range(1, levels + 1):
        low, high = haar_matrices(ax.shape[0])
        gain = float(mannos_sakrison_csf(0.75 * 2.0**-level / dpp))
        step = 2**level
        centers = np.arange(ax.shape[0] // 2) * step + step // 2
        cw = gain * w[np.ix_(centers, centers)]
        for a, b in [(low, high), (high, low), (high, high)]:
            cx = a @ ax @ b.T
            cy = a @ ay @ b.T
            err += np.sum(cw * (cx - cy) ** 2)
            ref += np.sum(cw * cx**2)
        ax, ay = low @ ax @ low.T, low @ ay @ low.T
    gain = float(mannos_sakrison_csf(2.0 ** -(levels + 2) / dpp))
    step = 2**levels
    centers = np.arange(ax.shape[0]) * step + step // 2
    cw = gain * w[np.ix_(centers, centers)]
    err += np.sum(cw * (ax - ay) ** 2)
    ref += np.sum(cw * ax**2)
    return 1.0 / (1.0 + math.sqrt(err / ref))


class TestFoveationModel:
    """Test the cutoff-frequency model."""

    def test_defaults(self):
        """Test the default contrast-threshold constants."""
        assert DEFAULT_FOVEATION.alpha == 0.106
        assert DEFAULT_FOVEATION.e2_halfres == 2.3
        assert DEFAULT_FOVEATION.ct0 == 1 / 64

    def test_invalid_parameters(self):
        """Test non-positive parameters and ct0 >= 1 are rejected."""
        with pytest.raises(ValidationError):
            FoveationModel(alpha=0)
        with pytest.raises(ValidationError):
            FoveationModel(ct0=1.0)

    def test_cutoff_at_fovea(self):
        """Test f_c(0) = ln(64) / 0.106, about 39.24 cycles per degree."""
        assert cutoff_frequency(0.0) == pytest.approx(math.log(64) / 0.106)
        assert cutoff_frequency(0.0) == pytest.approx(39.24, abs=0.01)

    def test_cutoff_halves_at_e2(self):
        """Test f_c(e2) = f_c(0) / 2 and the limit towards zero."""
        assert cutoff_frequency(2.3) == pytest.approx(cutoff_frequency(0.0) / 2)
        assert cutoff_frequency(1e9) < 1e-6

    def test_cutoff_clamped_to_display(self, small_geometry):
        """Test the display Nyquist frequency caps the cutoff."""
        fm = FoveationModel.for_geometry(small_geometry)
        assert fm.display_nyquist == pytest.approx(display_nyquist(small_geometry))
        assert cutoff_frequency(0.0, fm) == pytest.approx(
            min(math.log(64) / 0.106, display_nyquist(small_geometry))
        )

    def test_negative_eccentricity(self):
        """Test negative eccentricities are rejected."""
        with pytest.raises(DomainError):
            cutoff_frequency(-1.0)


class TestFovealWeight:
    """Test the normalized foveal weight."""

    @pytest.mark.parametrize("e, w", [(0.0, 1.0), (2.3, 0.5), (6.9, 0.25)])
    def test_values(self, e, w):
        """Test w(e) = e2 / (e + e2)."""
        assert foveal_weight(e) == pytest.approx(w)

    def test_map_is_decreasing_in_eccentricity(self, small_geometry):
        """Test the weight map peaks at the foveation point and decreases outward."""
        em = eccentricity_map(small_geometry)
        wmap = foveal_weight_map(em)
        order = np.argsort(em.values.ravel())
        assert np.all(np.diff(wmap.ravel()[order]) <= 1e-15)
        assert wmap.max() <= 1.0 and wmap.min() > 0


class TestFpsnr:
    """Test foveal PSNR."""

    def test_identical(self, texture64):
        """Test identical images give infinite FPSNR."""
        assert score_fpsnr(texture64, texture64, np.ones((64, 64))) == math.inf

    def test_two_pixel_toy(self):
        """Test weights [1, 0.5] with squared errors [100, 400]."""
        ref = np.array([[50, 50]], dtype=np.uint8)
        dist = np.array([[60, 70]], dtype=np.uint8)
        value = score_fpsnr(ref, dist, np.array([[1.0, 0.5]]))
        assert value == pytest.approx(10 * math.log10(65025 / 200))
        assert value == pytest.approx(25.12, abs=0.01)

    def test_constant_weights_reduce_to_vpsnr(self, texture64):
        """Test a flat weight map gives VPSNR."""
        dist = textured((64, 64), seed=9)
        flat = np.full((64, 64), 0.3)
        assert score_fpsnr(texture64, dist, flat) == pytest.approx(
            score_vpsnr(texture64, dist), abs=1e-12
        )

    def test_weight_map_shape(self, texture64):
        """Test the weight map must match the images."""
        with pytest.raises(DimensionMismatchError):
            score_fpsnr(texture64, texture64, np.ones((8, 8)))

    def test_zero_weights_rejected(self, texture64):
        """Test all-zero or negative weight maps are rejected."""
        with pytest.raises(ValidationError):
            score_fpsnr(texture64, texture64, np.zeros((64, 64)))


class TestFwsnr:
    """Test foveal WSNR."""

    def test_identical(self, texture64, small_geometry):
        """Test identical images give infinite FWSNR."""
        assert score_fwsnr(texture64, texture64, np.ones((64, 64)), small_geometry) == math.inf

    def test_constant_weights_reduce_to_wsnr(self, texture64, small_geometry):
        """Test a flat weight map gives WSNR within 1e-9 dB."""
        dist = textured((64, 64), seed=4)
        flat = np.full((64, 64), 2.0)
        assert score_fwsnr(texture64, dist, flat, small_geometry) == pytest.approx(
            score_wsnr(texture64, dist, small_geometry), abs=1e-9
        )

    def test_composed_oracle(self, make_geometry):
        """Test a 32x32 fixture against a DFT filter plus weighted-ratio oracle."""
        geometry = make_geometry(32)
        rng = np.random.default_rng(2)
        ref = 120 + 30 * rng.standard_normal((32, 32))
        dist = ref + 8 * rng.standard_normal((32, 32))
        w = foveal_weight_map(eccentricity_map(geometry))

        dpp = degrees_per_pixel(geometry)
        fy = np.fft.fftfreq(32)[:, None] / dpp[1]
        fx = np.fft.fftfreq(32)[None, :] / dpp[0]
        csf = mannos_sakrison_csf(np.sqrt(fx**2 + fy**2))
        s = np.fft.ifft2(np.fft.fft2(ref) * csf).real
        e = np.fft.ifft2(np.fft.fft2(ref - dist) * csf).real
        expected = 10 * math.log10(np.sum(w * s**2) / np.sum(w * e**2))
        assert score_fwsnr(ref, dist, w, geometry) == pytest.approx(expected, abs=1e-9)


class TestFssim:
    """Test foveal SSIM on macroblocks."""

    def test_identical(self, texture64):
        """Test identical images score 1."""
        assert score_fssim(texture64, texture64, np.ones((64, 64))) == pytest.approx(1.0)

    def test_pooling_toy(self):
        """Test SSIMs {1.0, 0.5} with weights {1.0, 0.5} pool to 0.8333."""
        assert pool_weighted([1.0, 0.5], [1.0, 0.5]) == pytest.approx(0.8333, abs=1e-4)

    def test_constant_weights_give_block_mean(self, texture64):
        """Test a flat weight map gives the plain mean of block SSIMs."""
        dist = textured((64, 64), seed=8)
        expected = block_ssim(texture64.astype(float), dist.astype(float)).mean()
        assert score_fssim(texture64, dist, np.full((64, 64), 0.7)) == pytest.approx(expected)

    def test_block_grid_truncates_remainder(self):
        """Test 20x17 rasters give a 2x2 block grid weighted at block centers."""
        x = textured((20, 17), seed=1).astype(float)
        assert block_ssim(x, x).shape == (2, 2)
        wmap = np.arange(20 * 17, dtype=float).reshape(20, 17)
        centers = block_center_weights(wmap)
        assert centers[0, 0] == wmap[4, 4]
        assert centers[1, 1] == wmap[12, 12]

    def test_too_small(self):
        """Test rasters smaller than one block are rejected."""
        with pytest.raises(DomainError):
            score_fssim(np.zeros((4, 4)), np.zeros((4, 4)), np.ones((4, 4)))


class TestFwqi:
    """Test the foveated wavelet quality index."""

    def test_identical(self, texture64, small_geometry):
        """Test identical images score 1."""
        assert score_fwqi(texture64, texture64, np.ones((64, 64)), small_geometry) == 1.0

    def test_scaled_distortion(self, texture64, small_geometry):
        """Test dist = (1 - eps) * ref with flat weights gives 1 / (1 + eps)."""
        ref = texture64.astype(float)
        value = score_fwqi(ref, ref * 0.95, np.ones((64, 64)), small_geometry)
        assert value == pytest.approx(1 / 1.05, abs=1e-12)

    def test_matches_dense_haar_oracle(self, make_geometry):
        """Test a 16x16 fixture against explicit Haar matrices."""
        geometry = make_geometry(16)
        x = textured((16, 16), seed=12).astype(float)
        y = textured((16, 16), seed=13).astype(float)
        w = foveal_weight_map(eccentricity_map(geometry))
        dpp = float(np.mean(degrees_per_pixel(geometry)))
        expected = fwqi_oracle(x, y, w, dpp)
        assert score_fwqi(x, y, w, geometry) == pytest.approx(expected, abs=1e-9)

    def test_odd_size_is_padded(self, make_geometry):
        """Test sizes not divisible by 16 still score."""
        geometry = make_geometry(40)
        x = textured((40, 40), seed=3)
        y = textured((40, 40), seed=4)
        value = score_fwqi(x, y, np.ones((40, 40)), geometry)
        assert 0 < value < 1

    def test_zero_reference(self, small_geometry):
        """Test an all-zero reference is undefined."""
        zeros = np.zeros((64, 64))
        with pytest.raises(UndefinedReferenceError):
            score_fwqi(zeros, zeros + 1, np.ones((64, 64)), small_geometry)

    def test_subbands(self):
        """Test band layout and energy preservation of the orthonormal transform."""
        x = textured((32, 32), seed=1).astype(float)
        bands = haar_subbands(x, 4)
        assert len(bands) == 1 + 3 * 4
        assert [level for level, _ in bands[:4]] == [4, 4, 4, 4]
        assert bands[-1][0] == 1 and bands[-1][1].shape == (16, 16)
        energy = sum(float(np.sum(c**2)) for _, c in bands)
        assert energy == pytest.approx(float(np.sum(x**2)))
        assert subband_center_frequency(1) == 0.375
        assert subband_center_frequency(4, approximation=True) == 2.0**-6
