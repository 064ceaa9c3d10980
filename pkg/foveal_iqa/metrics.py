"""Full-reference quality metrics on viewport pairs.

Every metric works on Rec.601 luminance. Scores that diverge for identical
inputs (VPSNR, WSNR and their foveal variants) return ``math.inf``.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError, DomainError, ValidationError
from .geometry import VirtualGeometry, degrees_per_pixel
from .raster_io import RasterLike, ViewportImage, as_viewport

REC601_WEIGHTS = (0.299, 0.587, 0.114)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
MSSSIM_EXPONENTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

# Denominators below this fraction of MAX^2 count as zero in UQI mode.
_ZERO_TOL = 1e-12


def luminance(img: RasterLike) -> np.ndarray:
    """Single-channel float64 luminance; 3-channel input uses Rec.601 weights."""
    data = np.asarray(img.data if isinstance(img, ViewportImage) else img)
    if data.ndim == 2:
        return data.astype(np.float64)
    if data.ndim == 3 and data.shape[2] == 1:
        return data[:, :, 0].astype(np.float64)
    if data.ndim == 3 and data.shape[2] == 3:
        return data.astype(np.float64) @ np.array(REC601_WEIGHTS)
    raise DomainError(f"luminance needs 1 or 3 channels, got shape {data.shape}")


def prepare_pair(ref: RasterLike, dist: RasterLike) -> Tuple[ViewportImage, np.ndarray, np.ndarray]:
    """Coerce a reference/distorted pair; returns (ref viewport, ref luma, dist luma)."""
    ref_vp = as_viewport(ref)
    dist_vp = as_viewport(dist, ref_vp.bit_depth)
    if ref_vp.shape != dist_vp.shape:
        raise DimensionMismatchError(ref_vp.shape, dist_vp.shape, "reference/distorted")
    return ref_vp, luminance(ref_vp), luminance(dist_vp)


def psnr_from_mse(mse: float, max_value: float) -> float:
    """10 log10(MAX^2 / MSE), ``inf`` when MSE is zero."""
    if mse <= 0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


def score_mse(ref: RasterLike, dist: RasterLike) -> float:
    """Mean squared luminance error over all visible viewport pixels."""
    _, x, y = prepare_pair(ref, dist)
    return float(np.mean((x - y) ** 2))


def score_vpsnr(ref: RasterLike, dist: RasterLike) -> float:
    """Viewport PSNR in dB with MAX taken from the reference bit depth."""
    ref_vp, x, y = prepare_pair(ref, dist)
    return psnr_from_mse(float(np.mean((x - y) ** 2)), ref_vp.max_value)


# --- structural similarity -------------------------------------------------


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian window; the 2-D window is its outer product."""
    radius = size // 2
    taps = np.arange(-radius, radius + 1, dtype=np.float64)
    window = np.exp(-(taps**2) / (2.0 * sigma * sigma))
    return window / window.sum()


def _filter_valid(x: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Separable correlation keeping only fully covered positions."""
    out = ndimage.correlate1d(x, window, axis=0, mode="reflect")
    out = ndimage.correlate1d(out, window, axis=1, mode="reflect")
    r = len(window) // 2
    return out[r : out.shape[0] - r, r : out.shape[1] - r]


def _local_stats(x: np.ndarray, y: np.ndarray, window: np.ndarray):
    mu_x = _filter_valid(x, window)
    mu_y = _filter_valid(y, window)
    var_x = _filter_valid(x * x, window) - mu_x * mu_x
    var_y = _filter_valid(y * y, window) - mu_y * mu_y
    cov = _filter_valid(x * y, window) - mu_x * mu_y
    return mu_x, mu_y, var_x, var_y, cov


def _ratio_or_one(num: np.ndarray, den: np.ndarray, tol: float) -> np.ndarray:
    """num / den with 0/0 defined as 1."""
    safe = den > tol
    return np.where(safe, num / np.where(safe, den, 1.0), 1.0)


def _check_window_fits(shape: Sequence[int], size: int) -> None:
    if min(shape) < size:
        raise DomainError(f"image {tuple(shape)} is smaller than the {size}x{size} window")


def ssim_map(
    x: np.ndarray, y: np.ndarray, max_value: float = 255.0, uqi_mode: bool = False
) -> np.ndarray:
    """Local SSIM (or UQI) values at every fully covered window position."""
    _check_window_fits(x.shape, SSIM_WINDOW)
    mu_x, mu_y, var_x, var_y, cov = _local_stats(x, y, gaussian_window())
    if uqi_mode:
        tol = _ZERO_TOL * max_value * max_value
        lum = _ratio_or_one(2.0 * mu_x * mu_y, mu_x**2 + mu_y**2, tol)
        cs = _ratio_or_one(2.0 * cov, var_x + var_y, tol)
        return lum * cs
    c1 = (SSIM_K1 * max_value) ** 2
    c2 = (SSIM_K2 * max_value) ** 2
    return ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    )


def score_ssim(ref: RasterLike, dist: RasterLike, uqi_mode: bool = False) -> float:
    """Mean SSIM; with ``uqi_mode`` the stabilizing constants are zero (UQI)."""
    ref_vp, x, y = prepare_pair(ref, dist)
    return float(np.mean(ssim_map(x, y, ref_vp.max_value, uqi_mode)))


def score_uqi(ref: RasterLike, dist: RasterLike) -> float:
    return score_ssim(ref, dist, uqi_mode=True)


def downsample2(x: np.ndarray) -> np.ndarray:
    """2x2 block average, dropping a trailing odd row/column."""
    h, w = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
    x = x[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def msssim_terms(
    x: np.ndarray, y: np.ndarray, max_value: float = 255.0, scales: int = 5
) -> Tuple[List[float], List[float]]:
    """Per-scale mean luminance and contrast-structure terms, finest scale first."""
    needed = SSIM_WINDOW * 2 ** (scales - 1)
    if min(x.shape) < needed:
        raise DomainError(
            f"image {x.shape} too small for {scales} scales (needs at least {needed} px per side)"
        )
    c1 = (SSIM_K1 * max_value) ** 2
    c2 = (SSIM_K2 * max_value) ** 2
    window = gaussian_window()
    lum_terms, cs_terms = [], []
    for scale in range(scales):
        mu_x, mu_y, var_x, var_y, cov = _local_stats(x, y, window)
        lum = (2.0 * mu_x * mu_y + c1) / (mu_x**2 + mu_y**2 + c1)
        cs = (2.0 * cov + c2) / (var_x + var_y + c2)
        lum_terms.append(float(np.mean(lum)))
        cs_terms.append(float(np.mean(cs)))
        if scale < scales - 1:
            x, y = downsample2(x), downsample2(y)
    return lum_terms, cs_terms


def combine_msssim(
    luminance_term: float,
    cs_terms: Sequence[float],
    exponents: Sequence[float] = MSSSIM_EXPONENTS,
) -> float:
    """l_M^a_M * prod_j cs_j^a_j with the luminance taken at the coarsest scale.

    The luminance term enters once, from the coarsest scale M, as in the
    usual multi-scale formulation; the finest-scale luminance is not used.
    Negative terms are clamped to zero so fractional powers stay real.
    """
    if len(cs_terms) != len(exponents):
        raise ValidationError(f"{len(cs_terms)} scale terms for {len(exponents)} exponents")
    value = max(luminance_term, 0.0) ** exponents[-1]
    for term, exponent in zip(cs_terms, exponents):
        value *= max(term, 0.0) ** exponent
    return float(value)


def score_msssim(ref: RasterLike, dist: RasterLike) -> float:
    """Five-scale MS-SSIM with the canonical exponents."""
    ref_vp, x, y = prepare_pair(ref, dist)
    lum_terms, cs_terms = msssim_terms(x, y, ref_vp.max_value, len(MSSSIM_EXPONENTS))
    return combine_msssim(lum_terms[-1], cs_terms)


# --- contrast sensitivity ----------------------------------------------------


def mannos_sakrison_csf(f) -> np.ndarray:
    """A(f) = 2.6 (0.0192 + 0.114 f) exp(-(0.114 f)^1.1), f in cycles/degree."""
    f = np.asarray(f, dtype=np.float64)
    return 2.6 * (0.0192 + 0.114 * f) * np.exp(-((0.114 * f) ** 1.1))


def frequency_grid(shape: Tuple[int, int], dpp: Tuple[float, float]) -> np.ndarray:
    """Radial DFT-bin frequency in cycles/degree for a raster of ``shape``."""
    rows, cols = shape
    fy = np.fft.fftfreq(rows) / dpp[1]
    fx = np.fft.fftfreq(cols) / dpp[0]
    return np.hypot(fy[:, None], fx[None, :])


def resolve_geometry(
    ref: ViewportImage, geometry: Optional[VirtualGeometry], metric: str
) -> VirtualGeometry:
    geometry = geometry or ref.geometry
    if geometry is None:
        raise ValidationError(f"{metric} needs the virtual viewport geometry")
    return geometry


def csf_weights(shape: Tuple[int, int], geometry: VirtualGeometry) -> np.ndarray:
    return mannos_sakrison_csf(frequency_grid(shape, degrees_per_pixel(geometry)))


def csf_filter(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Filter a raster by a real, even frequency response; returns the real part."""
    return np.real(np.fft.ifft2(np.fft.fft2(x) * weights))


def weighted_snr(signal_power: float, noise_power: float) -> float:
    if noise_power <= 0:
        return math.inf
    return 10.0 * math.log10(signal_power / noise_power)


def score_wsnr(
    ref: RasterLike, dist: RasterLike, geometry: Optional[VirtualGeometry] = None
) -> float:
    """CSF-weighted signal-to-noise ratio in dB."""
    ref_vp, x, y = prepare_pair(ref, dist)
    weights = csf_weights(x.shape, resolve_geometry(ref_vp, geometry, "WSNR"))
    signal = np.abs(np.fft.fft2(x) * weights) ** 2
    noise = np.abs(np.fft.fft2(x - y) * weights) ** 2
    return weighted_snr(float(signal.sum()), float(noise.sum()))
