"""Foveation sensitivity model and the foveal metrics FPSNR, FWSNR, FSSIM, FWQI.

All four share one spatial weighting: the normalized cutoff frequency
w(e) = f_c(e) / f_c(0) = e2 / (e + e2), which is 1 at the foveation point
and halves at e = e2.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
import pywt

from .errors import DimensionMismatchError, DomainError, UndefinedReferenceError, ValidationError
from .geometry import EccentricityMap, VirtualGeometry, degrees_per_pixel, display_nyquist
from .metrics import (
    SSIM_K1,
    SSIM_K2,
    csf_filter,
    csf_weights,
    mannos_sakrison_csf,
    prepare_pair,
    psnr_from_mse,
    resolve_geometry,
    weighted_snr,
)
from .raster_io import RasterLike

FSSIM_BLOCK = 8
FWQI_LEVELS = 4


@dataclass(frozen=True)
class FoveationModel:
    """Contrast-threshold model of foveated vision.

    ``display_nyquist`` caps the cutoff frequency; it is infinite unless the
    model is tied to a display geometry.
    """

    alpha: float = 0.106
    e2_halfres: float = 2.3
    ct0: float = 1.0 / 64.0
    display_nyquist: float = math.inf

    def __post_init__(self):
        if not (self.alpha > 0 and self.e2_halfres > 0 and self.display_nyquist > 0):
            raise ValidationError("foveation model parameters must be positive")
        if not 0 < self.ct0 < 1:
            raise ValidationError(f"ct0 must lie in (0, 1), got {self.ct0}")

    @classmethod
    def for_geometry(cls, vg: VirtualGeometry, **overrides) -> "FoveationModel":
        return replace(cls(**overrides), display_nyquist=display_nyquist(vg))


DEFAULT_FOVEATION = FoveationModel()


def cutoff_frequency(e, fm: FoveationModel = DEFAULT_FOVEATION):
    """Highest visible frequency (cycles/degree) at eccentricity ``e`` degrees."""
    e = np.asarray(e, dtype=np.float64)
    if np.any(e < 0):
        raise DomainError("eccentricity must be non-negative")
    fc = fm.e2_halfres * math.log(1.0 / fm.ct0) / (fm.alpha * (e + fm.e2_halfres))
    fc = np.minimum(fc, fm.display_nyquist)
    return float(fc) if fc.ndim == 0 else fc


def foveal_weight(e, fm: FoveationModel = DEFAULT_FOVEATION):
    """w(e) = e2 / (e + e2)."""
    e = np.asarray(e, dtype=np.float64)
    if np.any(e < 0):
        raise DomainError("eccentricity must be non-negative")
    w = fm.e2_halfres / (e + fm.e2_halfres)
    return float(w) if w.ndim == 0 else w


def foveal_weight_map(em: EccentricityMap, fm: FoveationModel = DEFAULT_FOVEATION) -> np.ndarray:
    """Per-pixel foveal weights in (0, 1]."""
    return foveal_weight(em.values, fm)


def _check_weights(weight_map: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    weights = np.asarray(weight_map, dtype=np.float64)
    if weights.shape != tuple(shape):
        raise DimensionMismatchError(shape, weights.shape, "image/weight map")
    if np.any(weights < 0) or not np.any(weights > 0):
        raise ValidationError("weight maps must be non-negative and not all zero")
    return weights


def score_fpsnr(ref: RasterLike, dist: RasterLike, weight_map: np.ndarray) -> float:
    """PSNR of the foveally weighted MSE."""
    ref_vp, x, y = prepare_pair(ref, dist)
    w = _check_weights(weight_map, x.shape)
    fmse = float(np.sum(w * (x - y) ** 2) / np.sum(w))
    return psnr_from_mse(fmse, ref_vp.max_value)


def score_fwsnr(
    ref: RasterLike,
    dist: RasterLike,
    weight_map: np.ndarray,
    geometry: Optional[VirtualGeometry] = None,
) -> float:
    """WSNR whose CSF-filtered signal and error are weighted spatially."""
    ref_vp, x, y = prepare_pair(ref, dist)
    w = _check_weights(weight_map, x.shape)
    csf = csf_weights(x.shape, resolve_geometry(ref_vp, geometry, "FWSNR"))
    signal = csf_filter(x, csf)
    error = csf_filter(x - y, csf)
    return weighted_snr(float(np.sum(w * signal**2)), float(np.sum(w * error**2)))


def block_ssim(
    x: np.ndarray, y: np.ndarray, max_value: float = 255.0, block: int = FSSIM_BLOCK
) -> np.ndarray:
    """SSIM of every non-overlapping ``block`` x ``block`` macroblock.

    Remainder rows and columns are dropped.
    """
    rows, cols = x.shape[0] // block, x.shape[1] // block
    if rows == 0 or cols == 0:
        raise DomainError(f"image {x.shape} is smaller than one {block}x{block} block")

    def tiles(a):
        a = a[: rows * block, : cols * block]
        return a.reshape(rows, block, cols, block).swapaxes(1, 2)

    bx, by = tiles(x), tiles(y)
    mu_x = bx.mean(axis=(2, 3))
    mu_y = by.mean(axis=(2, 3))
    var_x = bx.var(axis=(2, 3))
    var_y = by.var(axis=(2, 3))
    cov = ((bx - mu_x[..., None, None]) * (by - mu_y[..., None, None])).mean(axis=(2, 3))
    c1 = (SSIM_K1 * max_value) ** 2
    c2 = (SSIM_K2 * max_value) ** 2
    return ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    )


def block_center_weights(weight_map: np.ndarray, block: int = FSSIM_BLOCK) -> np.ndarray:
    """Weight at the center pixel (offset block // 2) of every full block."""
    rows, cols = weight_map.shape[0] // block, weight_map.shape[1] // block
    centers = np.arange(rows) * block + block // 2, np.arange(cols) * block + block // 2
    return weight_map[np.ix_(*centers)]


def pool_weighted(scores: np.ndarray, weights: np.ndarray) -> float:
    """sum(w * s) / sum(w)."""
    scores = np.asarray(scores, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    return float(np.sum(weights * scores) / np.sum(weights))


def score_fssim(
    ref: RasterLike, dist: RasterLike, weight_map: np.ndarray, block: int = FSSIM_BLOCK
) -> float:
    """Foveally weighted mean of macroblock SSIM."""
    ref_vp, x, y = prepare_pair(ref, dist)
    w = _check_weights(weight_map, x.shape)
    scores = block_ssim(x, y, ref_vp.max_value, block)
    return pool_weighted(scores, block_center_weights(w, block))


def _pad_to_multiple(x: np.ndarray, multiple: int) -> np.ndarray:
    pad_rows = (-x.shape[0]) % multiple
    pad_cols = (-x.shape[1]) % multiple
    if pad_rows == 0 and pad_cols == 0:
        return x
    return np.pad(x, ((0, pad_rows), (0, pad_cols)), mode="symmetric")


def haar_subbands(x: np.ndarray, levels: int = FWQI_LEVELS):
    """Orthonormal Haar decomposition.

    Returns a list of ``(level, coefficients)`` pairs: the approximation at
    ``levels`` first, then the three detail bands of each level from coarse
    to fine. Both sides must be divisible by 2**levels.
    """
    coeffs = pywt.wavedec2(x, "haar", mode="periodization", level=levels)
    bands = [(levels, coeffs[0])]
    for offset, details in enumerate(coeffs[1:]):
        level = levels - offset
        bands.extend((level, band) for band in details)
    return bands


def subband_center_frequency(level: int, approximation: bool = False) -> float:
    """Center of a dyadic band in cycles/pixel.

    Details at level j span [2^-(j+1), 2^-j]; the level-L approximation spans
    [0, 2^-(L+1)].
    """
    if approximation:
        return 2.0 ** -(level + 2)
    return 0.75 * 2.0**-level


def _support_weights(weight_map: np.ndarray, level: int, shape: Tuple[int, int]) -> np.ndarray:
    step = 2**level
    rows = np.arange(shape[0]) * step + step // 2
    cols = np.arange(shape[1]) * step + step // 2
    return weight_map[np.ix_(rows, cols)]


def score_fwqi(
    ref: RasterLike,
    dist: RasterLike,
    weight_map: np.ndarray,
    geometry: Optional[VirtualGeometry] = None,
    levels: int = FWQI_LEVELS,
) -> float:
    """Foveated wavelet quality index 1 / (1 + NWE).

    Each Haar coefficient is weighted by the foveal weight at the center of
    its spatial support times the CSF gain at its subband's center frequency.
    """
    ref_vp, x, y = prepare_pair(ref, dist)
    w = _check_weights(weight_map, x.shape)
    dpp = float(np.mean(degrees_per_pixel(resolve_geometry(ref_vp, geometry, "FWQI"))))

    multiple = 2**levels
    x, y, w = (_pad_to_multiple(a, multiple) for a in (x, y, w))
    ref_bands = haar_subbands(x, levels)
    dist_bands = haar_subbands(y, levels)

    error_energy = 0.0
    ref_energy = 0.0
    for index, ((level, cr), (_, cd)) in enumerate(zip(ref_bands, dist_bands)):
        freq = subband_center_frequency(level, approximation=index == 0) / dpp
        gain = float(mannos_sakrison_csf(freq))
        cw = gain * _support_weights(w, level, cr.shape)
        error_energy += float(np.sum(cw * (cr - cd) ** 2))
        ref_energy += float(np.sum(cw * cr**2))

    if ref_energy <= 0:
        raise UndefinedReferenceError("FWQI is undefined for an all-zero reference")
    return 1.0 / (1.0 + math.sqrt(error_energy / ref_energy))
