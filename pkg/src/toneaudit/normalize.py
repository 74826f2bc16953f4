"""Hybrid illumination normalization.

Order of operations per image: CLAHE on the CIELAB lightness channel, a 50/50
blend with the original, then background-referenced white balance estimated
from the brightest pixels outside the (dilated) face region.

White-balance gains are multiplicative on the 8-bit sRGB channels. Two
white-point target policies are supported:

``luminance``      gains scale the estimated illuminant onto the neutral gray
                   with the same Rec.709 relative luminance. Hue casts are
                   neutralized while overall brightness is untouched, so a
                   pure exposure difference is deliberately not "corrected".
``anchor_to_max``  gains scale the illuminant onto its own maximum channel
                   (gain 1.0 on that channel, >= 1.0 elsewhere).

``luminance`` is the default: it is the only policy under which the measured
tone of a hue-cast image converges back to its un-cast value, which is the
property the whole pipeline is audited against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .color import lab_to_srgb, srgb_decode, srgb_encode, srgb_to_lab
from .errors import NoBackgroundReference
from .mask import LandmarkSet, MaskParams, face_exclusion_region

_HIST_BINS = 256
_REC709 = np.array([0.2126, 0.7152, 0.0722])

WHITE_TARGET_POLICIES = ("luminance", "anchor_to_max")


@dataclass
class NormalizationParams:
    clahe_clip_limit: float = 2.0
    clahe_tile_grid: tuple[int, int] = (8, 8)   # (rows, cols)
    blend_alpha: float = 0.5
    bright_fraction: float = 0.05
    gain_clamp: tuple[float, float] = (0.5, 2.0)
    background_floor: int = 1000
    white_target: str = "luminance"
    enabled: bool = True


@dataclass
class WhiteBalanceGains:
    g_r: float = 1.0
    g_g: float = 1.0
    g_b: float = 1.0
    policy: str = "identity"
    clamped: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.g_r, self.g_g, self.g_b])

    @property
    def is_identity(self) -> bool:
        return self.g_r == self.g_g == self.g_b == 1.0


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5))


def _tile_edges(extent: int, tiles: int) -> np.ndarray:
    return np.round(np.linspace(0, extent, tiles + 1)).astype(int)


def _equalization_lut(values: np.ndarray, clip_limit: float) -> np.ndarray:
    """Clipped-histogram equalization LUT for one tile (256 bins)."""
    hist = np.bincount(values, minlength=_HIST_BINS).astype(np.float64)
    npix = float(values.size)
    if clip_limit > 0:
        limit = clip_limit * npix / _HIST_BINS
        excess = np.maximum(hist - limit, 0.0).sum()
        hist = np.minimum(hist, limit) + excess / _HIST_BINS
    cdf = np.cumsum(hist)
    return np.clip(np.round(cdf / npix * (_HIST_BINS - 1)), 0, _HIST_BINS - 1)


def clahe_lightness_plane(L: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """Apply CLAHE to an L* plane (values in [0, 100]); returns a new plane.

    L* is rescaled onto a 256-bin integer domain, equalized per tile with a
    clipped histogram, and mapped back through bilinear interpolation between
    the four surrounding tile LUTs.
    """
    h, w = L.shape
    v = np.clip(np.round(L / 100.0 * (_HIST_BINS - 1)), 0, _HIST_BINS - 1).astype(np.int64)

    grid_y = max(1, min(params.clahe_tile_grid[0], h))
    grid_x = max(1, min(params.clahe_tile_grid[1], w))
    ey = _tile_edges(h, grid_y)
    ex = _tile_edges(w, grid_x)

    luts = np.empty((grid_y, grid_x, _HIST_BINS))
    for ty in range(grid_y):
        for tx in range(grid_x):
            tile = v[ey[ty]:ey[ty + 1], ex[tx]:ex[tx + 1]]
            luts[ty, tx] = _equalization_lut(tile.ravel(), params.clahe_clip_limit)

    if grid_y == 1 and grid_x == 1:
        mapped = luts[0, 0][v]
    else:
        cy = (ey[:-1] + ey[1:]) / 2.0 - 0.5
        cx = (ex[:-1] + ex[1:]) / 2.0 - 0.5
        rows = np.arange(h, dtype=np.float64)
        cols = np.arange(w, dtype=np.float64)

        def weights(coords: np.ndarray, centers: np.ndarray):
            if len(centers) == 1:
                idx = np.zeros(len(coords), dtype=int)
                return idx, idx, np.zeros(len(coords))
            i0 = np.clip(np.searchsorted(centers, coords) - 1, 0, len(centers) - 2)
            frac = (coords - centers[i0]) / (centers[i0 + 1] - centers[i0])
            return i0, i0 + 1, np.clip(frac, 0.0, 1.0)

        y0, y1, wy = weights(rows, cy)
        x0, x1, wx = weights(cols, cx)
        y0g, y1g = y0[:, None], y1[:, None]
        x0g, x1g = x0[None, :], x1[None, :]
        wyg, wxg = wy[:, None], wx[None, :]
        mapped = (
            (1 - wyg) * (1 - wxg) * luts[y0g, x0g, v]
            + (1 - wyg) * wxg * luts[y0g, x1g, v]
            + wyg * (1 - wxg) * luts[y1g, x0g, v]
            + wyg * wxg * luts[y1g, x1g, v]
        )
    return mapped / (_HIST_BINS - 1) * 100.0


def clahe_lightness(img: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """CLAHE on L* of an sRGB image; a*/b* pass through untouched.

    The chroma planes are bit-identical in Lab space; re-encoding to 8-bit
    sRGB can move them by at most one quantization step.
    """
    lab = srgb_to_lab(img)
    lab[..., 0] = clahe_lightness_plane(lab[..., 0], params)
    return lab_to_srgb(lab)


def blend(base: np.ndarray, processed: np.ndarray, alpha: float) -> np.ndarray:
    """Per-channel convex combination, rounded half away from zero."""
    if base.shape != processed.shape:
        raise ValueError(f"dimension mismatch: {base.shape} vs {processed.shape}")
    if alpha == 0.0:
        return base.copy()
    if alpha == 1.0:
        return processed.copy()
    mix = (1.0 - alpha) * base.astype(np.float64) + alpha * processed.astype(np.float64)
    return _round_half_away(mix).astype(np.uint8)


def relative_luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec.709 luminance of 8-bit sRGB pixels, computed on linearized channels."""
    return srgb_decode(rgb) @ _REC709


def estimate_illuminant(img: np.ndarray, face_exclusion: np.ndarray,
                        params: NormalizationParams) -> WhiteBalanceGains:
    """Estimate the scene illuminant from the brightest background pixels.

    The illuminant is the per-channel mean of the top ``bright_fraction``
    background pixels ranked by relative luminance. Gains map it onto the
    white-point target (see module docstring) and are clamped to
    ``gain_clamp``.
    """
    background = img[~face_exclusion]
    if background.shape[0] < params.background_floor:
        raise NoBackgroundReference(
            f"{background.shape[0]} background pixels, floor is {params.background_floor}"
        )
    lum = relative_luminance(background)
    n_top = max(1, int(round(params.bright_fraction * background.shape[0])))
    brightest = background[np.argsort(-lum, kind="stable")[:n_top]]
    illuminant = np.maximum(brightest.astype(np.float64).mean(axis=0), 1e-9)

    if params.white_target == "anchor_to_max":
        target = illuminant.max()
    elif params.white_target == "luminance":
        target = float(srgb_encode(srgb_decode(illuminant) @ _REC709))
    else:
        raise ValueError(f"unknown white target policy: {params.white_target!r}")

    raw = target / illuminant
    lo, hi = params.gain_clamp
    gains = np.clip(raw, lo, hi)
    return WhiteBalanceGains(
        g_r=float(gains[0]), g_g=float(gains[1]), g_b=float(gains[2]),
        policy=params.white_target, clamped=bool(np.any(gains != raw)),
    )


def apply_white_balance(img: np.ndarray, gains: WhiteBalanceGains) -> np.ndarray:
    """Multiply every channel by its gain, clamped to [0, 255]."""
    out = img.astype(np.float64) * gains.as_array()
    return np.clip(_round_half_away(out), 0, 255).astype(np.uint8)


def normalize_image(img: np.ndarray, lm: LandmarkSet,
                    params: NormalizationParams,
                    mask_params: MaskParams | None = None
                    ) -> tuple[np.ndarray, WhiteBalanceGains, list[str]]:
    """Full normalization: CLAHE -> blend -> illuminant estimate -> white balance.

    A missing background reference is not fatal: identity gains are applied
    and the condition is surfaced in the returned flags.
    """
    flags: list[str] = []
    if not params.enabled:
        return img.copy(), WhiteBalanceGains(), ["normalization_disabled"]
    if mask_params is None:
        mask_params = MaskParams()

    contrast = clahe_lightness(img, params)
    blended = blend(img, contrast, params.blend_alpha)

    h, w = img.shape[:2]
    exclusion = face_exclusion_region(lm, w, h, mask_params)
    try:
        gains = estimate_illuminant(blended, exclusion, params)
    except NoBackgroundReference:
        gains = WhiteBalanceGains()
        flags.append("no_background_reference")
    if gains.clamped:
        flags.append("gain_clamped")
    return apply_white_balance(blended, gains), gains, flags
