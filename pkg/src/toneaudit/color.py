"""sRGB <-> CIELAB conversion and perceptual color difference.

All conversions assume the sRGB encoding (IEC 61966-2-1) with a D65 white
point and the 2-degree observer. Computation is float64 end to end; 8-bit
quantization happens only when an image buffer is encoded.

Functions accept either a single color (shape ``(3,)``) or a stack of colors
(shape ``(..., 3)``) and broadcast accordingly.
"""

from __future__ import annotations

import numpy as np

# sRGB (linear) -> XYZ for D65, 2-degree observer.
_M_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_M_XYZ_TO_RGB = np.linalg.inv(_M_RGB_TO_XYZ)

# Reference white = matrix row sums, so (255,255,255) maps to L*=100, a*=b*=0.
_WHITE = _M_RGB_TO_XYZ.sum(axis=1)

_EPSILON = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


def srgb_decode(channels: np.ndarray) -> np.ndarray:
    """8-bit sRGB channel values -> linear light in [0, 1]."""
    c = np.asarray(channels, dtype=np.float64) / 255.0
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    """Linear light in [0, 1] -> 8-bit sRGB channel values (float, unclamped)."""
    lin = np.asarray(linear, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        enc = np.where(
            lin <= 0.0031308,
            12.92 * lin,
            1.055 * np.maximum(lin, 0.0) ** (1.0 / 2.4) - 0.055,
        )
    return enc * 255.0


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _EPSILON, np.cbrt(t), (_KAPPA * t + 16.0) / 116.0)


def _lab_f_inv(f: np.ndarray) -> np.ndarray:
    f3 = f ** 3
    return np.where(f3 > _EPSILON, f3, (116.0 * f - 16.0) / _KAPPA)


def srgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert 8-bit sRGB colors (``(..., 3)``) to CIELAB float64."""
    lin = srgb_decode(np.asarray(rgb))
    xyz = lin @ _M_RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    L = 116.0 * fy - 16.0
    a = 500.0 * (fx - fy)
    b = 200.0 * (fy - fz)
    return np.stack([L, a, b], axis=-1)


def lab_to_srgb(lab: np.ndarray) -> np.ndarray:
    """Convert CIELAB colors to 8-bit sRGB, clamping out-of-gamut channels.

    Clamping is per channel to [0, 255]; rounding is half away from zero.
    Only intended for rendering (swatches, normalized previews), never for
    measurement.
    """
    lab = np.asarray(lab, dtype=np.float64)
    L, a, b = lab[..., 0], lab[..., 1], lab[..., 2]
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _WHITE
    enc = srgb_encode(xyz @ _M_XYZ_TO_RGB.T)
    return np.clip(np.floor(enc + 0.5), 0.0, 255.0).astype(np.uint8)


def delta_e_76(lab1: np.ndarray, lab2: np.ndarray) -> np.ndarray:
    """Plain Euclidean distance in CIELAB (the CIE 1976 delta E)."""
    d = np.asarray(lab1, dtype=np.float64) - np.asarray(lab2, dtype=np.float64)
    return np.sqrt((d ** 2).sum(axis=-1))


def delta_e_2000(lab1: np.ndarray, lab2: np.ndarray) -> np.ndarray:
    """CIEDE2000 color difference with kL = kC = kH = 1.

    Follows the standard formulation (hue rotation term, lightness/chroma/hue
    weighting functions, G chroma compensation). Symmetric in its arguments
    and zero exactly on identical inputs.
    """
    lab1 = np.asarray(lab1, dtype=np.float64)
    lab2 = np.asarray(lab2, dtype=np.float64)
    L1, a1, b1 = lab1[..., 0], lab1[..., 1], lab1[..., 2]
    L2, a2, b2 = lab2[..., 0], lab2[..., 1], lab2[..., 2]

    C1 = np.hypot(a1, b1)
    C2 = np.hypot(a2, b2)
    C_bar = 0.5 * (C1 + C2)
    C_bar7 = C_bar ** 7
    G = 0.5 * (1.0 - np.sqrt(C_bar7 / (C_bar7 + 25.0 ** 7)))

    a1p = (1.0 + G) * a1
    a2p = (1.0 + G) * a2
    C1p = np.hypot(a1p, b1)
    C2p = np.hypot(a2p, b2)

    h1p = np.degrees(np.arctan2(b1, a1p)) % 360.0
    h2p = np.degrees(np.arctan2(b2, a2p)) % 360.0
    h1p = np.where(C1p == 0.0, 0.0, h1p)
    h2p = np.where(C2p == 0.0, 0.0, h2p)

    dLp = L2 - L1
    dCp = C2p - C1p

    dh = h2p - h1p
    dh = np.where(dh > 180.0, dh - 360.0, dh)
    dh = np.where(dh < -180.0, dh + 360.0, dh)
    dh = np.where(C1p * C2p == 0.0, 0.0, dh)
    dHp = 2.0 * np.sqrt(C1p * C2p) * np.sin(np.radians(dh) / 2.0)

    Lp_bar = 0.5 * (L1 + L2)
    Cp_bar = 0.5 * (C1p + C2p)

    hsum = h1p + h2p
    hdiff = np.abs(h1p - h2p)
    hp_bar = np.where(
        hdiff <= 180.0,
        0.5 * hsum,
        np.where(hsum < 360.0, 0.5 * (hsum + 360.0), 0.5 * (hsum - 360.0)),
    )
    hp_bar = np.where(C1p * C2p == 0.0, hsum, hp_bar)

    T = (
        1.0
        - 0.17 * np.cos(np.radians(hp_bar - 30.0))
        + 0.24 * np.cos(np.radians(2.0 * hp_bar))
        + 0.32 * np.cos(np.radians(3.0 * hp_bar + 6.0))
        - 0.20 * np.cos(np.radians(4.0 * hp_bar - 63.0))
    )

    d_theta = 30.0 * np.exp(-(((hp_bar - 275.0) / 25.0) ** 2))
    Cp_bar7 = Cp_bar ** 7
    RC = 2.0 * np.sqrt(Cp_bar7 / (Cp_bar7 + 25.0 ** 7))
    RT = -np.sin(np.radians(2.0 * d_theta)) * RC

    Lm50 = (Lp_bar - 50.0) ** 2
    SL = 1.0 + 0.015 * Lm50 / np.sqrt(20.0 + Lm50)
    SC = 1.0 + 0.045 * Cp_bar
    SH = 1.0 + 0.015 * Cp_bar * T

    tL = dLp / SL
    tC = dCp / SC
    tH = dHp / SH
    return np.sqrt(tL ** 2 + tC ** 2 + tH ** 2 + RT * tC * tH)


def color_distance(lab1: np.ndarray, lab2: np.ndarray, metric: str = "de2000") -> np.ndarray:
    """Dispatch between the two supported metrics (``de2000`` or ``de76``)."""
    if metric == "de2000":
        return delta_e_2000(lab1, lab2)
    if metric == "de76":
        return delta_e_76(lab1, lab2)
    raise ValueError(f"unknown color distance metric: {metric!r}")
