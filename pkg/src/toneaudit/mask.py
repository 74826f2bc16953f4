"""Skin mask construction from dense 468-point facial landmarks.

The mask is the rasterized convex hull of the skin-basis landmarks, unioned
with a tapered forehead trapezoid, minus dilated feature polygons (eyes,
brows, lips, nostrils). Rasterization rule: a pixel belongs to a polygon if
its center (x + 0.5, y + 0.5) is inside under even-odd fill. This makes the
raster reproducible bit for bit regardless of platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import InsufficientSkinArea, TopologyError

MESH_POINT_COUNT = 468

FEATURE_GROUPS = ("left_eye", "right_eye", "left_brow", "right_brow", "lips_outer", "nostrils")

# min_skin_pixels is calibrated for 1024x1024 input and rescaled by area.
REFERENCE_PIXEL_COUNT = 1024 * 1024


@dataclass
class LandmarkSet:
    """468 landmark coordinates normalized to [0,1], plus detector metadata."""

    points: np.ndarray          # (468, 2) float, normalized to image dims
    face_bbox: tuple[float, float, float, float]   # x, y, w, h in pixels
    confidence: float = 1.0

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (MESH_POINT_COUNT, 2):
            raise ValueError(f"expected ({MESH_POINT_COUNT}, 2) landmarks, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmark coordinates must be finite")
        self.points = pts

    def pixel_points(self, width: int, height: int) -> np.ndarray:
        return self.points * np.array([width, height], dtype=np.float64)


@dataclass
class SkinMask:
    bits: np.ndarray            # (h, w) bool

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def skin_pixel_count(self) -> int:
        return int(np.count_nonzero(self.bits))


@dataclass
class MaskParams:
    forehead_scale: float = 0.25
    forehead_taper: float = 0.70
    feature_dilation_px: int = 3
    min_skin_pixels: int = 500

    def min_pixels_for(self, width: int, height: int) -> int:
        scaled = self.min_skin_pixels * (width * height) / REFERENCE_PIXEL_COUNT
        return max(1, int(round(scaled)))


@dataclass
class LandmarkTopology:
    """Named landmark index sets over the 468-point mesh, loaded from config."""

    schema_version: int
    face_oval: list[int]
    left_eye: list[int]
    right_eye: list[int]
    left_brow: list[int]
    right_brow: list[int]
    lips_outer: list[int]
    nostrils: list[list[int]]   # one perimeter per nostril polygon
    skin_hull_basis: list[int]
    source: str = ""

    def feature_polygons(self) -> list[list[int]]:
        polys = [self.left_eye, self.right_eye, self.left_brow, self.right_brow, self.lips_outer]
        polys.extend(self.nostrils)
        return polys


def load_topology(path: str | Path) -> LandmarkTopology:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        topo = LandmarkTopology(
            schema_version=int(raw["schema_version"]),
            face_oval=[int(i) for i in raw["face_oval"]],
            left_eye=[int(i) for i in raw["left_eye"]],
            right_eye=[int(i) for i in raw["right_eye"]],
            left_brow=[int(i) for i in raw["left_brow"]],
            right_brow=[int(i) for i in raw["right_brow"]],
            lips_outer=[int(i) for i in raw["lips_outer"]],
            nostrils=[[int(i) for i in poly] for poly in raw["nostrils"]],
            skin_hull_basis=[int(i) for i in raw["skin_hull_basis"]],
            source=str(raw.get("source", "")),
        )
    except KeyError as exc:
        raise TopologyError(f"topology config missing key {exc}") from exc
    all_indices = (
        topo.face_oval + topo.left_eye + topo.right_eye + topo.left_brow
        + topo.right_brow + topo.lips_outer + [i for p in topo.nostrils for i in p]
        + topo.skin_hull_basis
    )
    bad = [i for i in all_indices if not 0 <= i < MESH_POINT_COUNT]
    if bad:
        raise TopologyError(f"landmark indices out of range [0, {MESH_POINT_COUNT}): {sorted(set(bad))}")
    return topo


def default_topology_path() -> Path:
    return Path(__file__).parent / "data" / "topology.json"


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull polygon (CCW, no repeated endpoint) via monotone chain."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) <= 2:
        return pts
    # lexicographic sort by (x, y)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def rasterize_polygon(polygon: np.ndarray, width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill; pixel centers at (x+0.5, y+0.5). Clips to bounds."""
    out = np.zeros((height, width), dtype=bool)
    poly = np.asarray(polygon, dtype=np.float64)
    if len(poly) < 3:
        return out
    ys = poly[:, 1]
    y_lo = max(0, int(np.floor(ys.min() - 0.5)))
    y_hi = min(height - 1, int(np.ceil(ys.max())))
    x1 = poly[:, 0]
    y1 = poly[:, 1]
    x2 = np.roll(x1, -1)
    y2 = np.roll(y1, -1)
    for row in range(y_lo, y_hi + 1):
        yc = row + 0.5
        # half-open edge rule avoids double-counting shared vertices
        active = ((y1 <= yc) & (yc < y2)) | ((y2 <= yc) & (yc < y1))
        if not active.any():
            continue
        t = (yc - y1[active]) / (y2[active] - y1[active])
        xs = np.sort(x1[active] + t * (x2[active] - x1[active]))
        for xa, xb in zip(xs[0::2], xs[1::2]):
            lo = max(0, int(np.ceil(xa - 0.5)))
            hi = min(width, int(np.ceil(xb - 0.5)))
            if hi > lo:
                out[row, lo:hi] = True
    return out


def _disk(radius: int) -> np.ndarray:
    if radius <= 0:
        return np.ones((1, 1), dtype=bool)
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return xx ** 2 + yy ** 2 <= radius ** 2


def dilate(bits: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return bits
    return ndimage.binary_dilation(bits, structure=_disk(radius))


def forehead_quad(lm: LandmarkSet, params: MaskParams, width: int, height: int,
                  hull_points: np.ndarray | None = None) -> np.ndarray:
    """Tapered trapezoid extending the hull top edge upward.

    Base chord: leftmost/rightmost of the hull points lying within the top
    10% of the hull's vertical extent. Extended upward by
    forehead_scale x face bbox height; top edge width = taper x base width.
    Returns an empty array when forehead_scale is 0 or the base degenerates.
    """
    if params.forehead_scale <= 0.0:
        return np.empty((0, 2))
    if hull_points is None:
        hull_points = lm.pixel_points(width, height)
    hull_points = np.asarray(hull_points, dtype=np.float64)
    y_min = hull_points[:, 1].min()
    y_span = hull_points[:, 1].max() - y_min
    top = hull_points[hull_points[:, 1] <= y_min + 0.10 * y_span]
    left = top[np.argmin(top[:, 0])]
    right = top[np.argmax(top[:, 0])]
    base_width = right[0] - left[0]
    if base_width <= 0.0:
        return np.empty((0, 2))
    face_height = float(lm.face_bbox[3])
    y_top = min(left[1], right[1]) - params.forehead_scale * face_height
    cx = 0.5 * (left[0] + right[0])
    half_top = 0.5 * params.forehead_taper * base_width
    return np.array([
        [left[0], left[1]],
        [right[0], right[1]],
        [cx + half_top, y_top],
        [cx - half_top, y_top],
    ])


def build_skin_mask(lm: LandmarkSet, width: int, height: int,
                    topo: LandmarkTopology, params: MaskParams) -> SkinMask:
    """Hull-of-skin-basis union forehead quad, minus dilated feature polygons."""
    pts = lm.pixel_points(width, height)
    basis = pts[topo.skin_hull_basis]
    hull = convex_hull(basis)
    region = rasterize_polygon(hull, width, height)

    quad = forehead_quad(lm, params, width, height, hull_points=basis)
    if len(quad):
        region |= rasterize_polygon(quad, width, height)

    for indices in topo.feature_polygons():
        feature = rasterize_polygon(pts[indices], width, height)
        region &= ~dilate(feature, params.feature_dilation_px)

    mask = SkinMask(bits=region)
    needed = params.min_pixels_for(width, height)
    if mask.skin_pixel_count < needed:
        raise InsufficientSkinArea(
            f"skin mask has {mask.skin_pixel_count} pixels, need {needed}"
        )
    return mask


def face_exclusion_region(lm: LandmarkSet, width: int, height: int,
                          params: MaskParams) -> np.ndarray:
    """Region excluded from background sampling during illuminant estimation.

    Convex hull of all 468 landmarks plus the forehead quad corners, dilated
    by 10% of the face bbox height so hair fringe and chin shadow stay out of
    the background sample.
    """
    pts = lm.pixel_points(width, height)
    quad = forehead_quad(lm, params, width, height, hull_points=pts)
    cloud = np.vstack([pts, quad]) if len(quad) else pts
    hull = convex_hull(cloud)
    region = rasterize_polygon(hull, width, height)
    radius = int(round(0.10 * float(lm.face_bbox[3])))
    return dilate(region, radius)


def mask_coverage(mask: SkinMask, face_bbox: tuple[float, float, float, float]) -> float:
    """Skin pixel count over bbox area; QA metric recorded per image."""
    area = float(face_bbox[2]) * float(face_bbox[3])
    if area <= 0.0:
        raise ValueError("face bbox has zero area")
    return mask.skin_pixel_count / area
