"""Synthetic fixture corpus: flat-skin face images with matching sidecars.

Each fixture is a face-shaped region painted in a single known color over a
uniform gray background, plus a sidecar whose 468 landmarks come from a fixed
parametric template. Because the painted tone is known exactly, fixtures give
the full pipeline a measurable ground truth: the extracted representative
tone of an uncast fixture is the paint color itself.

Casts are diagonal per-channel gains. ``compensated_cast`` draws hue casts
whose Rec.709 luminance (computed on linearized channels) matches the neutral
background, the family of casts the default white-balance policy is built to
undo; see the normalize module docstring for why pure exposure scaling is out
of scope.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .color import srgb_decode, srgb_encode
from .mask import (
    LandmarkSet,
    MaskParams,
    convex_hull,
    forehead_quad,
    load_topology,
    default_topology_path,
    rasterize_polygon,
)

_REC709 = np.array([0.2126, 0.7152, 0.0722])

FIXTURE_SIZE = 256
FIXTURE_BACKGROUND = 200

# face-local template geometry, normalized image coordinates
_CX, _CY = 0.5, 0.55
_RX, _RY = 0.25, 0.32


def _ring(n: int, cx: float, cy: float, rx: float, ry: float) -> np.ndarray:
    t = np.arange(n) * 2 * np.pi / n
    return np.column_stack([cx + rx * np.sin(t), cy - ry * np.cos(t)])


def landmark_template() -> np.ndarray:
    """Fixed 468-point landmark layout in normalized [0,1] coordinates.

    Named contour indices (face oval, eyes, brows, lips, nostrils, cheek and
    nasal-bridge points) are placed on a stylized face; the remaining indices
    are scattered deterministically inside the face oval on a golden-angle
    spiral, so the hull of all 468 points is the face oval itself.
    """
    topo = load_topology(default_topology_path())
    pts = np.full((468, 2), np.nan)

    def place(indices, coords):
        pts[list(indices)] = coords

    place(topo.face_oval, _ring(len(topo.face_oval), _CX, _CY, _RX, _RY))
    place(topo.left_eye, _ring(len(topo.left_eye), _CX - 0.09, _CY - 0.06, 0.045, 0.025))
    place(topo.right_eye, _ring(len(topo.right_eye), _CX + 0.09, _CY - 0.06, 0.045, 0.025))

    for indices, sign in ((topo.left_brow, -1.0), (topo.right_brow, 1.0)):
        n = len(indices)
        half = (n + 1) // 2
        xs_lo = np.linspace(_CX + sign * 0.045, _CX + sign * 0.135, half)
        xs_hi = np.linspace(_CX + sign * 0.135, _CX + sign * 0.045, n - half)
        lower = np.column_stack([xs_lo, np.full(half, _CY - 0.105)])
        upper = np.column_stack([xs_hi, np.full(n - half, _CY - 0.125)])
        place(indices, np.vstack([lower, upper]))

    place(topo.lips_outer, _ring(len(topo.lips_outer), _CX, _CY + 0.17, 0.08, 0.035))
    place(topo.nostrils[0], [[_CX - 0.035, _CY + 0.085], [_CX - 0.035, _CY + 0.10],
                             [_CX - 0.015, _CY + 0.10], [_CX - 0.015, _CY + 0.085]])
    place(topo.nostrils[1], [[_CX + 0.015, _CY + 0.085], [_CX + 0.015, _CY + 0.10],
                             [_CX + 0.035, _CY + 0.10], [_CX + 0.035, _CY + 0.085]])

    cheeks = [i for i in topo.skin_hull_basis
              if i not in set(topo.face_oval) and np.isnan(pts[i]).all()]
    bridge = [168, 6, 197, 195, 5, 4]
    bridge_in_basis = [i for i in bridge if i in cheeks]
    cheek_only = [i for i in cheeks if i not in bridge_in_basis]
    if bridge_in_basis:
        ys = np.linspace(_CY - 0.09, _CY + 0.07, len(bridge_in_basis))
        place(bridge_in_basis, np.column_stack([np.full(len(ys), _CX), ys]))
    half = (len(cheek_only) + 1) // 2
    left_cheek = cheek_only[:half]
    right_cheek = cheek_only[half:]
    for indices, sign in ((left_cheek, -1.0), (right_cheek, 1.0)):
        n = len(indices)
        if n == 0:
            continue
        xs = _CX + sign * np.linspace(0.10, 0.18, n)
        ys = _CY + np.linspace(0.0, 0.10, n)
        place(indices, np.column_stack([xs, ys]))

    remaining = [i for i in range(468) if np.isnan(pts[i]).any()]
    n = len(remaining)
    golden = np.pi * (3 - np.sqrt(5))
    j = np.arange(n)
    r = 0.8 * np.sqrt((j + 0.5) / n)
    theta = j * golden
    pts[remaining, 0] = _CX + _RX * r * np.cos(theta)
    pts[remaining, 1] = _CY + _RY * r * np.sin(theta)
    return pts


def make_landmark_set(width: int = FIXTURE_SIZE, height: int = FIXTURE_SIZE,
                      confidence: float = 0.99) -> LandmarkSet:
    pts = landmark_template()
    px = pts * np.array([width, height])
    x0, y0 = px.min(axis=0)
    x1, y1 = px.max(axis=0)
    return LandmarkSet(points=pts, face_bbox=(float(x0), float(y0),
                                              float(x1 - x0), float(y1 - y0)),
                       confidence=confidence)


def paint_region(lm: LandmarkSet, width: int, height: int,
                 mask_params: MaskParams | None = None) -> np.ndarray:
    """Region to paint with skin color: hull of the skin basis plus forehead.

    Deliberately does not subtract the facial features, so the analysis mask
    (which does) is a strict subset of uniformly painted pixels.
    """
    if mask_params is None:
        mask_params = MaskParams()
    topo = load_topology(default_topology_path())
    basis = lm.pixel_points(width, height)[topo.skin_hull_basis]
    hull = convex_hull(basis)
    region = rasterize_polygon(hull, width, height)
    quad = forehead_quad(lm, mask_params, width, height, hull_points=basis)
    if len(quad):
        region |= rasterize_polygon(quad, width, height)
    return region


def render_face_image(tone_rgb, width: int = FIXTURE_SIZE, height: int = FIXTURE_SIZE,
                      background: int = FIXTURE_BACKGROUND,
                      lm: LandmarkSet | None = None) -> np.ndarray:
    if lm is None:
        lm = make_landmark_set(width, height)
    img = np.full((height, width, 3), background, dtype=np.uint8)
    img[paint_region(lm, width, height)] = np.asarray(tone_rgb, dtype=np.uint8)
    return img


def apply_cast(img: np.ndarray, cast) -> np.ndarray:
    """Diagonal per-channel gain in 8-bit sRGB space."""
    out = img.astype(np.float64) * np.asarray(cast, dtype=np.float64)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def compensated_cast(rng: np.random.Generator, lo: float, hi: float) -> np.ndarray:
    """Random hue cast whose linear-light luminance matches no cast at all.

    Red and blue gains are uniform in [lo, hi]; the green gain is solved so a
    neutral gray keeps its Rec.709 luminance after casting. The solved gain
    always lands inside [lo, hi] for the ranges used here.
    """
    ref = float(FIXTURE_BACKGROUND)
    y_ref = srgb_decode(np.array(ref))
    for _ in range(1000):
        cr = rng.uniform(lo, hi)
        cb = rng.uniform(lo, hi)
        y_g = (y_ref - _REC709[0] * srgb_decode(np.array(cr * ref))
               - _REC709[2] * srgb_decode(np.array(cb * ref))) / _REC709[1]
        if y_g <= 0:
            continue
        cg = float(srgb_encode(np.array(y_g))) / ref
        if lo <= cg <= hi:
            return np.array([cr, cg, cb])
    raise RuntimeError(f"no compensated cast found in [{lo}, {hi}]")


# ---------------------------------------------------------------------------
# Corpus emission
# ---------------------------------------------------------------------------

_FIXTURE_SPECS = [
    # (tone hex, model, prompt, gender, race, age)
    ("f7ead0", "alpha", "a person", "Woman", "White", 24.0),
    ("eadaba", "alpha", "a person", "Man", "White", 31.0),
    ("d7bd96", "alpha", "a human", "Man", "Latino Hispanic", 38.0),
    ("a07e56", "alpha", "a human", "Woman", "Middle Eastern", 29.0),
    ("825c43", "alpha", "someone", "Man", "Black", 45.0),
    ("604134", "beta", "someone", "Woman", "Black", 27.0),
    ("c29774", "beta", "a person", "Man", "Latino Hispanic", 52.0),
    ("9b6f55", "beta", "a human", "Woman", "Asian", 33.0),
    ("e7b48f", "beta", "an individual", "Man", "White", 41.0),
    ("78422b", "alpha", "an individual", "Woman", "Black", 36.0),
]

_RACE_LABELS = ["White", "Black", "Asian", "Latino Hispanic", "Middle Eastern"]


def _hex_to_rgb(hexstr: str) -> tuple[int, int, int]:
    return tuple(int(hexstr[i:i + 2], 16) for i in (0, 2, 4))


def make_attributes(gender: str, race: str, age: float) -> dict:
    probs = {label: 0.02 for label in _RACE_LABELS}
    probs[race] = 1.0 - 0.02 * (len(_RACE_LABELS) - 1)
    return {
        "gender": {"label": gender, "confidence": 0.97},
        "race": {"label": race, "probs": probs},
        "age": age,
        "expression": "neutral",
    }


def sidecar_dict(image_id: str, lm: LandmarkSet, width: int, height: int,
                 attributes: dict) -> dict:
    return {
        "schema_version": 1,
        "image_id": image_id,
        "width": width,
        "height": height,
        "attribute_semantics": "perceived",
        "faces": [{
            "bbox": [float(v) for v in lm.face_bbox],
            "confidence": lm.confidence,
            "landmarks": [[float(x), float(y)] for x, y in lm.points],
            "attributes": attributes,
        }],
    }


def build_fixture_corpus(out_dir: str | Path, cast_seed: int | None = None) -> Path:
    """Write the 10-image corpus (PNGs, sidecars, manifest.csv); returns the
    manifest path. With a cast_seed, a compensated hue cast in [0.9, 1.1] is
    applied to every image."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "sidecars").mkdir(parents=True, exist_ok=True)
    lm = make_landmark_set()
    rng = np.random.default_rng(cast_seed) if cast_seed is not None else None

    rows = []
    for i, (hexstr, model, prompt, gender, race, age) in enumerate(_FIXTURE_SPECS):
        image_id = f"fix{i:03d}"
        img = render_face_image(_hex_to_rgb(hexstr), lm=lm)
        if rng is not None:
            img = apply_cast(img, compensated_cast(rng, 0.9, 1.1))
        img_path = out / "images" / f"{image_id}.png"
        Image.fromarray(img).save(img_path)

        sc_path = out / "sidecars" / f"{image_id}.json"
        sc = sidecar_dict(image_id, lm, img.shape[1], img.shape[0],
                          make_attributes(gender, race, age))
        sc_path.write_text(json.dumps(sc) + "\n", encoding="utf-8")
        rows.append([str(img_path), str(sc_path), model, prompt])

    manifest_path = out / "manifest.csv"
    with open(manifest_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_path", "sidecar_path", "model", "prompt"])
        writer.writerows(rows)
    return manifest_path
