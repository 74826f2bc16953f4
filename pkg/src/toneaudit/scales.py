"""Dermatological scale palettes and nearest-reference classification.

Palettes ship as an editable JSON config; a content hash of the loaded file
travels with every emitted record so assignments stay traceable to the exact
reference colors that produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .color import color_distance, srgb_to_lab
from .errors import PaletteError

EXPECTED_SIZES = {"MST": 10, "PERLA": 11, "FST": 6}

ORIENTATIONS = ("higher_is_darker", "higher_is_lighter")


@dataclass
class ScalePalette:
    name: str
    orientation: str
    labels: list[str]
    references: np.ndarray      # (n, 3) CIELAB

    def __len__(self) -> int:
        return len(self.labels)

    def lightness_preference_order(self) -> list[int]:
        """Entry indices ordered lighter-first (used to break distance ties)."""
        order = list(range(len(self.labels)))
        if self.orientation == "higher_is_lighter":
            order.reverse()
        return order


@dataclass
class ScaleAssignment:
    scale: str
    index: int                  # 1-based ordinal along the palette
    label: str
    distance: float
    runner_up_margin: float
    metric: str


def _hex_to_lab(hexstr: str) -> np.ndarray:
    h = hexstr.lstrip("#")
    if len(h) != 6:
        raise PaletteError(f"bad hex color {hexstr!r}")
    rgb = np.array([int(h[i:i + 2], 16) for i in (0, 2, 4)], dtype=np.uint8)
    return srgb_to_lab(rgb)


def load_palettes(path: str | Path) -> tuple[list[ScalePalette], str]:
    """Load and validate palettes; returns (palettes, sha256 content hash)."""
    raw_bytes = Path(path).read_bytes()
    content_hash = hashlib.sha256(raw_bytes).hexdigest()
    raw = json.loads(raw_bytes)

    palettes = []
    for spec in raw["palettes"]:
        name = spec["name"]
        orientation = spec["orientation"]
        if orientation not in ORIENTATIONS:
            raise PaletteError(f"{name}: unknown orientation {orientation!r}")
        entries = spec["entries"]
        expected = EXPECTED_SIZES.get(name)
        if expected is not None and len(entries) != expected:
            raise PaletteError(f"{name}: expected {expected} entries, got {len(entries)}")

        labels, refs = [], []
        for entry in entries:
            label = str(entry["label"])
            if label in labels:
                raise PaletteError(f"{name}: duplicate label {label!r}")
            labels.append(label)
            if "lab" in entry:
                refs.append(np.asarray(entry["lab"], dtype=np.float64))
            elif "hex" in entry:
                refs.append(_hex_to_lab(entry["hex"]))
            else:
                raise PaletteError(f"{name}/{label}: entry needs 'hex' or 'lab'")
        references = np.vstack(refs)

        L = references[:, 0]
        sign = -1.0 if orientation == "higher_is_darker" else 1.0
        steps = sign * np.diff(L)
        if not np.all(steps > 0):
            bad = labels[int(np.argmin(steps > 0)) + 1]
            raise PaletteError(f"{name}: L* not strictly monotone at entry {bad!r}")

        palettes.append(ScalePalette(name=name, orientation=orientation,
                                     labels=labels, references=references))
    return palettes, content_hash


def default_palettes_path() -> Path:
    return Path(__file__).parent / "data" / "palettes.json"


def classify(tone: np.ndarray, palette: ScalePalette, metric: str = "de2000") -> ScaleAssignment:
    """Nearest reference color under the chosen metric; ties go to the lighter entry."""
    tone = np.asarray(tone, dtype=np.float64)
    dists = np.asarray(color_distance(tone[np.newaxis, :], palette.references, metric))

    best = None
    for idx in palette.lightness_preference_order():
        if best is None or dists[idx] < dists[best]:
            best = idx
    assert best is not None

    rest = np.delete(dists, best)
    margin = float(rest.min() - dists[best]) if len(rest) else 0.0
    return ScaleAssignment(
        scale=palette.name,
        index=best + 1,
        label=palette.labels[best],
        distance=float(dists[best]),
        runner_up_margin=margin,
        metric=metric,
    )
