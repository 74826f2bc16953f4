"""Representative skin tone via k-means clustering in CIELAB.

Masked pixels are clustered with Lloyd's algorithm (k-means++ seeding from a
fixed, recorded seed), clusters are ranked by size, and the largest clusters
are accumulated until they cover at least 36% of the masked pixels. The
representative tone is the pixel-count-weighted mean of the accumulated
centroids.

Every step is deterministic for a fixed seed and input order, so two runs on
the same corpus produce bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .color import srgb_to_lab
from .errors import InsufficientPixels
from .mask import SkinMask


@dataclass
class ToneParams:
    k: int = 4
    coverage_threshold: float = 0.36
    max_iterations: int = 100
    convergence_epsilon: float = 1e-3   # CIELAB units of centroid movement
    seed: int = 42
    # drop masked pixels darker than this L* before clustering (facial-hair
    # proxy); 0 disables the filter
    dark_pixel_floor: float = 0.0


@dataclass
class ToneEstimate:
    representative: np.ndarray              # (3,) CIELAB
    clusters: list[tuple[np.ndarray, int]]  # (centroid, pixel_count), size-desc
    included_cluster_count: int
    coverage: float


def extract_masked_pixels(img: np.ndarray, mask: SkinMask) -> np.ndarray:
    """CIELAB values of exactly the masked pixels, in row-major order."""
    if img.shape[:2] != mask.bits.shape:
        raise ValueError(f"dimension mismatch: image {img.shape[:2]} vs mask {mask.bits.shape}")
    return srgb_to_lab(img[mask.bits])


def kmeans_plus_plus_seeds(pixels: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Deterministic k-means++ initial centroids.

    Procedure (shared with the test oracle, so it is part of the contract):
    rng = np.random.default_rng(seed); the first center index is
    rng.integers(n); each subsequent center is drawn from the squared-distance
    distribution by inverting one rng.random() draw against the cumulative
    sum. If every remaining distance is zero the draw falls back to
    rng.integers(n).
    """
    n = len(pixels)
    rng = np.random.default_rng(seed)
    centers = [int(rng.integers(n))]
    d2 = ((pixels - pixels[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        centers.append(idx)
        d2 = np.minimum(d2, ((pixels - pixels[idx]) ** 2).sum(axis=1))
    return pixels[centers].copy()


def lloyd_iterate(pixels: np.ndarray, centroids: np.ndarray,
                  max_iterations: int, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm; returns (centroids, assignment).

    Assignment ties break toward the lower centroid index (np.argmin). An
    empty cluster is re-seeded once to the pixel farthest from all current
    centroids; if it empties again it simply keeps its position with count 0.
    """
    k = len(centroids)
    centroids = centroids.astype(np.float64).copy()
    reseeded = np.zeros(k, dtype=bool)
    assignment = np.zeros(len(pixels), dtype=np.int64)
    for _ in range(max_iterations):
        dist2 = ((pixels[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assignment = np.argmin(dist2, axis=1)
        new_centroids = centroids.copy()
        for c in range(k):
            members = assignment == c
            if members.any():
                new_centroids[c] = pixels[members].mean(axis=0)
            elif not reseeded[c]:
                reseeded[c] = True
                min_d2 = dist2.min(axis=1)
                new_centroids[c] = pixels[int(np.argmax(min_d2))]
        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if shift < epsilon:
            break
    dist2 = ((pixels[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assignment = np.argmin(dist2, axis=1)
    return centroids, assignment


def representative_tone(pixels: np.ndarray, params: ToneParams | None = None) -> ToneEstimate:
    """Cluster pixels and accumulate the largest clusters to >= the coverage threshold.

    Cluster ordering is by pixel count descending; exact count ties order by
    centroid L* descending, then by original cluster index.
    """
    if params is None:
        params = ToneParams()
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[1] != 3:
        raise ValueError(f"expected (n, 3) CIELAB pixels, got {pixels.shape}")
    if len(pixels) == 0:
        raise InsufficientPixels("no masked pixels")
    if len(pixels) < params.k:
        raise InsufficientPixels(f"{len(pixels)} pixels < k={params.k}")

    seeds = kmeans_plus_plus_seeds(pixels, params.k, params.seed)
    centroids, assignment = lloyd_iterate(
        pixels, seeds, params.max_iterations, params.convergence_epsilon)

    counts = np.bincount(assignment, minlength=params.k)
    occupied = [c for c in range(params.k) if counts[c] > 0]
    # sort key: count desc, centroid L* desc, cluster index asc
    order = sorted(occupied, key=lambda c: (-counts[c], -centroids[c, 0], c))

    total = int(counts.sum())
    needed = params.coverage_threshold * total
    included: list[int] = []
    accumulated = 0
    for c in order:
        included.append(c)
        accumulated += int(counts[c])
        if accumulated >= needed:
            break

    weights = counts[included].astype(np.float64)
    representative = (centroids[included] * weights[:, None]).sum(axis=0) / weights.sum()
    return ToneEstimate(
        representative=representative,
        clusters=[(centroids[c].copy(), int(counts[c])) for c in order],
        included_cluster_count=len(included),
        coverage=accumulated / total,
    )
