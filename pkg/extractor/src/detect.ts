/**
 * Face detection backends.
 *
 * The built-in "heuristic" backend is deterministic and model-free: it takes
 * the largest connected region that differs from the border-dominant
 * background color, treats its bounding box as the visible skin region, and
 * fits the parametric mesh template into it. It is intended for synthetic or
 * studio-style imagery with a clean background; a neural detector can be
 * registered under another name without touching the rest of the extractor.
 */

import { fitTemplate } from "./mesh";
import { RgbImage } from "./types";

export interface Detection {
  bbox: [number, number, number, number];
  confidence: number;
  landmarks: [number, number][];
}

export interface DetectorBackend {
  readonly name: string;
  detect(image: RgbImage): Detection[];
}

// a pixel belongs to the foreground when any channel deviates from the
// background color by more than this
const FOREGROUND_THRESHOLD = 12;
// blobs smaller than this fraction of the image are noise, not faces
const MIN_AREA_FRACTION = 0.002;

function borderModeColor(image: RgbImage): [number, number, number] {
  const { width: w, height: h, data } = image;
  const counts = new Map<number, number>();
  const tally = (x: number, y: number) => {
    const i = (y * w + x) * 3;
    const key = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    counts.set(key, (counts.get(key) ?? 0) + 1);
  };
  for (let x = 0; x < w; x++) {
    tally(x, 0);
    tally(x, h - 1);
  }
  for (let y = 1; y < h - 1; y++) {
    tally(0, y);
    tally(w - 1, y);
  }
  let best = 0;
  let bestCount = -1;
  for (const [key, count] of counts) {
    if (count > bestCount || (count === bestCount && key < best)) {
      best = key;
      bestCount = count;
    }
  }
  return [(best >> 16) & 0xff, (best >> 8) & 0xff, best & 0xff];
}

interface Blob {
  area: number;
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

function largestForegroundBlob(image: RgbImage): Blob | null {
  const { width: w, height: h, data } = image;
  const [br, bg, bb] = borderModeColor(image);
  const fg = new Uint8Array(w * h);
  for (let p = 0; p < w * h; p++) {
    const d = Math.max(
      Math.abs(data[p * 3] - br),
      Math.abs(data[p * 3 + 1] - bg),
      Math.abs(data[p * 3 + 2] - bb),
    );
    if (d > FOREGROUND_THRESHOLD) fg[p] = 1;
  }

  const seen = new Uint8Array(w * h);
  const stack = new Int32Array(w * h);
  let best: Blob | null = null;
  for (let start = 0; start < w * h; start++) {
    if (!fg[start] || seen[start]) continue;
    let top = 0;
    stack[top++] = start;
    seen[start] = 1;
    const blob: Blob = { area: 0, x0: w, y0: h, x1: -1, y1: -1 };
    while (top > 0) {
      const p = stack[--top];
      const x = p % w;
      const y = (p - x) / w;
      blob.area++;
      if (x < blob.x0) blob.x0 = x;
      if (x > blob.x1) blob.x1 = x;
      if (y < blob.y0) blob.y0 = y;
      if (y > blob.y1) blob.y1 = y;
      if (x > 0 && fg[p - 1] && !seen[p - 1]) { seen[p - 1] = 1; stack[top++] = p - 1; }
      if (x < w - 1 && fg[p + 1] && !seen[p + 1]) { seen[p + 1] = 1; stack[top++] = p + 1; }
      if (y > 0 && fg[p - w] && !seen[p - w]) { seen[p - w] = 1; stack[top++] = p - w; }
      if (y < h - 1 && fg[p + w] && !seen[p + w]) { seen[p + w] = 1; stack[top++] = p + w; }
    }
    if (best === null || blob.area > best.area) best = blob;
  }
  if (best === null || best.area < MIN_AREA_FRACTION * w * h) return null;
  return best;
}

export class HeuristicDetector implements DetectorBackend {
  readonly name = "heuristic";

  detect(image: RgbImage): Detection[] {
    const blob = largestForegroundBlob(image);
    if (blob === null) return [];
    const bbox: [number, number, number, number] = [
      blob.x0,
      blob.y0,
      blob.x1 - blob.x0 + 1,
      blob.y1 - blob.y0 + 1,
    ];
    const fill = blob.area / (bbox[2] * bbox[3]);
    return [
      {
        bbox,
        confidence: Math.min(0.99, fill),
        landmarks: fitTemplate(bbox, image.width, image.height),
      },
    ];
  }
}

const BACKENDS: Record<string, () => DetectorBackend> = {
  heuristic: () => new HeuristicDetector(),
};

export function getBackend(name: string): DetectorBackend {
  const factory = BACKENDS[name];
  if (!factory) {
    throw new Error(`unknown detector backend "${name}" (available: ${Object.keys(BACKENDS).join(", ")})`);
  }
  return factory();
}

export function registerBackend(name: string, factory: () => DetectorBackend): void {
  BACKENDS[name] = factory;
}
