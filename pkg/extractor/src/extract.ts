/**
 * Batch extraction: a directory of images in, one sidecar JSON per image out,
 * plus a manifest fragment CSV pairing image paths with sidecar paths.
 *
 * Per-image failures never abort the batch: an undecodable file produces a
 * sidecar with zero faces and an error note, so every input is accounted for.
 */

import * as fs from "fs";
import * as path from "path";

import { getAttributeBackend } from "./attributes";
import { getBackend } from "./detect";
import { decodePng } from "./png";
import {
  DEFAULT_MIN_CONFIDENCE,
  DetectedFace,
  ExtractorConfig,
  Sidecar,
} from "./types";

export const SCHEMA_VERSION = 1;

export interface ExtractSummary {
  images: number;
  faces: number;
  errors: number;
  manifestPath: string;
}

export function resolveConfig(partial: Partial<ExtractorConfig>): ExtractorConfig {
  const cfg: ExtractorConfig = {
    inputDir: partial.inputDir ?? "",
    outputDir: partial.outputDir ?? "",
    backend: partial.backend ?? "heuristic",
    minConfidence: partial.minConfidence ?? DEFAULT_MIN_CONFIDENCE,
  };
  if (!cfg.inputDir || !fs.existsSync(cfg.inputDir)) {
    throw new Error(`input directory does not exist: ${cfg.inputDir}`);
  }
  if (!cfg.outputDir) {
    throw new Error("output directory is required");
  }
  if (!(cfg.minConfidence > 0 && cfg.minConfidence <= 1)) {
    throw new Error(`min confidence must be in (0, 1], got ${cfg.minConfidence}`);
  }
  return cfg;
}

function analyzeOne(cfg: ExtractorConfig, imagePath: string): Sidecar {
  const imageId = path.basename(imagePath, path.extname(imagePath));
  let image;
  try {
    image = decodePng(fs.readFileSync(imagePath));
  } catch (err) {
    return {
      schema_version: SCHEMA_VERSION,
      image_id: imageId,
      width: 1,
      height: 1,
      attribute_semantics: "perceived",
      faces: [],
      error: `image decode failed: ${err instanceof Error ? err.message : String(err)}`,
    };
  }

  const detector = getBackend(cfg.backend);
  const attributes = getAttributeBackend("prior");
  const faces: DetectedFace[] = [];
  for (const det of detector.detect(image)) {
    if (det.confidence < cfg.minConfidence) continue;
    faces.push({
      bbox: det.bbox,
      confidence: det.confidence,
      landmarks: det.landmarks,
      attributes: attributes.estimate(image, det.bbox),
    });
  }
  return {
    schema_version: SCHEMA_VERSION,
    image_id: imageId,
    width: image.width,
    height: image.height,
    attribute_semantics: "perceived",
    faces,
  };
}

export function extractSidecars(partial: Partial<ExtractorConfig>): ExtractSummary {
  const cfg = resolveConfig(partial);
  fs.mkdirSync(cfg.outputDir, { recursive: true });

  const images = fs
    .readdirSync(cfg.inputDir)
    .filter((f) => f.toLowerCase().endsWith(".png"))
    .sort()
    .map((f) => path.join(cfg.inputDir, f));

  const rows: string[] = ["image_path,sidecar_path"];
  let faceCount = 0;
  let errorCount = 0;
  for (const imagePath of images) {
    const sidecar = analyzeOne(cfg, imagePath);
    const sidecarPath = path.join(cfg.outputDir, `${sidecar.image_id}.json`);
    fs.writeFileSync(sidecarPath, JSON.stringify(sidecar) + "\n");
    rows.push(`${imagePath},${sidecarPath}`);
    faceCount += sidecar.faces.length;
    if (sidecar.error) errorCount++;
  }

  const manifestPath = path.join(cfg.outputDir, "manifest_fragment.csv");
  fs.writeFileSync(manifestPath, rows.join("\n") + "\n");
  return { images: images.length, faces: faceCount, errors: errorCount, manifestPath };
}
