/** Shared types for the sidecar extractor. */

export interface ExtractorConfig {
  /** Directory scanned (non-recursively) for .png images. */
  inputDir: string;
  /** Directory receiving one sidecar JSON per image plus manifest_fragment.csv. */
  outputDir: string;
  /** Detector backend name; "heuristic" is the only built-in. */
  backend: string;
  /** Faces below this detection confidence are dropped. */
  minConfidence: number;
}

export interface GenderEstimate {
  label: string;
  confidence: number;
}

export interface RaceEstimate {
  label: string;
  probs: Record<string, number>;
}

export interface FaceAttributes {
  gender: GenderEstimate;
  race: RaceEstimate;
  age: number;
  expression?: string;
}

export interface DetectedFace {
  /** [x, y, width, height] in pixels. */
  bbox: [number, number, number, number];
  confidence: number;
  /** 468 [x, y] pairs, normalized to [0, 1] image coordinates. */
  landmarks: [number, number][];
  attributes: FaceAttributes;
}

export interface Sidecar {
  schema_version: number;
  image_id: string;
  width: number;
  height: number;
  attribute_semantics: string;
  faces: DetectedFace[];
  /** Present only when the image could not be decoded. */
  error?: string;
}

export interface RgbImage {
  width: number;
  height: number;
  /** Row-major RGB, 3 bytes per pixel. */
  data: Uint8Array;
}

export const DEFAULT_MIN_CONFIDENCE = 0.5;
