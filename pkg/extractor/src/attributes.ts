/**
 * Demographic attribute estimation.
 *
 * The built-in estimator emits an explicit uninformative prior: a uniform
 * race probability map, an "unknown" gender with zero confidence, and an
 * adult-population prior age. Inferring demographics from pixel statistics
 * without a trained model would be guesswork dressed up as measurement, so
 * the placeholder refuses to guess; swap in a trained backend for research
 * use. All attributes are perceived estimates, never ground truth.
 */

import { FaceAttributes, RgbImage } from "./types";

export const RACE_CATEGORIES = [
  "White",
  "Black",
  "Asian",
  "Latino Hispanic",
  "Middle Eastern",
];

export interface AttributeBackend {
  readonly name: string;
  estimate(image: RgbImage, bbox: [number, number, number, number]): FaceAttributes;
}

export class PriorAttributeBackend implements AttributeBackend {
  readonly name = "prior";

  estimate(): FaceAttributes {
    const probs: Record<string, number> = {};
    for (const c of RACE_CATEGORIES) probs[c] = 1 / RACE_CATEGORIES.length;
    return {
      gender: { label: "unknown", confidence: 0 },
      race: { label: "unknown", probs },
      age: 30,
      expression: "unknown",
    };
  }
}

const BACKENDS: Record<string, () => AttributeBackend> = {
  prior: () => new PriorAttributeBackend(),
};

export function getAttributeBackend(name: string): AttributeBackend {
  const factory = BACKENDS[name];
  if (!factory) {
    throw new Error(`unknown attribute backend "${name}" (available: ${Object.keys(BACKENDS).join(", ")})`);
  }
  return factory();
}

export function registerAttributeBackend(name: string, factory: () => AttributeBackend): void {
  BACKENDS[name] = factory;
}
