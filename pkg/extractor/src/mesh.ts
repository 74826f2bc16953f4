/**
 * Parametric 468-point face mesh template.
 *
 * Contour index sets follow the canonical dense face mesh convention (face
 * oval, eye rings, brow arcs, outer lip ring) so downstream consumers that
 * key masks off those indices see sensible geometry. Named contours sit on a
 * stylized frontal face; the unnamed indices fill the face oval on a
 * golden-angle spiral.
 */

export const FACE_OVAL = [
  10, 338, 297, 332, 284, 251, 389, 356, 454, 323, 361, 288, 397, 365, 379,
  378, 400, 377, 152, 148, 176, 149, 150, 136, 172, 58, 132, 93, 234, 127,
  162, 21, 54, 103, 67, 109,
];
export const LEFT_EYE = [33, 246, 161, 160, 159, 158, 157, 173, 133, 155, 154, 153, 145, 144, 163, 7];
export const RIGHT_EYE = [263, 466, 388, 387, 386, 385, 384, 398, 362, 382, 381, 380, 374, 373, 390, 249];
export const LEFT_BROW = [70, 63, 105, 66, 107, 55, 65, 52, 53, 46];
export const RIGHT_BROW = [300, 293, 334, 296, 336, 285, 295, 282, 283, 276];
export const LIPS_OUTER = [61, 146, 91, 181, 84, 17, 314, 405, 321, 375, 291, 409, 270, 269, 267, 0, 37, 39, 40, 185];
export const NOSTRILS: number[][] = [[64, 240, 99, 60], [294, 460, 328, 290]];
export const NASAL_BRIDGE = [168, 6, 197, 195, 5, 4];
export const CHEEKS = [50, 101, 118, 123, 187, 205, 280, 330, 347, 352, 411, 425];

export const MESH_SIZE = 468;

// template face geometry in its own normalized frame
const CX = 0.5;
const CY = 0.55;
const RX = 0.25;
const RY = 0.32;
// forward-of-hairline extension used when fitting the template to a detected
// blob: the visible skin region reaches forehead_scale * face_height above
// the oval top
const FOREHEAD_SCALE = 0.25;

function ring(n: number, cx: number, cy: number, rx: number, ry: number): [number, number][] {
  const pts: [number, number][] = [];
  for (let k = 0; k < n; k++) {
    const t = (2 * Math.PI * k) / n;
    pts.push([cx + rx * Math.sin(t), cy - ry * Math.cos(t)]);
  }
  return pts;
}

function linspace(a: number, b: number, n: number): number[] {
  if (n === 1) return [a];
  const out: number[] = [];
  for (let i = 0; i < n; i++) out.push(a + ((b - a) * i) / (n - 1));
  return out;
}

/** The template in its own frame; deterministic, all points finite. */
export function templatePoints(): [number, number][] {
  const pts: ([number, number] | null)[] = new Array(MESH_SIZE).fill(null);
  const place = (indices: number[], coords: [number, number][]) => {
    indices.forEach((idx, i) => {
      pts[idx] = coords[i];
    });
  };

  place(FACE_OVAL, ring(FACE_OVAL.length, CX, CY, RX, RY));
  place(LEFT_EYE, ring(LEFT_EYE.length, CX - 0.09, CY - 0.06, 0.045, 0.025));
  place(RIGHT_EYE, ring(RIGHT_EYE.length, CX + 0.09, CY - 0.06, 0.045, 0.025));

  for (const [indices, sign] of [
    [LEFT_BROW, -1],
    [RIGHT_BROW, 1],
  ] as [number[], number][]) {
    const n = indices.length;
    const half = Math.ceil(n / 2);
    const lower = linspace(CX + sign * 0.045, CX + sign * 0.135, half).map(
      (x): [number, number] => [x, CY - 0.105],
    );
    const upper = linspace(CX + sign * 0.135, CX + sign * 0.045, n - half).map(
      (x): [number, number] => [x, CY - 0.125],
    );
    place(indices, lower.concat(upper));
  }

  place(LIPS_OUTER, ring(LIPS_OUTER.length, CX, CY + 0.17, 0.08, 0.035));
  place(NOSTRILS[0], [
    [CX - 0.035, CY + 0.085],
    [CX - 0.035, CY + 0.1],
    [CX - 0.015, CY + 0.1],
    [CX - 0.015, CY + 0.085],
  ]);
  place(NOSTRILS[1], [
    [CX + 0.015, CY + 0.085],
    [CX + 0.015, CY + 0.1],
    [CX + 0.035, CY + 0.1],
    [CX + 0.035, CY + 0.085],
  ]);

  const ys = linspace(CY - 0.09, CY + 0.07, NASAL_BRIDGE.length);
  place(NASAL_BRIDGE, ys.map((y): [number, number] => [CX, y]));

  const half = Math.ceil(CHEEKS.length / 2);
  for (const [indices, sign] of [
    [CHEEKS.slice(0, half), -1],
    [CHEEKS.slice(half), 1],
  ] as [number[], number][]) {
    const n = indices.length;
    const xs = linspace(0.1, 0.18, n);
    const dys = linspace(0.0, 0.1, n);
    place(indices, xs.map((x, i): [number, number] => [CX + sign * x, CY + dys[i]]));
  }

  const remaining: number[] = [];
  for (let i = 0; i < MESH_SIZE; i++) if (pts[i] === null) remaining.push(i);
  const golden = Math.PI * (3 - Math.sqrt(5));
  remaining.forEach((idx, j) => {
    const r = 0.8 * Math.sqrt((j + 0.5) / remaining.length);
    const theta = j * golden;
    pts[idx] = [CX + RX * r * Math.cos(theta), CY + RY * r * Math.sin(theta)];
  });
  return pts as [number, number][];
}

/**
 * Bounding box, in template frame, of the skin region the template presents
 * to a detector: the face oval plus the forehead band above it.
 */
export function templateSkinBBox(): [number, number, number, number] {
  const faceHeight = 2 * RY;
  const top = CY - RY - FOREHEAD_SCALE * faceHeight;
  return [CX - RX, top, 2 * RX, CY + RY - top];
}

/**
 * Template points affine-fitted so the template skin region lands on the
 * given pixel bbox, returned in normalized [0,1] image coordinates and
 * clamped to the unit square.
 */
export function fitTemplate(
  bbox: [number, number, number, number],
  imageWidth: number,
  imageHeight: number,
): [number, number][] {
  const [sx, sy, sw, sh] = templateSkinBBox();
  const [bx, by, bw, bh] = bbox;
  return templatePoints().map(([x, y]) => {
    const px = bx + ((x - sx) / sw) * bw;
    const py = by + ((y - sy) / sh) * bh;
    return [
      Math.min(1, Math.max(0, px / imageWidth)),
      Math.min(1, Math.max(0, py / imageHeight)),
    ];
  });
}
