/** Expansion of drawn control points into grain-aligned latent paths. */

import { TrajectoryDraft, validateDraft } from "./types.js";

type Point = [number, number];

function dist(a: Point, b: Point): number {
  return Math.hypot(b[0] - a[0], b[1] - a[1]);
}

function lerp(a: Point, b: Point, t: number): Point {
  return [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t];
}

/**
 * Resample a polyline to `count` points, uniform in arc length. Closed paths
 * wrap back to the first point and omit the duplicate seam sample, so a loop
 * of the result is seamless. Degenerate inputs (one point, or all points
 * coincident) repeat the first point.
 */
export function resamplePolyline(
  points: Point[],
  count: number,
  closed: boolean,
): Point[] {
  if (points.length === 0) throw new Error("no points to resample");
  if (count < 1) throw new Error("count must be >= 1");
  const verts = closed && points.length > 1 ? [...points, points[0]] : points;
  const lengths: number[] = [0];
  for (let i = 1; i < verts.length; i++) {
    lengths.push(lengths[i - 1] + dist(verts[i - 1], verts[i]));
  }
  const total = lengths[lengths.length - 1];
  if (total === 0 || count === 1) {
    return Array.from({ length: count }, () => [points[0][0], points[0][1]]);
  }
  const out: Point[] = [];
  let seg = 0;
  for (let k = 0; k < count; k++) {
    // open paths include both endpoints; closed paths space samples so the
    // loop seam falls exactly one step after the last sample
    const target = closed ? (k / count) * total : (k / (count - 1)) * total;
    while (seg < verts.length - 2 && lengths[seg + 1] < target) seg++;
    const span = lengths[seg + 1] - lengths[seg];
    const t = span === 0 ? 0 : (target - lengths[seg]) / span;
    out.push(lerp(verts[seg], verts[seg + 1], t));
  }
  return out;
}

/** Number of path steps a draft expands to: the smallest multiple of the
 * model's sequence length that holds every control point. */
export function expandedLength(numPoints: number, seqLen: number): number {
  return Math.max(1, Math.ceil(numPoints / seqLen)) * seqLen;
}

/**
 * Expand a draft into a latent path ready for POST /decode: a
 * (n*seqLen, latentDim) matrix whose steered axes trace the resampled
 * control points while every other coordinate holds the base vector.
 */
export function expandDraft(
  draft: TrajectoryDraft,
  seqLen: number,
  latentDim: number,
): number[][] {
  validateDraft(draft, latentDim);
  const steps = expandedLength(draft.points.length, seqLen);
  const path = resamplePolyline(draft.points, steps, draft.closed);
  const [ax, ay] = draft.axes;
  return path.map(([x, y]) => {
    const row = draft.base.slice();
    row[ax] = x;
    row[ay] = y;
    return row;
  });
}
