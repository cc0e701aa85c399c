/** Trajectory editor state: pure functions over drafts, so the canvas
 * wiring in the app shell stays a thin event-to-function mapping. */

import { Condition, TrajectoryDraft } from "./types.js";

type Point = [number, number];

/** The square view maps pixels onto [-range, range] on both steered axes. */
export interface EditorView {
  width: number;
  height: number;
  range: number;
}

export function pixelToLatent(view: EditorView, px: number, py: number): Point {
  const x = (px / view.width) * 2 * view.range - view.range;
  const y = view.range - (py / view.height) * 2 * view.range; // y grows upward
  return [x, y];
}

export function latentToPixel(view: EditorView, x: number, y: number): Point {
  const px = ((x + view.range) / (2 * view.range)) * view.width;
  const py = ((view.range - y) / (2 * view.range)) * view.height;
  return [px, py];
}

export function defaultDraft(
  latentDim: number,
  axes: [number, number] = [0, 1],
): TrajectoryDraft {
  return {
    points: [],
    axes,
    base: new Array<number>(latentDim).fill(0),
    condition: null,
    seed: 0,
    closed: false,
  };
}

function withPoints(draft: TrajectoryDraft, points: Point[]): TrajectoryDraft {
  return { ...draft, points };
}

export function addPoint(draft: TrajectoryDraft, p: Point): TrajectoryDraft {
  return withPoints(draft, [...draft.points, [p[0], p[1]]]);
}

export function movePoint(
  draft: TrajectoryDraft,
  index: number,
  p: Point,
): TrajectoryDraft {
  if (index < 0 || index >= draft.points.length) {
    throw new Error(`no control point at ${index}`);
  }
  const points = draft.points.map(
    (q, i) => (i === index ? [p[0], p[1]] : [q[0], q[1]]) as Point,
  );
  return withPoints(draft, points);
}

export function removeLastPoint(draft: TrajectoryDraft): TrajectoryDraft {
  return withPoints(draft, draft.points.slice(0, -1));
}

export function clearPoints(draft: TrajectoryDraft): TrajectoryDraft {
  return withPoints(draft, []);
}

/** Index of the control point within maxDist of p, or null. */
export function nearestPoint(
  draft: TrajectoryDraft,
  p: Point,
  maxDist: number,
): number | null {
  let best: number | null = null;
  let bestDist = maxDist;
  draft.points.forEach(([x, y], i) => {
    const d = Math.hypot(x - p[0], y - p[1]);
    if (d <= bestDist) {
      best = i;
      bestDist = d;
    }
  });
  return best;
}

export function toggleClosed(draft: TrajectoryDraft): TrajectoryDraft {
  return { ...draft, closed: !draft.closed };
}

export function setSeed(draft: TrajectoryDraft, seed: number): TrajectoryDraft {
  return { ...draft, seed };
}

export function setCondition(
  draft: TrajectoryDraft,
  condition: Condition,
): TrajectoryDraft {
  return { ...draft, condition };
}

export function setAxes(
  draft: TrajectoryDraft,
  axes: [number, number],
): TrajectoryDraft {
  return { ...draft, axes: [axes[0], axes[1]] };
}
