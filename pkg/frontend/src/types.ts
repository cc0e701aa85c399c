/** Shared domain types for the explorer client. */

export type Condition = string | number | null;

/**
 * A drawn latent trajectory plus everything needed to reproduce its render:
 * ordered control points in a 2-D slice of the latent space, the two axes
 * that slice steers, the values held on every other axis, the condition
 * label, and the seed.
 */
export interface TrajectoryDraft {
  /** Ordered control points in latent units (the canvas maps pixels here). */
  points: Array<[number, number]>;
  /** Which two latent axes the x/y coordinates steer. */
  axes: [number, number];
  /** Values held on every other latent axis. */
  base: number[];
  condition: Condition;
  seed: number;
  /** Loop mode: the path closes back onto its first point. */
  closed: boolean;
}

/** Flat summary of the served model, as reported by GET /health. */
export interface ModelDescriptor {
  variant: string;
  latentDim: number;
  embedDim: number;
  grainSize: number;
  seqLen: number;
  hop: number;
  sampleRate: number;
  labelSchema: string[];
  hasTemporal: boolean;
}

function asNumber(value: unknown, name: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new Error(`service reported a bad ${name}: ${String(value)}`);
  }
  return value;
}

/** Parse the `model` object of a /health response into a descriptor. */
export function parseModelSummary(body: unknown): ModelDescriptor {
  if (typeof body !== "object" || body === null) {
    throw new Error("service health response has no model summary");
  }
  const m = body as Record<string, unknown>;
  return {
    variant: String(m.variant),
    latentDim: asNumber(m.latent_dim, "latent_dim"),
    embedDim: asNumber(m.embed_dim, "embed_dim"),
    grainSize: asNumber(m.grain_size, "grain_size"),
    seqLen: asNumber(m.seq_len, "seq_len"),
    hop: asNumber(m.hop, "hop"),
    sampleRate: asNumber(m.sample_rate, "sample_rate"),
    labelSchema: Array.isArray(m.label_schema) ? m.label_schema.map(String) : [],
    hasTemporal: Boolean(m.has_temporal),
  };
}

/** Check a draft against the served model's latent dimensionality. */
export function validateDraft(draft: TrajectoryDraft, latentDim: number): void {
  if (draft.points.length < 1) {
    throw new Error("trajectory needs at least one control point");
  }
  const [ax, ay] = draft.axes;
  for (const axis of [ax, ay]) {
    if (!Number.isInteger(axis) || axis < 0 || axis >= latentDim) {
      throw new Error(`axis ${axis} out of range for ${latentDim} latent dims`);
    }
  }
  if (ax === ay) {
    throw new Error("the two steering axes must differ");
  }
  if (draft.base.length !== latentDim) {
    throw new Error(
      `base vector has ${draft.base.length} entries, model wants ${latentDim}`,
    );
  }
  if (!draft.base.every(Number.isFinite)) {
    throw new Error("base vector must be finite");
  }
  for (const [x, y] of draft.points) {
    if (!Number.isFinite(x) || !Number.isFinite(y)) {
      throw new Error("control points must be finite");
    }
  }
  if (!Number.isInteger(draft.seed)) {
    throw new Error(`seed must be an integer, got ${draft.seed}`);
  }
}

/** Deep-copy a draft so history snapshots stay frozen as the user keeps editing. */
export function cloneDraft(draft: TrajectoryDraft): TrajectoryDraft {
  return {
    points: draft.points.map(([x, y]) => [x, y] as [number, number]),
    axes: [draft.axes[0], draft.axes[1]],
    base: draft.base.slice(),
    condition: draft.condition,
    seed: draft.seed,
    closed: draft.closed,
  };
}
