/** Draft-to-audio: expand a trajectory and post it for decoding. */

import { DecodePayload, ServiceClient } from "./api.js";
import { expandDraft } from "./trajectory.js";
import { cloneDraft, ModelDescriptor, TrajectoryDraft } from "./types.js";

export interface TrajectoryRender {
  wav: ArrayBuffer;
  /** The exact body that was posted (re-postable for byte-identical audio). */
  payload: DecodePayload;
  /** Frozen copy of the draft that produced the render. */
  draft: TrajectoryDraft;
}

/** Build the /decode payload for a draft without sending it. */
export function trajectoryPayload(
  draft: TrajectoryDraft,
  model: ModelDescriptor,
): DecodePayload {
  const payload: DecodePayload = {
    latents: expandDraft(draft, model.seqLen, model.latentDim),
    seed: draft.seed,
  };
  if (draft.condition !== null) payload.condition = draft.condition;
  return payload;
}

/** Render a draft through POST /decode. The input draft is not mutated. */
export async function renderTrajectory(
  client: ServiceClient,
  draft: TrajectoryDraft,
  model: ModelDescriptor,
  signal?: AbortSignal,
): Promise<TrajectoryRender> {
  const payload = trajectoryPayload(draft, model);
  const wav = await client.decode(payload, signal);
  return { wav, payload, draft: cloneDraft(draft) };
}
