/** Session history: every audition is kept with the record that made it,
 * so any entry can be replayed for byte-identical audio. */

import { InterpPayload, SamplePayload, ServiceClient } from "./api.js";
import { renderTrajectory } from "./render.js";
import { cloneDraft, ModelDescriptor, TrajectoryDraft } from "./types.js";

export type HistoryRecord =
  | { kind: "trajectory"; draft: TrajectoryDraft }
  | { kind: "sample"; payload: SamplePayload }
  | { kind: "interp"; payload: InterpPayload };

export interface HistoryEntry {
  label: string;
  record: HistoryRecord;
  wav: ArrayBuffer;
  at: number;
}

export class SessionHistory {
  private readonly items: HistoryEntry[] = [];

  constructor(private readonly limit = 16) {
    if (limit < 1) throw new Error("history limit must be >= 1");
  }

  get entries(): readonly HistoryEntry[] {
    return this.items;
  }

  /** Newest first. Drafts are snapshotted so later edits don't rewrite history. */
  push(label: string, record: HistoryRecord, wav: ArrayBuffer): HistoryEntry {
    const frozen: HistoryRecord =
      record.kind === "trajectory"
        ? { kind: "trajectory", draft: cloneDraft(record.draft) }
        : record;
    const entry: HistoryEntry = { label, record: frozen, wav, at: Date.now() };
    this.items.unshift(entry);
    if (this.items.length > this.limit) this.items.length = this.limit;
    return entry;
  }

  /** Re-render an entry from its stored record (not from the cached bytes). */
  async replay(
    index: number,
    client: ServiceClient,
    model: ModelDescriptor,
  ): Promise<ArrayBuffer> {
    const entry = this.items[index];
    if (entry === undefined) throw new Error(`no history entry at ${index}`);
    switch (entry.record.kind) {
      case "trajectory":
        return (await renderTrajectory(client, entry.record.draft, model)).wav;
      case "sample":
        return client.sample(entry.record.payload);
      case "interp":
        return client.interp(entry.record.payload);
    }
  }
}
