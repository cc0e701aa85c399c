import { describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { SessionHistory } from "../src/history.js";
import { defaultDraft, addPoint } from "../src/editor.js";
import { FakeService, wavBytes } from "./fake-service.js";

function dummyWav(): ArrayBuffer {
  const bytes = wavBytes(new Float32Array([0.1, -0.2, 0.3]), 16000);
  return bytes.buffer.slice(
    bytes.byteOffset,
    bytes.byteOffset + bytes.byteLength,
  ) as ArrayBuffer;
}

describe("SessionHistory", () => {
  it("keeps newest-first and evicts beyond the limit", () => {
    const history = new SessionHistory(3);
    for (let i = 0; i < 5; i++) {
      history.push(`sample ${i}`, { kind: "sample", payload: { seed: i } }, dummyWav());
    }
    expect(history.entries).toHaveLength(3);
    expect(history.entries.map((e) => e.label)).toEqual([
      "sample 4",
      "sample 3",
      "sample 2",
    ]);
  });

  it("replays sample and interp entries by re-posting the stored payload", async () => {
    const fake = new FakeService();
    const client = new ServiceClient("http://svc", fake.fetch);
    const model = await client.health();
    const history = new SessionHistory();

    const samplePayload = { seed: 7, condition: "lo" };
    const sampleWav = await client.sample(samplePayload);
    history.push("sample", { kind: "sample", payload: samplePayload }, sampleWav);

    const interpPayload = { alpha: 0.5, e1_seed: 1, e2_seed: 2 };
    const interpWav = await client.interp(interpPayload);
    history.push("interp", { kind: "interp", payload: interpPayload }, interpWav);

    const interpReplay = await history.replay(0, client, model); // newest first
    const sampleReplay = await history.replay(1, client, model);

    expect(new Uint8Array(interpReplay)).toEqual(new Uint8Array(interpWav));
    expect(new Uint8Array(sampleReplay)).toEqual(new Uint8Array(sampleWav));

    const replayed = fake.requests.slice(-2).map((r) => r.body);
    expect(replayed).toEqual([interpPayload, samplePayload]);
  });

  it("snapshots trajectory drafts at push time", () => {
    const history = new SessionHistory();
    let draft = defaultDraft(16);
    draft = addPoint(draft, [0.5, 0.5]);
    history.push("traj", { kind: "trajectory", draft }, dummyWav());

    draft = addPoint(draft, [1, 1]); // later edit
    const record = history.entries[0].record;
    if (record.kind !== "trajectory") throw new Error("wrong record kind");
    expect(record.draft.points).toHaveLength(1);
  });

  it("rejects replay of a missing entry", async () => {
    const fake = new FakeService();
    const client = new ServiceClient("http://svc", fake.fetch);
    const model = await client.health();
    const history = new SessionHistory();
    await expect(history.replay(0, client, model)).rejects.toThrow(/no history entry/);
  });
});
