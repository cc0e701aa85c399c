/** Browser shell: wires the canvas editor, scrubber, history list, and
 * audio element to the service client. All state lives in a TrajectoryDraft
 * plus a SessionHistory; everything audible comes back from the service. */

import { ServiceClient, ServiceError } from "./api.js";
import { AuditionPlayer } from "./audio.js";
import {
  addPoint,
  clearPoints,
  defaultDraft,
  EditorView,
  latentToPixel,
  movePoint,
  nearestPoint,
  pixelToLatent,
  removeLastPoint,
  setAxes,
  setCondition,
  setSeed,
  toggleClosed,
} from "./editor.js";
import { SessionHistory } from "./history.js";
import { renderTrajectory, trajectoryPayload } from "./render.js";
import { InterpScrubber } from "./scrubber.js";
import { streamRender } from "./stream.js";
import { ModelDescriptor, TrajectoryDraft } from "./types.js";
import { decodeWav } from "./wav.js";
import { drawWaveform } from "./waveform.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function showBanner(message: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message ?? "";
  banner.style.display = message === null ? "none" : "block";
}

function describeError(err: unknown): string {
  if (err instanceof ServiceError && err.kind === "unreachable") {
    return "Service unreachable — is `ngs serve` running? Your draft is kept.";
  }
  return err instanceof Error ? err.message : String(err);
}

export async function boot(): Promise<void> {
  const base = document.body.dataset.service ?? window.location.origin;
  const client = new ServiceClient(base);

  let model: ModelDescriptor;
  try {
    model = await client.health();
    showBanner(null);
  } catch (err) {
    showBanner(describeError(err));
    // leave a retry hook rather than a dead page
    el<HTMLButtonElement>("render-btn").onclick = () => void boot();
    return;
  }

  const canvas = el<HTMLCanvasElement>("editor-canvas");
  const view: EditorView = { width: canvas.width, height: canvas.height, range: 3 };
  const editorCtx = canvas.getContext("2d")!;
  const waveCanvas = el<HTMLCanvasElement>("waveform-canvas");
  const waveCtx = waveCanvas.getContext("2d")!;
  const player = new AuditionPlayer(el<HTMLAudioElement>("player"));
  const history = new SessionHistory(16);

  let draft: TrajectoryDraft = defaultDraft(model.latentDim);
  let dragging: number | null = null;
  let rendering = false;

  // condition selector from the served label schema
  const conditionSelect = el<HTMLSelectElement>("condition-select");
  conditionSelect.innerHTML = "";
  const none = document.createElement("option");
  none.value = "";
  none.textContent = "(unconditional)";
  conditionSelect.appendChild(none);
  for (const label of model.labelSchema) {
    const opt = document.createElement("option");
    opt.value = label;
    opt.textContent = label;
    conditionSelect.appendChild(opt);
  }
  conditionSelect.onchange = () => {
    draft = setCondition(
      draft,
      conditionSelect.value === "" ? null : conditionSelect.value,
    );
  };

  const axisX = el<HTMLInputElement>("axis-x");
  const axisY = el<HTMLInputElement>("axis-y");
  axisX.max = axisY.max = String(model.latentDim - 1);
  const onAxes = () => {
    const ax = Number(axisX.value);
    const ay = Number(axisY.value);
    if (Number.isInteger(ax) && Number.isInteger(ay) && ax !== ay) {
      draft = setAxes(draft, [ax, ay]);
    }
  };
  axisX.onchange = axisY.onchange = onAxes;

  const seedInput = el<HTMLInputElement>("seed-input");
  seedInput.onchange = () => {
    draft = setSeed(draft, Math.trunc(Number(seedInput.value) || 0));
  };

  function redrawEditor(): void {
    editorCtx.clearRect(0, 0, view.width, view.height);
    editorCtx.strokeStyle = "#39424e";
    editorCtx.lineWidth = 1;
    editorCtx.beginPath(); // axes cross
    editorCtx.moveTo(view.width / 2, 0);
    editorCtx.lineTo(view.width / 2, view.height);
    editorCtx.moveTo(0, view.height / 2);
    editorCtx.lineTo(view.width, view.height / 2);
    editorCtx.stroke();

    const pts = draft.points.map(([x, y]) => latentToPixel(view, x, y));
    if (pts.length > 1) {
      editorCtx.strokeStyle = "#4caf7d";
      editorCtx.lineWidth = 2;
      editorCtx.beginPath();
      editorCtx.moveTo(pts[0][0], pts[0][1]);
      for (const [px, py] of pts.slice(1)) editorCtx.lineTo(px, py);
      if (draft.closed) editorCtx.lineTo(pts[0][0], pts[0][1]);
      editorCtx.stroke();
    }
    editorCtx.fillStyle = "#e8f0e9";
    for (const [px, py] of pts) {
      editorCtx.beginPath();
      editorCtx.arc(px, py, 4, 0, 2 * Math.PI);
      editorCtx.fill();
    }
  }

  canvas.onpointerdown = (ev) => {
    const rect = canvas.getBoundingClientRect();
    const p = pixelToLatent(view, ev.clientX - rect.left, ev.clientY - rect.top);
    const near = nearestPoint(draft, p, (view.range * 2 * 8) / view.width);
    if (near !== null) {
      dragging = near;
    } else {
      draft = addPoint(draft, p);
      dragging = draft.points.length - 1;
    }
    canvas.setPointerCapture(ev.pointerId);
    redrawEditor();
  };
  canvas.onpointermove = (ev) => {
    if (dragging === null) return;
    const rect = canvas.getBoundingClientRect();
    const p = pixelToLatent(view, ev.clientX - rect.left, ev.clientY - rect.top);
    draft = movePoint(draft, dragging, p);
    redrawEditor();
  };
  canvas.onpointerup = () => {
    dragging = null;
  };

  el<HTMLButtonElement>("undo-btn").onclick = () => {
    draft = removeLastPoint(draft);
    redrawEditor();
  };
  el<HTMLButtonElement>("clear-btn").onclick = () => {
    draft = clearPoints(draft);
    redrawEditor();
  };
  const loopToggle = el<HTMLInputElement>("loop-toggle");
  loopToggle.onchange = () => {
    draft = toggleClosed(draft);
    player.loop = draft.closed;
    redrawEditor();
  };

  function showAudio(wav: ArrayBuffer, loop: boolean): void {
    const decoded = decodeWav(wav);
    drawWaveform(waveCtx, decoded.samples, waveCanvas.width, waveCanvas.height);
    player.load(wav, { loop });
    void player.play().catch(() => undefined); // autoplay may need a gesture
  }

  function refreshHistory(): void {
    const list = el<HTMLOListElement>("history-list");
    list.innerHTML = "";
    history.entries.forEach((entry, i) => {
      const item = document.createElement("li");
      const label = document.createElement("span");
      label.textContent = entry.label;
      const replay = document.createElement("button");
      replay.textContent = "replay";
      replay.onclick = async () => {
        try {
          const wav = await history.replay(i, client, model);
          showAudio(wav, false);
          showBanner(null);
        } catch (err) {
          showBanner(describeError(err));
        }
      };
      item.appendChild(label);
      item.appendChild(replay);
      list.appendChild(item);
    });
  }

  const streamPreview = el<HTMLInputElement>("stream-preview");

  function previewOverSocket(current: TrajectoryDraft): void {
    const wsUrl = base.replace(/^http/, "ws") + "/stream";
    const ws = new WebSocket(wsUrl);
    ws.binaryType = "arraybuffer";
    const payload = trajectoryPayload(current, model);
    void streamRender(
      ws,
      { type: "decode", ...payload },
      ({ received, samples }) => {
        drawWaveform(
          waveCtx,
          samples.subarray(0, received),
          waveCanvas.width,
          waveCanvas.height,
          "#7d8fca",
        );
      },
    )
      .catch(() => undefined) // preview is best-effort; the POST is the render
      .finally(() => ws.close());
  }

  const renderBtn = el<HTMLButtonElement>("render-btn");
  renderBtn.onclick = async () => {
    if (rendering) return; // one in-flight render per widget
    rendering = true;
    renderBtn.disabled = true;
    try {
      if (streamPreview.checked) previewOverSocket(draft);
      const result = await renderTrajectory(client, draft, model);
      history.push(
        `trajectory ${draft.points.length} pts seed ${draft.seed}` +
          (draft.condition !== null ? ` [${draft.condition}]` : ""),
        { kind: "trajectory", draft },
        result.wav,
      );
      refreshHistory();
      showAudio(result.wav, draft.closed);
      showBanner(null);
    } catch (err) {
      showBanner(describeError(err)); // draft stays as drawn
    } finally {
      rendering = false;
      renderBtn.disabled = false;
    }
  };

  const sampleSeed = el<HTMLInputElement>("sample-seed");
  el<HTMLButtonElement>("sample-btn").onclick = async () => {
    const seed = Math.trunc(Number(sampleSeed.value) || 0);
    const payload = {
      seed,
      ...(draft.condition !== null ? { condition: draft.condition } : {}),
    };
    try {
      const wav = await client.sample(payload);
      history.push(`sample seed ${seed}`, { kind: "sample", payload }, wav);
      refreshHistory();
      showAudio(wav, false);
      showBanner(null);
    } catch (err) {
      showBanner(describeError(err));
    }
  };

  // interpolation scrubber: endpoints labeled by seed, debounced renders
  const alphaSlider = el<HTMLInputElement>("scrub-alpha");
  const e1Input = el<HTMLInputElement>("scrub-e1");
  const e2Input = el<HTMLInputElement>("scrub-e2");
  const e1Label = el<HTMLSpanElement>("scrub-e1-label");
  const e2Label = el<HTMLSpanElement>("scrub-e2-label");

  let scrubber: InterpScrubber | null = null;
  function rebuildScrubber(): void {
    scrubber?.dispose();
    const e1Seed = Math.trunc(Number(e1Input.value) || 0);
    const e2Seed = Math.trunc(Number(e2Input.value) || 0);
    e1Label.textContent = `α=0 → seed ${e1Seed}`;
    e2Label.textContent = `α=1 → seed ${e2Seed}`;
    scrubber = new InterpScrubber(client, {
      e1Seed,
      e2Seed,
      condition: draft.condition,
      onRender: ({ alpha, wav, payload }) => {
        history.push(`interp α=${alpha.toFixed(2)} (${e1Seed}↔${e2Seed})`, {
          kind: "interp",
          payload,
        }, wav);
        refreshHistory();
        showAudio(wav, false);
        showBanner(null);
      },
      onError: (err) => showBanner(describeError(err)),
    });
  }
  e1Input.onchange = e2Input.onchange = rebuildScrubber;
  alphaSlider.oninput = () => {
    if (scrubber === null) rebuildScrubber();
    scrubber!.setAlpha(Number(alphaSlider.value));
  };
  rebuildScrubber();

  redrawEditor();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  void boot();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", () => void boot());
}
