/** Client side of the /stream WebSocket: one JSON request out, then a JSON
 * header, binary float32 chunks, and a closing "done" message back. Used for
 * the low-latency waveform preview while a render is still streaming in. */

export interface StreamHeader {
  sampleRate: number;
  totalSamples: number;
  chunks: number;
}

export interface StreamProgress {
  received: number;
  total: number;
  samples: Float32Array;
}

/** The subset of WebSocket the protocol needs (tests substitute a fake). */
export interface WebSocketLike {
  readyState: number;
  send(data: string): void;
  addEventListener(type: string, listener: (ev: any) => void): void;
  removeEventListener(type: string, listener: (ev: any) => void): void;
}

const OPEN = 1;

export function streamRender(
  ws: WebSocketLike,
  request: Record<string, unknown>,
  onChunk?: (progress: StreamProgress) => void,
): Promise<{ header: StreamHeader; samples: Float32Array }> {
  return new Promise((resolve, reject) => {
    let header: StreamHeader | null = null;
    let samples = new Float32Array(0);
    let received = 0;

    const cleanup = () => {
      ws.removeEventListener("message", onMessage);
      ws.removeEventListener("error", onError);
      ws.removeEventListener("close", onClose);
      ws.removeEventListener("open", onOpen);
    };
    const fail = (err: Error) => {
      cleanup();
      reject(err);
    };

    const onMessage = (ev: { data: unknown }) => {
      if (typeof ev.data === "string") {
        const msg = JSON.parse(ev.data) as Record<string, unknown>;
        if (msg.type === "header") {
          header = {
            sampleRate: Number(msg.sample_rate),
            totalSamples: Number(msg.total_samples),
            chunks: Number(msg.chunks),
          };
          samples = new Float32Array(header.totalSamples);
          received = 0;
        } else if (msg.type === "done") {
          if (header === null) return fail(new Error("stream ended before header"));
          cleanup();
          resolve({ header, samples });
        } else if (msg.type === "error") {
          fail(new Error(String(msg.detail ?? msg.error ?? "stream error")));
        }
        return;
      }
      if (header === null) return fail(new Error("binary chunk before header"));
      const data = ev.data as ArrayBuffer;
      const chunk = new Float32Array(data);
      samples.set(chunk.subarray(0, samples.length - received), received);
      received += chunk.length;
      onChunk?.({ received, total: header.totalSamples, samples });
    };
    const onError = () => fail(new Error("stream socket error"));
    const onClose = () => {
      if (header !== null) return; // resolve/reject already handled
      fail(new Error("stream closed before completing"));
    };
    const onOpen = () => ws.send(JSON.stringify(request));

    ws.addEventListener("message", onMessage);
    ws.addEventListener("error", onError);
    ws.addEventListener("close", onClose);
    if (ws.readyState === OPEN) {
      ws.send(JSON.stringify(request));
    } else {
      ws.addEventListener("open", onOpen);
    }
  });
}
