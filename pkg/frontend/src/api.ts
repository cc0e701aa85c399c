/** Typed client for the synthesis service's HTTP surface. */

import { Condition, ModelDescriptor, parseModelSummary } from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export type ServiceErrorKind = "unreachable" | "invalid" | "server";

export class ServiceError extends Error {
  constructor(
    readonly kind: ServiceErrorKind,
    message: string,
    readonly status?: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

/** Wire payloads, spelled exactly as the service expects them so a stored
 * payload can be re-posted verbatim when replaying from history. */
export interface DecodePayload {
  latents: number[][];
  condition?: Condition;
  seed?: number;
}

export interface SamplePayload {
  seed?: number;
  condition?: Condition;
  noise_seed?: number;
}

export interface InterpPayload {
  alpha: number;
  e1?: number[];
  e2?: number[];
  e1_seed?: number;
  e2_seed?: number;
  condition?: Condition;
  noise_seed?: number;
}

export function isAbortError(err: unknown): boolean {
  return err instanceof DOMException && err.name === "AbortError";
}

export class ServiceClient {
  private readonly base: string;

  constructor(
    baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {
    this.base = baseUrl.replace(/\/+$/, "");
  }

  private async request(
    route: string,
    init: RequestInit,
    signal?: AbortSignal,
  ): Promise<Response> {
    let res: Response;
    try {
      res = await this.fetchImpl(this.base + route, { ...init, signal });
    } catch (err) {
      if (isAbortError(err)) throw err;
      throw new ServiceError("unreachable", `service unreachable: ${String(err)}`);
    }
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = (await res.json()) as { detail?: string; error?: string };
        detail = body.detail ?? body.error ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      const kind: ServiceErrorKind = res.status >= 500 ? "server" : "invalid";
      throw new ServiceError(kind, detail, res.status);
    }
    return res;
  }

  private async postForWav(
    route: string,
    payload: unknown,
    signal?: AbortSignal,
  ): Promise<ArrayBuffer> {
    const res = await this.request(
      route,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(payload),
      },
      signal,
    );
    return res.arrayBuffer();
  }

  /** Reachability probe; also returns the served model's summary. */
  async health(): Promise<ModelDescriptor> {
    const res = await this.request("/health", { method: "GET" });
    const body = (await res.json()) as { model?: unknown };
    return parseModelSummary(body.model);
  }

  decode(payload: DecodePayload, signal?: AbortSignal): Promise<ArrayBuffer> {
    return this.postForWav("/decode", payload, signal);
  }

  sample(payload: SamplePayload, signal?: AbortSignal): Promise<ArrayBuffer> {
    return this.postForWav("/sample", payload, signal);
  }

  interp(payload: InterpPayload, signal?: AbortSignal): Promise<ArrayBuffer> {
    return this.postForWav("/interp", payload, signal);
  }

  /** Re-render target audio through the grain space. */
  async resynth(
    wav: ArrayBuffer,
    opts: { fade?: number; noiseSeed?: number } = {},
  ): Promise<ArrayBuffer> {
    const params = new URLSearchParams();
    if (opts.fade !== undefined) params.set("fade", String(opts.fade));
    if (opts.noiseSeed !== undefined) params.set("noise_seed", String(opts.noiseSeed));
    const qs = params.toString();
    const query = qs ? `?${qs}` : "";
    const res = await this.request(`/resynth${query}`, {
      method: "POST",
      headers: { "content-type": "audio/wav" },
      body: wav,
    });
    return res.arrayBuffer();
  }

  /** Encode audio into per-sequence latent series. */
  async encode(wav: ArrayBuffer): Promise<number[][][]> {
    const res = await this.request("/encode", {
      method: "POST",
      headers: { "content-type": "audio/wav" },
      body: wav,
    });
    const body = (await res.json()) as { latents: number[][][] };
    return body.latents;
  }
}
