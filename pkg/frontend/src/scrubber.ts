/** Interpolation scrubber: maps a slider onto POST /interp.
 *
 * Slider movement is debounced, and a newer position always supersedes an
 * older one: any request still in flight is aborted before the replacement
 * is issued, so the service never sees more than one live request from the
 * scrubber. The endpoints are labeled by their seeds; noise_seed is left to
 * the service's default (the e1 seed), which makes alpha=0 reproduce a plain
 * /sample of e1.
 */

import { Condition } from "./types.js";
import { InterpPayload, isAbortError, ServiceClient } from "./api.js";

export interface ScrubberRender {
  alpha: number;
  wav: ArrayBuffer;
  payload: InterpPayload;
}

export type ScheduleFn = (fn: () => void, ms: number) => unknown;
export type CancelFn = (handle: unknown) => void;

export interface ScrubberOptions {
  e1Seed: number;
  e2Seed: number;
  condition?: Condition;
  debounceMs?: number;
  onRender: (result: ScrubberRender) => void;
  onError?: (err: unknown) => void;
  /** Injectable timer hooks (tests drive the debounce deterministically). */
  schedule?: ScheduleFn;
  cancel?: CancelFn;
}

export class InterpScrubber {
  private readonly debounceMs: number;
  private readonly schedule: ScheduleFn;
  private readonly cancel: CancelFn;
  private timer: unknown = null;
  private controller: AbortController | null = null;
  private pendingAlpha: number | null = null;

  constructor(
    private readonly client: ServiceClient,
    private readonly opts: ScrubberOptions,
  ) {
    this.debounceMs = opts.debounceMs ?? 80;
    this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.cancel = opts.cancel ?? ((handle) => clearTimeout(handle as never));
  }

  /** Latest slider position; the render fires after the debounce window. */
  setAlpha(alpha: number): void {
    this.pendingAlpha = Math.min(1, Math.max(0, alpha));
    if (this.timer !== null) this.cancel(this.timer);
    this.timer = this.schedule(() => {
      this.timer = null;
      void this.fire();
    }, this.debounceMs);
  }

  /** Render a position immediately, skipping the debounce (endpoint buttons). */
  renderNow(alpha: number): Promise<ArrayBuffer | null> {
    if (this.timer !== null) {
      this.cancel(this.timer);
      this.timer = null;
    }
    this.pendingAlpha = Math.min(1, Math.max(0, alpha));
    return this.fire();
  }

  /** True while a request is unsettled and not superseded. */
  get busy(): boolean {
    return this.controller !== null;
  }

  private async fire(): Promise<ArrayBuffer | null> {
    const alpha = this.pendingAlpha;
    if (alpha === null) return null;
    this.pendingAlpha = null;
    this.controller?.abort(); // cancel-and-replace: drop the superseded render
    const controller = new AbortController();
    this.controller = controller;
    const payload: InterpPayload = {
      alpha,
      e1_seed: this.opts.e1Seed,
      e2_seed: this.opts.e2Seed,
    };
    if (this.opts.condition != null) payload.condition = this.opts.condition;
    try {
      const wav = await this.client.interp(payload, controller.signal);
      if (this.controller === controller) {
        this.opts.onRender({ alpha, wav, payload });
      }
      return wav;
    } catch (err) {
      if (!isAbortError(err)) this.opts.onError?.(err);
      return null;
    } finally {
      if (this.controller === controller) this.controller = null;
    }
  }

  dispose(): void {
    if (this.timer !== null) {
      this.cancel(this.timer);
      this.timer = null;
    }
    this.controller?.abort();
    this.controller = null;
    this.pendingAlpha = null;
  }
}
