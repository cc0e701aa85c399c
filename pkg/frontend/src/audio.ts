/** Playback of fetched WAV bytes through a plain <audio> element. */

export function wavBlobUrl(wav: ArrayBuffer): string {
  return URL.createObjectURL(new Blob([wav], { type: "audio/wav" }));
}

export class AuditionPlayer {
  private url: string | null = null;

  constructor(private readonly audio: HTMLAudioElement) {}

  /** Swap in new audio; loop mode keeps closed trajectories seamless. */
  load(wav: ArrayBuffer, opts: { loop?: boolean } = {}): void {
    if (this.url !== null) URL.revokeObjectURL(this.url);
    this.url = wavBlobUrl(wav);
    this.audio.src = this.url;
    this.audio.loop = opts.loop ?? false;
  }

  play(): Promise<void> {
    return this.audio.play();
  }

  pause(): void {
    this.audio.pause();
  }

  set loop(value: boolean) {
    this.audio.loop = value;
  }

  dispose(): void {
    this.audio.pause();
    if (this.url !== null) URL.revokeObjectURL(this.url);
    this.url = null;
  }
}
