/** Min/max-per-pixel waveform rendering onto a 2-D canvas context. */

export interface Canvas2DLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
}

export function drawWaveform(
  ctx: Canvas2DLike,
  samples: ArrayLike<number>,
  width: number,
  height: number,
  color = "#4caf7d",
): void {
  ctx.clearRect(0, 0, width, height);
  if (samples.length === 0) return;
  let peak = 1e-9;
  for (let i = 0; i < samples.length; i++) {
    const a = Math.abs(samples[i]);
    if (a > peak) peak = a;
  }
  const mid = height / 2;
  const scale = (height / 2 - 1) / peak;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (let col = 0; col < width; col++) {
    const start = Math.floor((col / width) * samples.length);
    const end = Math.max(start + 1, Math.floor(((col + 1) / width) * samples.length));
    let lo = samples[start];
    let hi = samples[start];
    for (let i = start + 1; i < end; i++) {
      if (samples[i] < lo) lo = samples[i];
      if (samples[i] > hi) hi = samples[i];
    }
    ctx.moveTo(col + 0.5, mid - hi * scale);
    ctx.lineTo(col + 0.5, mid - lo * scale + 1);
  }
  ctx.stroke();
}
