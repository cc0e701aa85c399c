/** Minimal RIFF/WAVE reader — enough to plot what the service rendered.
 * Audio synthesis itself never happens client-side; this only unpacks
 * fetched bytes for the waveform display. */

export interface DecodedWav {
  sampleRate: number;
  /** First channel, normalized to [-1, 1] floats. */
  samples: Float32Array;
}

export function decodeWav(buffer: ArrayBuffer): DecodedWav {
  const view = new DataView(buffer);
  const tag = (offset: number) =>
    String.fromCharCode(
      view.getUint8(offset),
      view.getUint8(offset + 1),
      view.getUint8(offset + 2),
      view.getUint8(offset + 3),
    );
  if (buffer.byteLength < 44 || tag(0) !== "RIFF" || tag(8) !== "WAVE") {
    throw new Error("not a RIFF/WAVE file");
  }

  let format = 0;
  let channels = 1;
  let sampleRate = 0;
  let bitsPerSample = 0;
  let dataOffset = -1;
  let dataLength = 0;

  let offset = 12;
  while (offset + 8 <= buffer.byteLength) {
    const id = tag(offset);
    const size = view.getUint32(offset + 4, true);
    if (id === "fmt ") {
      format = view.getUint16(offset + 8, true);
      channels = view.getUint16(offset + 10, true);
      sampleRate = view.getUint32(offset + 12, true);
      bitsPerSample = view.getUint16(offset + 22, true);
    } else if (id === "data") {
      dataOffset = offset + 8;
      dataLength = size;
    }
    offset += 8 + size + (size % 2); // chunks are word-aligned
  }
  if (dataOffset < 0) throw new Error("WAV has no data chunk");
  if (sampleRate <= 0) throw new Error("WAV has no fmt chunk");

  const bytesPerSample = bitsPerSample / 8;
  const frames = Math.floor(dataLength / (bytesPerSample * channels));
  const samples = new Float32Array(frames);
  const stride = bytesPerSample * channels; // read channel 0 of each frame
  if (format === 3 && bitsPerSample === 32) {
    for (let i = 0; i < frames; i++) {
      samples[i] = view.getFloat32(dataOffset + i * stride, true);
    }
  } else if (format === 1 && bitsPerSample === 16) {
    for (let i = 0; i < frames; i++) {
      samples[i] = view.getInt16(dataOffset + i * stride, true) / 32768;
    }
  } else {
    throw new Error(
      `unsupported WAV encoding (format ${format}, ${bitsPerSample}-bit)`,
    );
  }
  return { sampleRate, samples };
}
