"""WAV file helpers: mono float audio in [-1, 1] on both sides of the disk boundary."""

import io

import numpy as np
from scipy.io import wavfile


def load_wav(path_or_bytes):
    """Read a WAV file (16-bit int or 32-bit float PCM) as mono float32.

    Stereo input is downmixed by averaging channels.
    Returns (audio, sample_rate).
    """
    if isinstance(path_or_bytes, (bytes, bytearray)):
        path_or_bytes = io.BytesIO(bytes(path_or_bytes))
    sr, data = wavfile.read(path_or_bytes)
    if data.dtype == np.int16:
        audio = data.astype(np.float32) / 32768.0
    elif data.dtype == np.int32:
        audio = data.astype(np.float32) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        audio = data.astype(np.float32)
    elif data.dtype == np.uint8:
        audio = (data.astype(np.float32) - 128.0) / 128.0
    else:
        raise ValueError(f"unsupported WAV sample format: {data.dtype}")
    if audio.ndim == 2:
        audio = audio.mean(axis=1)
    return np.ascontiguousarray(audio, dtype=np.float32), int(sr)


def save_wav(path, audio, sample_rate):
    """Write mono audio as 32-bit float WAV."""
    audio = np.asarray(audio, dtype=np.float32).reshape(-1)
    wavfile.write(path, int(sample_rate), audio)


def wav_bytes(audio, sample_rate):
    """Render mono audio to an in-memory 32-bit float WAV blob."""
    buf = io.BytesIO()
    save_wav(buf, audio, sample_rate)
    return buf.getvalue()
