"""Differentiable signal kernels.

Everything here is plain torch so gradients flow from the spectral losses
back to decoder parameters: STFT log-magnitudes on linear and log-frequency
scales, the multi-scale spectral loss, zero-phase noise filtering through
real-spectrum coefficients, the COLA synthesis window and overlap-add.

All functions preserve the input dtype (float64 in, float64 out), which the
numeric tests rely on.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class SpectralLossConfig:
    window_sizes: tuple = (128, 256, 512, 1024, 2048)
    stft_overlap: float = 0.75
    epsilon: float = 5e-3
    scales: tuple = ("linear", "log")
    log_bins_per_octave: int = 24
    fmin_hz: float = 32.7
    sample_rate: int = 22050

    def __post_init__(self):
        ws = tuple(int(w) for w in self.window_sizes)
        if not ws:
            raise ValueError("window_sizes must be non-empty")
        for a, b in zip(ws, ws[1:]):
            if b <= a:
                raise ValueError(f"window_sizes must be strictly increasing, got {ws}")
        for w in ws:
            if w < 2 or (w & (w - 1)) != 0:
                raise ValueError(f"window sizes must be powers of two, got {w}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        for s in self.scales:
            if s not in ("linear", "log"):
                raise ValueError(f"unknown frequency scale {s!r}")
        object.__setattr__(self, "window_sizes", ws)
        object.__setattr__(self, "scales", tuple(self.scales))

    def hop_for(self, window_size):
        return max(1, int(round(window_size * (1.0 - self.stft_overlap))))

    def to_dict(self):
        return {
            "window_sizes": list(self.window_sizes),
            "stft_overlap": self.stft_overlap,
            "epsilon": self.epsilon,
            "scales": list(self.scales),
            "log_bins_per_octave": self.log_bins_per_octave,
            "fmin_hz": self.fmin_hz,
            "sample_rate": self.sample_rate,
        }

    @classmethod
    def from_dict(cls, d):
        """Accepts partial dicts; omitted fields take their defaults."""
        d = dict(d)
        if "window_sizes" in d:
            d["window_sizes"] = tuple(d["window_sizes"])
        if "scales" in d:
            d["scales"] = tuple(d["scales"])
        return cls(**d)


def default_loss_config(grain_config):
    """Per-sample-rate window ladder: 128..2048 at 22 kHz, 32..1024 at 16 kHz."""
    if grain_config.sample_rate >= 22050:
        sizes = (128, 256, 512, 1024, 2048)
    else:
        sizes = (32, 64, 128, 256, 512, 1024)
    max_len = grain_config.sequence_samples
    sizes = tuple(w for w in sizes if w <= max_len) or (min(sizes),)
    return SpectralLossConfig(window_sizes=sizes, sample_rate=grain_config.sample_rate)


def _as_tensor(x, like=None):
    if isinstance(x, torch.Tensor):
        return x
    t = torch.as_tensor(np.asarray(x))
    if t.dtype not in (torch.float32, torch.float64):
        t = t.to(torch.float32)
    if like is not None and isinstance(like, torch.Tensor):
        t = t.to(like.dtype)
    return t


def hann_window(n, dtype=torch.float32, device=None):
    """Periodic Hann window, w[0] = 0."""
    k = torch.arange(n, dtype=dtype, device=device)
    return 0.5 - 0.5 * torch.cos(2.0 * math.pi * k / n)


_FILTERBANK_CACHE = {}


def log_filterbank(window_size, sample_rate, bins_per_octave=24, fmin_hz=32.7,
                   dtype=torch.float32):
    """Triangular filterbank with log-spaced centers from fmin to Nyquist.

    Applied to a linear power spectrogram it gives a constant-Q-like
    log-frequency scale while staying differentiable. Returns a matrix
    (n_filters, window_size // 2 + 1).
    """
    key = (window_size, sample_rate, bins_per_octave, fmin_hz, dtype)
    if key in _FILTERBANK_CACHE:
        return _FILTERBANK_CACHE[key]
    n_bins = window_size // 2 + 1
    nyquist = sample_rate / 2.0
    n_octaves = math.log2(nyquist / fmin_hz)
    n_filters = max(1, int(math.floor(n_octaves * bins_per_octave)))
    # centers fmin .. nyquist, geometrically spaced; edges at neighboring centers
    centers = fmin_hz * (2.0 ** (np.arange(n_filters + 2) / bins_per_octave))
    freqs = np.arange(n_bins) * (sample_rate / window_size)
    bank = np.zeros((n_filters, n_bins))
    for i in range(n_filters):
        lo, mid, hi = centers[i], centers[i + 1], centers[i + 2]
        rise = (freqs - lo) / max(mid - lo, 1e-12)
        fall = (hi - freqs) / max(hi - mid, 1e-12)
        bank[i] = np.clip(np.minimum(rise, fall), 0.0, 1.0)
    out = torch.as_tensor(bank, dtype=dtype)
    _FILTERBANK_CACHE[key] = out
    return out


def stft_frames(signal, window_size, hop):
    """Frame a (..., T) signal into (..., frames, window_size), no padding."""
    if signal.shape[-1] < window_size:
        raise ValueError(
            f"signal length {signal.shape[-1]} shorter than window {window_size}"
        )
    return signal.unfold(-1, window_size, hop)


def log_magnitude(signal, window_size, hop=None, epsilon=5e-3, scale="linear",
                  window="hann", sample_rate=22050, log_bins_per_octave=24,
                  fmin_hz=32.7):
    """log(epsilon + |STFT|^2) over frames x bins, differentiable in the signal.

    scale="log" applies a log-spaced triangular filterbank to the linear
    power spectrogram before the log. window is "hann" (periodic, the
    default analysis window) or "rect".
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    signal = _as_tensor(signal)
    hop = hop or max(1, window_size // 4)
    frames = stft_frames(signal, window_size, hop)
    if window == "hann":
        w = hann_window(window_size, dtype=signal.dtype, device=signal.device)
        frames = frames * w
    elif window not in ("rect", None):
        raise ValueError(f"unknown analysis window {window!r}")
    spec = torch.fft.rfft(frames, dim=-1)
    power = spec.real ** 2 + spec.imag ** 2
    if scale == "log":
        bank = log_filterbank(window_size, sample_rate, log_bins_per_octave,
                              fmin_hz, dtype=signal.dtype).to(signal.device)
        power = power @ bank.T
    elif scale != "linear":
        raise ValueError(f"unknown frequency scale {scale!r}")
    return torch.log(epsilon + power)


def multiscale_spectral_loss(x, x_hat, config):
    """Sum over STFT scales and frequency scalings of L1 log-magnitude distance.

    Accepts (T,) or (batch, T); batched inputs are averaged over the batch.
    Symmetric, nonnegative, zero iff all log-magnitudes match.
    """
    x = _as_tensor(x)
    x_hat = _as_tensor(x_hat, like=x)
    if x.shape != x_hat.shape:
        raise ValueError(f"length mismatch: {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    if x.shape[-1] < max(config.window_sizes):
        raise ValueError(
            f"signals of length {x.shape[-1]} shorter than the largest window "
            f"{max(config.window_sizes)}"
        )
    batch = x.shape[0] if x.dim() > 1 else 1
    total = x.new_zeros(())
    for ws in config.window_sizes:
        hop = config.hop_for(ws)
        for scale in config.scales:
            kw = dict(hop=hop, epsilon=config.epsilon, scale=scale,
                      sample_rate=config.sample_rate,
                      log_bins_per_octave=config.log_bins_per_octave,
                      fmin_hz=config.fmin_hz)
            lx = log_magnitude(x, ws, **kw)
            ly = log_magnitude(x_hat, ws, **kw)
            total = total + torch.sum(torch.abs(lx - ly))
    return total / batch


def uniform_noise(shape, seed=None, generator=None, dtype=torch.float32, device=None):
    """Uniform noise excitation on [-1, 1]."""
    if generator is None and seed is not None:
        generator = torch.Generator(device=device or "cpu")
        generator.manual_seed(int(seed))
    return torch.rand(shape, generator=generator, dtype=dtype, device=device) * 2.0 - 1.0


def filter_grain(coeffs, noise):
    """Zero-phase filtering of a noise grain by real spectral magnitudes.

    coeffs has grain_size // 2 + 1 entries (the positive-frequency bins of a
    Hermitian spectrum); output is real by construction and linear in coeffs.
    Accepts leading batch dims on both arguments.
    """
    coeffs = _as_tensor(coeffs)
    noise = _as_tensor(noise, like=coeffs)
    d_x = noise.shape[-1]
    d_h = d_x // 2 + 1
    if coeffs.shape[-1] != d_h:
        raise ValueError(
            f"expected {d_h} filter coefficients for grain size {d_x}, "
            f"got {coeffs.shape[-1]}"
        )
    spectrum = torch.fft.rfft(noise, dim=-1)
    return torch.fft.irfft(coeffs * spectrum, n=d_x, dim=-1)


def synthesis_window(grain_size, overlap_ratio, dtype=torch.float32):
    """Periodic Hann scaled so copies shifted by hop sum to 1 (COLA)."""
    if overlap_ratio not in (0.5, 0.75):
        raise ValueError(f"unsupported overlap_ratio {overlap_ratio}; use 0.5 or 0.75")
    copies = int(round(1.0 / (1.0 - overlap_ratio)))
    return (hann_window(grain_size, dtype=torch.float64) / (0.5 * copies)).to(dtype)


def overlap_add(grains, hop, window):
    """Sum windowed grains at hop offsets: (..., g, d_x) -> (..., (g-1)*hop + d_x)."""
    grains = _as_tensor(grains)
    window = _as_tensor(window, like=grains).to(grains.device)
    if grains.dim() < 2:
        raise ValueError("grains must have shape (..., g, grain_size)")
    d_x = grains.shape[-1]
    if window.shape[-1] != d_x:
        raise ValueError(f"window length {window.shape[-1]} != grain size {d_x}")
    g = grains.shape[-2]
    out_len = (g - 1) * hop + d_x
    lead = grains.shape[:-2]
    flat = (grains * window).reshape(-1, g, d_x)
    # F.fold implements exactly the scatter-add of frames at stride hop
    folded = F.fold(
        flat.transpose(1, 2),
        output_size=(1, out_len),
        kernel_size=(1, d_x),
        stride=(1, hop),
    ).reshape(-1, out_len)
    return folded.reshape(*lead, out_len) if lead else folded.reshape(out_len)


def stitch_target(grains, hop):
    """Rebuild the contiguous source segment from verbatim overlapping slices.

    Inverse of slicing for grains cut at hop offsets: the first hop samples
    of each grain followed by the full final grain.
    """
    grains = _as_tensor(grains)
    d_x = grains.shape[-1]
    head = grains[..., :-1, :hop].reshape(*grains.shape[:-2], -1)
    return torch.cat([head, grains[..., -1, :]], dim=-1)
