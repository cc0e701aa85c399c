"""Generation modes over a trained grain space.

Four ways to drive the decoder: free paths traced through latent space,
analysis/resynthesis of target audio, one-shot conditional sampling through
the temporal embedding, and interpolation between two embeddings. Long
outputs are assembled from independently decoded segments joined by
sum-to-one raised-cosine crossfades, so constant-amplitude material passes
through a joint without a level bump.
"""

import math
from dataclasses import dataclass, asdict

import numpy as np
import torch

from .corpus import slice_waveform
from .model import ConditionLabel


def _smoothstep(t):
    return t * t * (3.0 - 2.0 * t)


MODULATIONS = {
    "linear": lambda t: t,
    "ease_in": lambda t: t * t,
    "ease_out": lambda t: 1.0 - (1.0 - t) ** 2,
    "smooth": _smoothstep,
}

PATH_KINDS = ("linear", "circle", "spiral", "custom")


@dataclass
class PathSpec:
    """A latent trajectory: a line, a circle or spiral in a latent plane, or
    explicit points. step_modulation warps the per-step parameter (a preset
    name or any monotone callable on [0, 1] with fixed endpoints), letting a
    path dwell or rush without changing its geometry.
    """

    kind: str
    num_points: int
    start: list = None
    end: list = None
    center: list = None
    radius: float = 1.0
    radius_end: float = 0.0
    turns: float = 1.0
    axes: tuple = (0, 1)
    points: list = None
    step_modulation: object = None

    def __post_init__(self):
        if self.kind not in PATH_KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}; one of {PATH_KINDS}")
        if self.num_points < 1:
            raise ValueError("num_points must be >= 1")
        if self.kind == "linear" and (self.start is None or self.end is None):
            raise ValueError("linear path needs start and end vectors")
        if self.kind in ("circle", "spiral") and self.center is None:
            raise ValueError(f"{self.kind} path needs a center vector")
        if self.kind == "custom":
            if self.points is None:
                raise ValueError("custom path needs explicit points")
            pts = np.asarray(self.points, dtype=np.float64)
            if pts.ndim != 2:
                raise ValueError("custom points must be a 2-D array of latent vectors")
            if pts.shape[0] != self.num_points:
                raise ValueError(
                    f"num_points={self.num_points} but {pts.shape[0]} points given"
                )
        self.axes = tuple(int(a) for a in self.axes)
        if len(self.axes) != 2 or self.axes[0] == self.axes[1]:
            raise ValueError("axes must be two distinct latent indices")
        self._warp_fn()  # validates the modulation

    def _warp_fn(self):
        mod = self.step_modulation
        if mod is None:
            return MODULATIONS["linear"]
        if isinstance(mod, str):
            if mod not in MODULATIONS:
                raise ValueError(
                    f"unknown modulation {mod!r}; presets: {sorted(MODULATIONS)}"
                )
            return MODULATIONS[mod]
        if not callable(mod):
            raise ValueError("step_modulation must be a preset name or callable")
        probe = np.linspace(0.0, 1.0, 257)
        vals = np.array([float(mod(t)) for t in probe])
        if abs(vals[0]) > 1e-9 or abs(vals[-1] - 1.0) > 1e-9:
            raise ValueError("modulation must map 0 -> 0 and 1 -> 1")
        if np.any(np.diff(vals) < -1e-12):
            raise ValueError("modulation must be monotone non-decreasing")
        return mod

    def to_dict(self):
        if self.step_modulation is not None and not isinstance(self.step_modulation, str):
            raise ValueError(
                "only preset modulation names serialize; got a callable"
            )
        d = asdict(self)
        d["axes"] = list(self.axes)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "axes" in d and d["axes"] is not None:
            d["axes"] = tuple(d["axes"])
        return cls(**d)


def latent_points(spec, latent_dim):
    """Realize a PathSpec as a (num_points, latent_dim) float array."""
    warp = spec._warp_fn()
    n = spec.num_points
    ts = np.array([warp(t) for t in (np.linspace(0.0, 1.0, n) if n > 1 else [0.0])])

    def as_vec(v, name):
        arr = np.asarray(v, dtype=np.float64).reshape(-1)
        if arr.shape[0] != latent_dim:
            raise ValueError(
                f"{name} has dimension {arr.shape[0]}, model latent space is {latent_dim}"
            )
        return arr

    if spec.kind == "custom":
        pts = np.asarray(spec.points, dtype=np.float64)
        if pts.shape[1] != latent_dim:
            raise ValueError(
                f"custom points have dimension {pts.shape[1]}, "
                f"model latent space is {latent_dim}"
            )
        return pts.copy()
    if spec.kind == "linear":
        a, b = as_vec(spec.start, "start"), as_vec(spec.end, "end")
        return a[None, :] + ts[:, None] * (b - a)[None, :]
    center = as_vec(spec.center, "center")
    i, j = spec.axes
    if not (0 <= i < latent_dim and 0 <= j < latent_dim):
        raise ValueError(f"axes {spec.axes} out of range for latent dim {latent_dim}")
    pts = np.repeat(center[None, :], n, axis=0)
    theta = 2.0 * math.pi * spec.turns * ts
    if spec.kind == "circle":
        r = np.full(n, spec.radius)
    else:  # spiral: radius sweeps linearly while the angle turns
        r = spec.radius + ts * (spec.radius_end - spec.radius)
    pts[:, i] += r * np.cos(theta)
    pts[:, j] += r * np.sin(theta)
    return pts


def _to_audio(wave):
    return wave.detach().cpu().numpy().astype(np.float32)


def free_path(spec, model, condition=None, seed=0):
    """Decode a latent trajectory chunk by chunk into one waveform.

    Points are consumed in contiguous chunks of seq_len; a trailing partial
    chunk is padded by holding the final point. Each chunk's excitation noise
    is seeded from (seed, chunk index), so the result is reproducible.
    """
    g = model.config.grain.seq_len
    pts = latent_points(spec, model.config.latent_dim)
    n_chunks = int(np.ceil(pts.shape[0] / g))
    pieces = []
    for k in range(n_chunks):
        chunk = pts[k * g:(k + 1) * g]
        if chunk.shape[0] < g:
            chunk = np.concatenate(
                [chunk, np.repeat(chunk[-1:], g - chunk.shape[0], axis=0)]
            )
        z = torch.as_tensor(chunk, dtype=torch.float32)
        with torch.no_grad():
            wave = model.decode(z, condition=condition, noise_seed=seed + k)
        pieces.append(_to_audio(wave))
    return np.concatenate(pieces)


def render_latent_series(latents, model, condition=None, fade=None, noise_seed=0):
    """Decode a stack of latent sequences and crossfade them into one waveform.

    latents is shaped (n_sequences, g, d_z) (a single (g, d_z) matrix is also
    accepted); consecutive decoded segments overlap by `fade` samples, default
    grain_size // 2.
    """
    cfg = model.config.grain
    z = torch.as_tensor(np.asarray(latents, dtype=np.float32))
    if z.ndim == 2:
        z = z[None]
    if z.ndim != 3 or z.shape[1] != cfg.seq_len or z.shape[2] != model.config.latent_dim:
        raise ValueError(
            f"latents must be shaped (n, {cfg.seq_len}, {model.config.latent_dim}), "
            f"got {tuple(z.shape)}"
        )
    d_x, hop = cfg.grain_size, cfg.hop
    if fade is None:
        fade = d_x // 2
    fade = int(fade)
    natural_overlap = d_x - hop
    if fade < 0 or fade > natural_overlap:
        raise ValueError(
            f"fade must be within [0, {natural_overlap}] samples "
            f"(the overlap between consecutive decoded segments)"
        )
    segments = []
    for k in range(z.shape[0]):
        with torch.no_grad():
            wave = model.decode(z[k], condition=condition, noise_seed=noise_seed + k)
        segments.append(_to_audio(wave))
    if len(segments) == 1:
        return segments[0]
    # consecutive segments start g*hop apart but each runs (d_x - hop) longer;
    # trimming all but the last to g*hop + fade leaves exactly `fade` overlap
    keep = cfg.seq_len * hop + fade
    segments = [s[:keep] for s in segments[:-1]] + [segments[-1]]
    return assemble_long(segments, fade)


def resynthesize(audio, model, condition=None, fade=None, noise_seed=0):
    """Emulate target audio through the grain space.

    The input is peak-normalized and sliced exactly as training corpora are,
    encoded to posterior means (no sampling noise), decoded sequence by
    sequence, and the decoded segments are crossfaded back together. Output
    length is the input length rounded up to the grain grid.
    """
    audio = np.asarray(audio, dtype=np.float32).reshape(-1)
    cfg = model.config.grain
    if audio.shape[0] < cfg.grain_size:
        raise ValueError(
            f"input of {audio.shape[0]} samples is shorter than one grain "
            f"({cfg.grain_size})"
        )
    mus = []
    for seq in slice_waveform(audio, cfg):
        grains = torch.as_tensor(seq.grains, dtype=torch.float32)
        with torch.no_grad():
            mus.append(model.encode(grains).mu.numpy())
    return render_latent_series(np.stack(mus), model, condition=condition,
                                fade=fade, noise_seed=noise_seed)


def decode_embedding(e, model, temporal, condition=None, noise_seed=0):
    """Temporal embedding -> latent series -> waveform."""
    if temporal is None:
        raise ValueError("checkpoint has no temporal stage; train it first")
    g = model.config.grain.seq_len
    cond_vec = None
    if model.config.conditional:
        if condition is None:
            raise ValueError("conditional model requires a condition label")
        cond_vec = model._condition_vector(
            condition, 1, 1, torch.float32, torch.device("cpu")
        )[0, 0]
    with torch.no_grad():
        z = temporal.decode_sequence(torch.as_tensor(e, dtype=torch.float32), steps=g,
                                     condition_vec=cond_vec)
        wave = model.decode(z, condition=condition, noise_seed=noise_seed)
    return _to_audio(wave)


def conditional_sample(condition, seed, checkpoint):
    """One-shot class-conditional generation from the embedding prior."""
    from .temporal import sample_prior

    model = checkpoint.model
    if not model.config.conditional:
        raise ValueError("checkpoint is unconditional; conditional sampling needs labels")
    if checkpoint.temporal is None:
        raise ValueError("checkpoint has no temporal stage; train it first")
    if isinstance(condition, (int, np.integer)):
        condition = ConditionLabel(int(condition), model.config.num_categories)
    e = sample_prior(model.config.embed_dim, seed)
    return decode_embedding(e, model, checkpoint.temporal,
                            condition=condition, noise_seed=seed)


def interpolate_embeddings(e1, e2, alpha, model, temporal, condition=None,
                           noise_seed=0):
    """Decode the convex combination (1 - alpha) * e1 + alpha * e2."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    e1 = torch.as_tensor(np.asarray(e1), dtype=torch.float32).reshape(-1)
    e2 = torch.as_tensor(np.asarray(e2), dtype=torch.float32).reshape(-1)
    if e1.shape != e2.shape:
        raise ValueError(f"embedding shapes differ: {tuple(e1.shape)} vs {tuple(e2.shape)}")
    if alpha == 0.0:
        e = e1
    elif alpha == 1.0:
        e = e2
    else:
        e = (1.0 - alpha) * e1 + alpha * e2
    return decode_embedding(e, model, temporal, condition=condition,
                            noise_seed=noise_seed)


def assemble_long(segments, fade):
    """Join waveform segments with sum-to-one raised-cosine crossfades.

    Consecutive segments overlap by `fade` samples; the fade-out and fade-in
    curves sum to one at every sample, so joining two constant signals of
    equal level yields a constant signal. Total length is
    sum(lengths) - (n - 1) * fade.
    """
    segments = [np.asarray(s, dtype=np.float32).reshape(-1) for s in segments]
    if not segments:
        raise ValueError("no segments to assemble")
    fade = int(fade)
    if fade < 0:
        raise ValueError("fade must be >= 0")
    if len(segments) == 1:
        return segments[0].copy()
    for k, s in enumerate(segments):
        if s.shape[0] < 2 * fade:
            raise ValueError(
                f"segment {k} has {s.shape[0]} samples, shorter than twice the "
                f"{fade}-sample fade"
            )
    if fade == 0:
        return np.concatenate(segments)
    t = (np.arange(fade, dtype=np.float64) + 0.5) / fade
    fade_in = 0.5 * (1.0 - np.cos(np.pi * t))
    fade_out = 1.0 - fade_in
    total = sum(s.shape[0] for s in segments) - (len(segments) - 1) * fade
    out = np.zeros(total, dtype=np.float64)
    pos = 0
    for k, s in enumerate(segments):
        piece = s.astype(np.float64)  # astype copies, so in-place fades are safe
        if k > 0:
            piece[:fade] *= fade_in
        if k < len(segments) - 1:
            piece[-fade:] *= fade_out
        out[pos:pos + piece.shape[0]] += piece
        pos += piece.shape[0] - fade
    return out.astype(np.float32)
