"""Grain-level VAE: convolutional encoder to per-grain Gaussian posteriors and
four interchangeable decoders back to waveforms.

The spectral filtering decoders emit nonnegative frequency coefficients that
shape uniform noise excitations (zero-phase, via the real spectrum); the
convolutional baselines mirror the encoder with transposed or
upsample-then-convolve stacks. All variants end in the same COLA overlap-add,
so they are drop-in comparable.
"""

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .corpus import GrainConfig
from .dsp import (
    SpectralLossConfig,
    default_loss_config,
    filter_grain,
    overlap_add,
    synthesis_window,
    uniform_noise,
)

VARIANTS = ("filtering", "filtering_postproc", "transposed_conv", "upsample_conv")

LOGVAR_MIN, LOGVAR_MAX = -10.0, 10.0


@dataclass
class ModelConfig:
    grain: GrainConfig = field(default_factory=GrainConfig)
    latent_dim: int = 96
    embed_dim: int = 256
    variant: str = "filtering_postproc"
    label_schema: tuple = ()
    loss: SpectralLossConfig | None = None
    channels: tuple = (32, 64, 128, 256)
    fc_hidden: int = 512
    temporal_hidden: int = 512

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown decoder variant {self.variant!r}; choose from {VARIANTS}")
        self.label_schema = tuple(self.label_schema)
        self.channels = tuple(self.channels)
        if self.loss is None:
            self.loss = default_loss_config(self.grain)

    @property
    def num_categories(self):
        return len(self.label_schema)

    @property
    def conditional(self):
        return self.num_categories > 0

    def to_dict(self):
        return {
            "grain": self.grain.to_dict(),
            "latent_dim": self.latent_dim,
            "embed_dim": self.embed_dim,
            "variant": self.variant,
            "label_schema": list(self.label_schema),
            "loss": self.loss.to_dict(),
            "channels": list(self.channels),
            "fc_hidden": self.fc_hidden,
            "temporal_hidden": self.temporal_hidden,
        }

    @classmethod
    def from_dict(cls, d):
        """Accepts partial dicts; omitted fields take their defaults."""
        d = dict(d)
        if isinstance(d.get("grain"), dict):
            d["grain"] = GrainConfig.from_dict(d["grain"])
        if isinstance(d.get("loss"), dict):
            d["loss"] = SpectralLossConfig.from_dict(d["loss"])
        if "label_schema" in d and d["label_schema"] is not None:
            d["label_schema"] = tuple(d["label_schema"])
        if "channels" in d and d["channels"] is not None:
            d["channels"] = tuple(d["channels"])
        return cls(**d)


@dataclass
class GaussianParams:
    """Diagonal-Gaussian posterior means and standard deviations."""

    mu: torch.Tensor
    sigma: torch.Tensor

    def __post_init__(self):
        if self.mu.shape != self.sigma.shape:
            raise ValueError(f"mu/sigma shape mismatch: {self.mu.shape} vs {self.sigma.shape}")
        if not bool((self.sigma > 0).all()):
            raise ValueError("sigma must be positive elementwise")


@dataclass(frozen=True)
class ConditionLabel:
    index: int
    num_categories: int

    def __post_init__(self):
        if not 0 <= self.index < self.num_categories:
            raise ValueError(
                f"condition index {self.index} out of range [0, {self.num_categories})"
            )

    def one_hot(self, dtype=torch.float32):
        v = torch.zeros(self.num_categories, dtype=dtype)
        v[self.index] = 1.0
        return v


def conv_ladder(grain_size, max_blocks, min_time=8):
    """Temporal lengths through the stride-4 stack, e.g. 2048 -> [512,128,32,8]."""
    lengths = [grain_size]
    while (
        len(lengths) - 1 < max_blocks
        and lengths[-1] % 4 == 0
        and lengths[-1] // 4 >= 2
        and lengths[-1] > min_time
    ):
        lengths.append(lengths[-1] // 4)
    if len(lengths) < 2:
        raise ValueError(f"grain_size {grain_size} too small for the conv stack")
    return lengths


class ResidualConvBlock(nn.Module):
    """Strided conv with a 1x1 strided skip path."""

    def __init__(self, cin, cout, kernel=9, stride=4):
        super().__init__()
        self.conv = nn.Conv1d(cin, cout, kernel, stride=stride, padding=kernel // 2)
        self.skip = nn.Conv1d(cin, cout, 1, stride=stride)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        return self.act(self.conv(x) + self.skip(x))


class GrainEncoder(nn.Module):
    """Per-grain stack of strided residual convolutions to 2*latent_dim."""

    def __init__(self, config):
        super().__init__()
        d_x = config.grain.grain_size
        ladder = conv_ladder(d_x, len(config.channels))
        chans = (1,) + config.channels[:len(ladder) - 1]
        self.blocks = nn.Sequential(
            *[ResidualConvBlock(chans[i], chans[i + 1]) for i in range(len(ladder) - 1)]
        )
        flat = chans[-1] * ladder[-1]
        self.head = nn.Sequential(
            nn.Linear(flat, config.fc_hidden),
            nn.LeakyReLU(0.2),
            nn.Linear(config.fc_hidden, 2 * config.latent_dim),
        )
        self.latent_dim = config.latent_dim
        self.grain_size = d_x

    def forward(self, grains):
        """(batch, g, grain_size) -> mu, logvar of shape (batch, g, latent_dim)."""
        b, g, d_x = grains.shape
        if d_x != self.grain_size:
            raise ValueError(f"expected grains of size {self.grain_size}, got {d_x}")
        h = self.blocks(grains.reshape(b * g, 1, d_x))
        out = self.head(h.reshape(b * g, -1)).reshape(b, g, 2 * self.latent_dim)
        mu, logvar = out.chunk(2, dim=-1)
        return mu, logvar.clamp(LOGVAR_MIN, LOGVAR_MAX)


class ResidualFC(nn.Module):
    def __init__(self, width):
        super().__init__()
        self.lin = nn.Linear(width, width)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        return x + self.act(self.lin(x))


class SpectralFilterDecoder(nn.Module):
    """Residual MLP from latents to filter magnitudes, applied to seeded noise."""

    def __init__(self, config, postprocess=False):
        super().__init__()
        grain = config.grain
        in_dim = config.latent_dim + config.num_categories
        width = config.fc_hidden
        self.net = nn.Sequential(
            nn.Linear(in_dim, width),
            nn.LeakyReLU(0.2),
            ResidualFC(width),
            ResidualFC(width),
            ResidualFC(width),
        )
        self.coeff_out = nn.Linear(width, grain.filter_size)
        self.register_buffer("window", synthesis_window(grain.grain_size, grain.overlap_ratio))
        self.hop = grain.hop
        self.grain_size = grain.grain_size
        self.post = PostProcessor() if postprocess else None

    def coefficients(self, z_in):
        """(batch, g, in_dim) -> nonnegative (batch, g, filter_size)."""
        return F.softplus(self.coeff_out(self.net(z_in)))

    def forward(self, z_in, generator=None):
        coeffs = self.coefficients(z_in)
        noise = uniform_noise(
            (z_in.shape[0], z_in.shape[1], self.grain_size),
            generator=generator,
            dtype=z_in.dtype,
            device=z_in.device,
        )
        grains = filter_grain(coeffs, noise)
        wave = overlap_add(grains, self.hop, self.window.to(z_in.dtype))
        if self.post is not None:
            wave = self.post(wave)
        return wave


class TransposedBlock(nn.Module):
    def __init__(self, cin, cout):
        super().__init__()
        # kernel 9 / stride 4 / pad 3 / output_pad 1 gives exact 4x upsampling
        self.conv = nn.ConvTranspose1d(cin, cout, 9, stride=4, padding=3, output_padding=1)
        self.skip = nn.Conv1d(cin, cout, 1)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        y = self.conv(x)
        s = self.skip(F.interpolate(x, scale_factor=4, mode="nearest"))
        return self.act(y + s)


class UpsampleBlock(nn.Module):
    def __init__(self, cin, cout):
        super().__init__()
        self.conv = nn.Conv1d(cin, cout, 9, padding=4)
        self.skip = nn.Conv1d(cin, cout, 1)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        x = F.interpolate(x, scale_factor=4, mode="nearest")
        return self.act(self.conv(x) + self.skip(x))


class ConvDecoder(nn.Module):
    """Mirrors the encoder: latents to per-grain waveforms, then overlap-add."""

    def __init__(self, config, block_cls):
        super().__init__()
        grain = config.grain
        ladder = conv_ladder(grain.grain_size, len(config.channels))
        chans = (1,) + config.channels[:len(ladder) - 1]
        self.start_channels = chans[-1]
        self.start_time = ladder[-1]
        in_dim = config.latent_dim + config.num_categories
        self.proj = nn.Linear(in_dim, self.start_channels * self.start_time)
        ups = []
        for i in range(len(ladder) - 1, 0, -1):
            cout = chans[i - 1] if i > 1 else config.channels[0]
            ups.append(block_cls(chans[i], cout))
        self.blocks = nn.Sequential(*ups)
        self.out_conv = nn.Conv1d(config.channels[0], 1, 9, padding=4)
        self.register_buffer("window", synthesis_window(grain.grain_size, grain.overlap_ratio))
        self.hop = grain.hop
        self.grain_size = grain.grain_size

    def forward(self, z_in, generator=None):
        b, g, _ = z_in.shape
        h = self.proj(z_in.reshape(b * g, -1)).reshape(b * g, self.start_channels, self.start_time)
        h = self.blocks(h)
        grains = self.out_conv(h).reshape(b, g, self.grain_size)
        return overlap_add(grains, self.hop, self.window.to(z_in.dtype))


class PostProcessor(nn.Module):
    """Bank of parallel learnable FIR filters over the assembled waveform.

    Channel kernels start as a shared unit impulse plus zero-sum jitter, and
    the mixing weights as the uniform average, so the module is an identity
    at initialization. Purely linear (no bias, no nonlinearity).
    """

    def __init__(self, channels=8, taps=128):
        super().__init__()
        center = taps // 2
        base = torch.zeros(channels, taps)
        base[:, center] = 1.0
        jitter = torch.randn(channels, taps, generator=torch.Generator().manual_seed(0)) * 1e-3
        jitter = jitter - jitter.mean(dim=0, keepdim=True)  # channel sum stays an impulse
        self.fir = nn.Parameter(base + jitter)
        self.mix = nn.Parameter(torch.full((channels,), 1.0 / channels))
        self.taps = taps
        self.pad = (center, taps - 1 - center)

    def forward(self, wave):
        lead = wave.shape[:-1]
        x = wave.reshape(-1, 1, wave.shape[-1])
        x = F.pad(x, self.pad)
        y = F.conv1d(x, self.fir.unsqueeze(1).to(wave.dtype))
        y = (y * self.mix.to(wave.dtype)[None, :, None]).sum(dim=1)
        return y.reshape(*lead, -1) if lead else y.reshape(-1)

    def impulse_response(self):
        """Effective summed FIR kernel, as applied by forward."""
        with torch.no_grad():
            kernel = (self.fir * self.mix[:, None]).sum(dim=0)
        return torch.flip(kernel, dims=[0])  # conv1d correlates; flip to convolution order


def build_decoder(variant, config):
    """Construct one of the four decoder variants behind a common interface."""
    if variant == "filtering":
        return SpectralFilterDecoder(config, postprocess=False)
    if variant == "filtering_postproc":
        return SpectralFilterDecoder(config, postprocess=True)
    if variant == "transposed_conv":
        return ConvDecoder(config, TransposedBlock)
    if variant == "upsample_conv":
        return ConvDecoder(config, UpsampleBlock)
    raise ValueError(f"unknown decoder variant {variant!r}; choose from {VARIANTS}")


def reparameterize(params, eps=None, generator=None):
    """z = mu + eps * sigma with eps ~ N(0, I) unless supplied."""
    if eps is None:
        eps = torch.randn(params.mu.shape, generator=generator, dtype=params.mu.dtype,
                          device=params.mu.device)
    eps = torch.as_tensor(eps, dtype=params.mu.dtype)
    if eps.shape != params.mu.shape:
        raise ValueError(f"eps shape {tuple(eps.shape)} != mu shape {tuple(params.mu.shape)}")
    return params.mu + eps * params.sigma


def kl_divergence(params):
    """Closed-form KL to the unit Gaussian, summed over grains and dimensions.

    Batched input is averaged over the batch dimension.
    """
    mu, sigma = params.mu, params.sigma
    var = sigma ** 2
    per_elem = 0.5 * (mu ** 2 + var - 1.0 - torch.log(var))
    if mu.dim() <= 2:
        return per_elem.sum()
    return per_elem.sum(dim=tuple(range(1, mu.dim()))).mean()


class GrainVAE(nn.Module):
    """Encoder + decoder pair over grain sequences."""

    def __init__(self, config):
        super().__init__()
        self.config = config
        self.encoder = GrainEncoder(config)
        self.decoder = build_decoder(config.variant, config)

    @property
    def output_samples(self):
        g = self.config.grain
        return (g.seq_len - 1) * g.hop + g.grain_size

    def _as_batch(self, x, ndim):
        t = torch.as_tensor(np.asarray(x)) if not isinstance(x, torch.Tensor) else x
        if t.dtype not in (torch.float32, torch.float64):
            t = t.to(torch.float32)
        t = t.to(next(self.parameters()).dtype)
        squeeze = t.dim() == ndim - 1
        return (t.unsqueeze(0), True) if squeeze else (t, False)

    def encode(self, grains):
        """Grain sequences to per-grain posteriors; accepts (g, d_x) or (B, g, d_x)."""
        t, squeezed = self._as_batch(grains, 3)
        if t.dim() != 3:
            raise ValueError(f"expected (batch, g, grain_size) grains, got shape {tuple(t.shape)}")
        mu, logvar = self.encoder(t)
        sigma = torch.exp(0.5 * logvar)
        if squeezed:
            mu, sigma = mu.squeeze(0), sigma.squeeze(0)
        return GaussianParams(mu=mu, sigma=sigma)

    def _condition_vector(self, condition, batch, g, dtype, device):
        n_cat = self.config.num_categories
        if n_cat == 0:
            if condition is not None:
                raise ValueError("model is unconditional; no condition label accepted")
            return None
        if condition is None:
            raise ValueError("conditional model requires a condition label")
        if isinstance(condition, ConditionLabel):
            if condition.num_categories != n_cat:
                raise ValueError(
                    f"condition carries {condition.num_categories} categories, model has {n_cat}"
                )
            oh = condition.one_hot(dtype)
        elif isinstance(condition, str):
            if condition not in self.config.label_schema:
                raise ValueError(f"unknown label {condition!r}; schema {self.config.label_schema}")
            oh = ConditionLabel(self.config.label_schema.index(condition), n_cat).one_hot(dtype)
        elif isinstance(condition, (int, np.integer)):
            oh = ConditionLabel(int(condition), n_cat).one_hot(dtype)
        else:
            oh = torch.as_tensor(condition, dtype=dtype)
            if oh.shape[-1] != n_cat:
                raise ValueError(f"condition vector must have {n_cat} entries")
        oh = oh.to(device)
        while oh.dim() < 2:
            oh = oh.unsqueeze(0)
        return oh[:, None, :].expand(batch, g, n_cat)

    def decode(self, z, condition=None, noise_seed=None, generator=None):
        """Latent series to waveform: (g, d_z) -> (T,) or (B, g, d_z) -> (B, T).

        noise_seed pins the uniform excitations of the filtering decoders,
        making the pass reproducible; unseeded passes draw fresh noise.
        """
        t, squeezed = self._as_batch(z, 3)
        if t.dim() != 3 or t.shape[-1] != self.config.latent_dim:
            raise ValueError(
                f"expected latents (batch, g, {self.config.latent_dim}), got {tuple(t.shape)}"
            )
        b, g, _ = t.shape
        oh = self._condition_vector(condition, b, g, t.dtype, t.device)
        z_in = torch.cat([t, oh], dim=-1) if oh is not None else t
        if generator is None and noise_seed is not None:
            generator = torch.Generator(device="cpu")
            generator.manual_seed(int(noise_seed))
        wave = self.decoder(z_in, generator=generator)
        return wave.squeeze(0) if squeezed else wave

    def forward(self, grains, condition=None, eps=None, generator=None):
        params = self.encode(grains)
        z = reparameterize(params, eps=eps, generator=generator)
        wave = self.decode(z, condition=condition, generator=generator)
        return wave, params, z


def build_model(config):
    return GrainVAE(config)
