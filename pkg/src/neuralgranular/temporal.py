"""Sequence-level embedding over latent grain trajectories.

A recurrent encoder compresses an ordered series of grain latents into a
single Gaussian embedding; a recurrent decoder unrolls an embedding back
into a structured latent series. Trained as a small second-stage VAE on the
frozen grain encoder's posterior means, it enables one-shot sampling and
smooth temporal interpolation.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .model import LOGVAR_MAX, LOGVAR_MIN, GaussianParams


@dataclass
class SequenceEmbedding:
    """A whole latent trajectory summarized as one vector with a N(0, I) prior."""

    e: torch.Tensor

    def __post_init__(self):
        self.e = torch.as_tensor(self.e)
        if self.e.dim() != 1:
            raise ValueError(f"embedding must be 1-D, got shape {tuple(self.e.shape)}")
        if not bool(torch.isfinite(self.e).all()):
            raise ValueError("embedding has non-finite entries")


class TemporalEncoder(nn.Module):
    def __init__(self, latent_dim, embed_dim, hidden=512):
        super().__init__()
        self.gru = nn.GRU(latent_dim, hidden, batch_first=True)
        self.mu_head = nn.Linear(hidden, embed_dim)
        self.logvar_head = nn.Linear(hidden, embed_dim)

    def forward(self, z):
        _, h = self.gru(z)
        h = h.squeeze(0)
        return self.mu_head(h), self.logvar_head(h).clamp(LOGVAR_MIN, LOGVAR_MAX)


class TemporalDecoder(nn.Module):
    """Unrolls an embedding into a latent series, feeding back its own outputs."""

    def __init__(self, latent_dim, embed_dim, hidden=512, num_categories=0):
        super().__init__()
        self.init_proj = nn.Linear(embed_dim + num_categories, hidden)
        self.cell = nn.GRUCell(latent_dim, hidden)
        self.out = nn.Linear(hidden, latent_dim)
        self.latent_dim = latent_dim

    def forward(self, e, steps):
        if steps <= 0:
            raise ValueError(f"sequence length must be positive, got {steps}")
        h = torch.tanh(self.init_proj(e))
        x = e.new_zeros(e.shape[0], self.latent_dim)
        series = []
        for _ in range(steps):
            h = self.cell(x, h)
            x = self.out(h)
            series.append(x)
        return torch.stack(series, dim=1)


class TemporalVAE(nn.Module):
    """Encoder/decoder pair over latent grain trajectories."""

    def __init__(self, latent_dim, embed_dim, hidden=512, num_categories=0):
        super().__init__()
        self.encoder = TemporalEncoder(latent_dim, embed_dim, hidden)
        self.decoder = TemporalDecoder(latent_dim, embed_dim, hidden, num_categories)
        self.latent_dim = latent_dim
        self.embed_dim = embed_dim
        self.num_categories = num_categories

    def _as_batch(self, x, ndim):
        t = torch.as_tensor(np.asarray(x)) if not isinstance(x, torch.Tensor) else x
        if t.dtype not in (torch.float32, torch.float64):
            t = t.to(torch.float32)
        t = t.to(next(self.parameters()).dtype)
        return (t.unsqueeze(0), True) if t.dim() == ndim - 1 else (t, False)

    def embed_sequence(self, z):
        """Latent series (g, d_z) or (B, g, d_z) -> (mu_e, sigma_e)."""
        t, squeezed = self._as_batch(z, 3)
        if t.dim() != 3 or t.shape[-1] != self.latent_dim:
            raise ValueError(
                f"expected latent series (batch, g, {self.latent_dim}), got {tuple(t.shape)}"
            )
        mu, logvar = self.encoder(t)
        sigma = torch.exp(0.5 * logvar)
        if squeezed:
            mu, sigma = mu.squeeze(0), sigma.squeeze(0)
        return GaussianParams(mu=mu, sigma=sigma)

    def decode_sequence(self, e, steps, condition_vec=None):
        """Embedding (d_e,) or (B, d_e) -> latent series (g, d_z) / (B, g, d_z).

        condition_vec, when the model was built conditional, is a one-hot
        (or batch of one-hots) concatenated before the initial-state map.
        """
        if isinstance(e, SequenceEmbedding):
            e = e.e
        t, squeezed = self._as_batch(e, 2)
        if t.dim() != 2 or t.shape[-1] != self.embed_dim:
            raise ValueError(f"expected embedding of dim {self.embed_dim}, got {tuple(t.shape)}")
        if self.num_categories:
            if condition_vec is None:
                raise ValueError("conditional temporal model requires a condition")
            cv = torch.as_tensor(condition_vec, dtype=t.dtype)
            if cv.dim() == 1:
                cv = cv.unsqueeze(0).expand(t.shape[0], -1)
            t = torch.cat([t, cv], dim=-1)
        elif condition_vec is not None:
            raise ValueError("temporal model is unconditional; no condition accepted")
        series = self.decoder(t, int(steps))
        return series.squeeze(0) if squeezed else series


def sample_prior(embed_dim, seed):
    """Standard normal embedding, deterministic in the seed."""
    gen = torch.Generator().manual_seed(int(seed))
    return torch.randn(int(embed_dim), generator=gen)
