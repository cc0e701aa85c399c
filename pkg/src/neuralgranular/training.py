"""Optimization loops for the grain VAE and its temporal stage, plus evaluation.

The reconstruction objective is the multi-scale spectral loss between the
decoded overlap-add waveform and the contiguous audio segment the grains were
sliced from, weighted against the per-grain KL term through a warm-up
schedule: beta stays at zero for a few epochs, then ramps linearly to its
target so the model first learns to reconstruct before the prior pulls on
the latents.
"""

import copy
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from .checkpoint import (
    Checkpoint,
    build_temporal,
    load_checkpoint,
    load_training_state,
    save_checkpoint,
)
from .corpus import CorpusManifest, iter_split_sequences, sample_batch
from .dsp import hann_window, stitch_target
from .model import GrainVAE, build_model, kl_divergence, reparameterize


@dataclass
class TrainConfig:
    batch_size: int = 40
    learning_rate: float = 2e-4
    beta_target: float = 1e-4
    warmup_start_epoch: int = 0
    warmup_ramp_epochs: int = 0
    total_epochs: int = 1
    steps_per_epoch: int = 100
    seed: int = 0
    grad_clip: float = 5.0
    checkpoint_every: int = 0  # epochs between periodic saves; 0 = final only
    grad_norm_every: int = 0  # steps between per-term gradient-norm diagnostics; 0 = off

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.beta_target < 0:
            raise ValueError("beta_target must be >= 0")
        if self.warmup_start_epoch < 0 or self.warmup_ramp_epochs < 0:
            raise ValueError("warm-up epochs must be >= 0")
        if self.total_epochs < 0:
            raise ValueError("total_epochs must be >= 0")
        if self.steps_per_epoch < 1:
            raise ValueError("steps_per_epoch must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def beta_schedule(epoch, config):
    """KL weight at a given epoch: 0, then a linear ramp, then the target."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    start = config.warmup_start_epoch
    ramp = config.warmup_ramp_epochs
    if epoch < start:
        return 0.0
    if ramp == 0 or epoch >= start + ramp:
        return float(config.beta_target)
    return float(config.beta_target) * (epoch - start) / ramp


def batch_tensors(batch, model):
    """Stack a sampled batch into model inputs.

    Returns (grains (B, g, d_x), targets (B, T), condition one-hots or None).
    Targets are the contiguous source segments rebuilt from the overlapping
    slices, matching the decoder's overlap-add output length exactly.
    """
    sequences, labels = batch
    dtype = next(model.parameters()).dtype
    grains = torch.stack(
        [torch.as_tensor(seq.grains, dtype=dtype) for seq in sequences]
    )
    targets = stitch_target(grains, model.config.grain.hop)
    cond = None
    if model.config.conditional:
        labels = np.asarray(labels)
        if (labels < 0).any():
            raise ValueError(
                "conditional model requires labels on every training sequence"
            )
        cond = torch.zeros(len(sequences), model.config.num_categories, dtype=dtype)
        cond[torch.arange(len(sequences)), torch.as_tensor(labels, dtype=torch.long)] = 1.0
    return grains, targets, cond


def _loss_terms(model, grains, targets, cond, generator):
    from .dsp import multiscale_spectral_loss

    params = model.encode(grains)
    z = reparameterize(params, generator=generator)
    wave = model.decode(z, condition=cond, generator=generator)
    rec = multiscale_spectral_loss(wave, targets, model.config.loss)
    kl = kl_divergence(params)
    return rec, kl


def _grad_norm(model, loss):
    model.zero_grad(set_to_none=True)
    loss.backward(retain_graph=True)
    total = 0.0
    for p in model.parameters():
        if p.grad is not None:
            total += float(p.grad.detach().pow(2).sum())
    model.zero_grad(set_to_none=True)
    return total ** 0.5


def train_step(batch, beta, model, optimizer, generator=None, grad_clip=5.0,
               grad_norms=False):
    """One optimizer update; returns the loss breakdown.

    With beta = 0 the KL term is still reported but kept out of the graph, so
    the update is identical to optimizing the reconstruction alone. A
    non-finite loss skips the update and flags the step instead of corrupting
    the weights.
    """
    model.train()
    grains, targets, cond = batch if isinstance(batch, tuple) and torch.is_tensor(
        batch[0]
    ) else batch_tensors(batch, model)
    try:
        rec, kl = _loss_terms(model, grains, targets, cond, generator)
    except ValueError:
        # exploded weights make the posterior invalid before any loss exists;
        # anything else is caller error and propagates
        weights_finite = all(bool(torch.isfinite(p).all()) for p in model.parameters())
        if weights_finite:
            raise
        optimizer.zero_grad(set_to_none=True)
        return {
            "reconstruction": float("nan"),
            "kl": float("nan"),
            "total": float("nan"),
            "skipped": True,
            "diagnostics": {
                "weights_finite": False,
                "grains_finite": bool(torch.isfinite(grains).all()),
            },
        }
    total = rec + beta * kl if beta != 0 else rec
    out = {
        "reconstruction": float(rec.detach()),
        "kl": float(kl.detach()),
        "total": float(rec.detach()) + beta * float(kl.detach()),
        "skipped": False,
    }
    if not torch.isfinite(total):
        optimizer.zero_grad(set_to_none=True)
        out["skipped"] = True
        out["diagnostics"] = {
            "reconstruction_finite": bool(torch.isfinite(rec)),
            "kl_finite": bool(torch.isfinite(kl)),
            "grains_finite": bool(torch.isfinite(grains).all()),
        }
        return out
    if grad_norms:
        out["rec_grad_norm"] = _grad_norm(model, rec)
        out["kl_grad_norm"] = _grad_norm(model, kl)
    optimizer.zero_grad(set_to_none=True)
    total.backward()
    if grad_clip:
        torch.nn.utils.clip_grad_norm_(model.parameters(), grad_clip)
    optimizer.step()
    return out


def _batch_seed(seed, step):
    # decorrelate batch draws across steps while staying reproducible
    return (seed * 1_000_003 + step) % (2**31 - 1)


class _StepLogger:
    def __init__(self, path, append):
        self.path = Path(path)
        self._fh = open(self.path, "a" if append else "w")

    def write(self, record):
        self._fh.write(json.dumps(record) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()


def train(manifest, train_config, model_config=None, out_dir=None, resume=False):
    """Fit the grain VAE on a corpus; returns the final Checkpoint.

    Writes periodic and final checkpoints plus a JSON-lines log (one record
    per step: step, epoch, beta, rec, kl, total, wall_ms) under out_dir.
    With resume=True the optimizer state, step counter, and RNG streams are
    restored from out_dir so the loss curve continues across the boundary.
    """
    if out_dir is None:
        raise ValueError("out_dir is required")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = train_config

    state = load_training_state(out_dir) if resume else None
    if state is not None:
        ckpt = load_checkpoint(out_dir)
        model = ckpt.model
        temporal = ckpt.temporal
        cfg = TrainConfig.from_dict(state["train_config"])
        if train_config.total_epochs != cfg.total_epochs:
            cfg = TrainConfig.from_dict(
                {**state["train_config"], "total_epochs": train_config.total_epochs}
            )
    else:
        if model_config is None:
            raise ValueError("model_config is required for a fresh run")
        torch.manual_seed(cfg.seed)
        model = build_model(model_config)
        temporal = None
    model.train()

    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    generator = torch.Generator()
    generator.manual_seed(cfg.seed + 1)
    global_step, start_epoch = 0, 0
    if state is not None:
        optimizer.load_state_dict(state["optimizer"])
        generator.set_state(state["generator"])
        global_step = state["global_step"]
        start_epoch = state["epoch"]

    def snapshot(epoch):
        return {
            "train_config": cfg.to_dict(),
            "optimizer": optimizer.state_dict(),
            "generator": generator.get_state(),
            "global_step": global_step,
            "epoch": epoch,
        }

    log = _StepLogger(out_dir / "train_log.jsonl", append=state is not None)
    try:
        for epoch in range(start_epoch, cfg.total_epochs):
            beta = beta_schedule(epoch, cfg)
            for _ in range(cfg.steps_per_epoch):
                batch = sample_batch(
                    manifest, cfg.batch_size, seed=_batch_seed(cfg.seed, global_step)
                )
                want_norms = cfg.grad_norm_every and global_step % cfg.grad_norm_every == 0
                t0 = time.perf_counter()
                step_out = train_step(
                    batch, beta, model, optimizer,
                    generator=generator, grad_clip=cfg.grad_clip,
                    grad_norms=bool(want_norms),
                )
                wall_ms = (time.perf_counter() - t0) * 1000.0
                def _finite(v):
                    return v if np.isfinite(v) else None

                record = {
                    "step": global_step,
                    "epoch": epoch,
                    "beta": beta,
                    "rec": _finite(step_out["reconstruction"]),
                    "kl": _finite(step_out["kl"]),
                    "total": _finite(step_out["total"]),
                    "wall_ms": wall_ms,
                }
                if step_out["skipped"]:
                    record["skipped"] = True
                    record["diagnostics"] = step_out["diagnostics"]
                if "rec_grad_norm" in step_out:
                    record["rec_grad_norm"] = step_out["rec_grad_norm"]
                    record["kl_grad_norm"] = step_out["kl_grad_norm"]
                log.write(record)
                global_step += 1
            if cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
                save_checkpoint(out_dir, model, temporal=temporal,
                                training_state=snapshot(epoch + 1))
    finally:
        log.close()
    save_checkpoint(out_dir, model, temporal=temporal,
                    training_state=snapshot(cfg.total_epochs))
    model.eval()
    return Checkpoint(config=model.config, model=model, temporal=temporal, path=out_dir)


def train_temporal(manifest, checkpoint, train_config, out_dir=None):
    """Second stage: fit the sequence embedding on the frozen grain encoder.

    Targets are the grain encoder's posterior means over sampled sequences;
    the temporal VAE minimizes their MSE reconstruction plus a beta-weighted
    KL on the embedding. Returns the updated Checkpoint with the temporal
    weights attached.
    """
    cfg = train_config
    model = checkpoint.model
    model.eval()
    out_dir = Path(out_dir) if out_dir is not None else checkpoint.path
    if out_dir is None:
        raise ValueError("out_dir is required when the checkpoint has no path")

    torch.manual_seed(cfg.seed + 2)
    temporal = checkpoint.temporal or build_temporal(model.config)
    temporal.train()
    optimizer = torch.optim.Adam(temporal.parameters(), lr=cfg.learning_rate)
    generator = torch.Generator()
    generator.manual_seed(cfg.seed + 3)

    log = _StepLogger(Path(out_dir) / "temporal_log.jsonl", append=False)
    global_step = 0
    try:
        for epoch in range(cfg.total_epochs):
            beta = beta_schedule(epoch, cfg)
            for _ in range(cfg.steps_per_epoch):
                batch = sample_batch(
                    manifest, cfg.batch_size,
                    seed=_batch_seed(cfg.seed + 17, global_step),
                )
                grains, _, cond = batch_tensors(batch, model)
                with torch.no_grad():
                    mu = model.encode(grains).mu
                t0 = time.perf_counter()
                params = temporal.embed_sequence(mu)
                e = reparameterize(params, generator=generator)
                cond_vec = cond if model.config.conditional else None
                decoded = temporal.decode_sequence(e, steps=mu.shape[1],
                                                   condition_vec=cond_vec)
                rec = torch.mean((decoded - mu) ** 2)
                kl = kl_divergence(params)
                total = rec + beta * kl if beta != 0 else rec
                record = {
                    "step": global_step,
                    "epoch": epoch,
                    "beta": beta,
                    "rec": float(rec.detach()),
                    "kl": float(kl.detach()),
                    "total": float(rec.detach()) + beta * float(kl.detach()),
                }
                if torch.isfinite(total):
                    optimizer.zero_grad(set_to_none=True)
                    total.backward()
                    if cfg.grad_clip:
                        torch.nn.utils.clip_grad_norm_(temporal.parameters(), cfg.grad_clip)
                    optimizer.step()
                else:
                    record["skipped"] = True
                record["wall_ms"] = (time.perf_counter() - t0) * 1000.0
                log.write(record)
                global_step += 1
    finally:
        log.close()
    temporal.eval()
    state = load_training_state(out_dir)
    save_checkpoint(out_dir, model, temporal=temporal, training_state=state)
    return Checkpoint(config=model.config, model=model, temporal=temporal, path=out_dir)


RMSE_DEFINITION = (
    "rmse = sqrt(mean((|STFT(x)| - |STFT(x_hat)|)^2)) over all frames and bins"
)
LSD_DEFINITION = (
    "lsd = mean over frames of sqrt(mean over bins of "
    "(log10(eps + |STFT(x)|^2) - log10(eps + |STFT(x_hat)|^2))^2)"
)


@dataclass
class EvalReport:
    rmse: float
    lsd: float
    seconds_per_iteration: float
    items: list
    variant: str
    window_size: int
    hop: int
    epsilon: float
    definitions: dict = field(default_factory=lambda: {
        "rmse": RMSE_DEFINITION,
        "lsd": LSD_DEFINITION,
    })

    def __post_init__(self):
        if self.rmse < 0 or self.lsd < 0:
            raise ValueError("rmse and lsd must be >= 0")

    def to_dict(self):
        return asdict(self)


def _magnitude_spectrogram(signal, window_size, hop):
    window = hann_window(window_size, dtype=signal.dtype)
    n = signal.shape[-1]
    frames = signal[: n - (n - window_size) % hop].unfold(-1, window_size, hop)
    spec = torch.fft.rfft(frames * window, dim=-1)
    return spec.abs()


def spectrogram_metrics(x, x_hat, window_size=1024, hop=256, epsilon=5e-3):
    """(rmse, lsd) between the magnitude spectrograms of two equal-length signals."""
    x = torch.as_tensor(np.asarray(x), dtype=torch.float64)
    x_hat = torch.as_tensor(np.asarray(x_hat), dtype=torch.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"signal shapes differ: {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    if x.shape[-1] < window_size:
        raise ValueError(
            f"signals of {x.shape[-1]} samples are shorter than the {window_size} window"
        )
    mag_x = _magnitude_spectrogram(x, window_size, hop)
    mag_y = _magnitude_spectrogram(x_hat, window_size, hop)
    rmse = float(torch.sqrt(torch.mean((mag_x - mag_y) ** 2)))
    log_x = torch.log10(epsilon + mag_x**2)
    log_y = torch.log10(epsilon + mag_y**2)
    lsd = float(torch.mean(torch.sqrt(torch.mean((log_x - log_y) ** 2, dim=-1))))
    return rmse, lsd


def measure_seconds_per_iteration(model, manifest, batch_size=8, iters=3, seed=0):
    """Average wall time of a training step, measured on a throwaway copy."""
    probe = copy.deepcopy(model)
    probe.train()
    optimizer = torch.optim.Adam(probe.parameters(), lr=1e-4)
    generator = torch.Generator()
    generator.manual_seed(seed)
    batch = sample_batch(manifest, batch_size, seed=seed)
    tensors = batch_tensors(batch, probe)
    train_step(tensors, 0.0, probe, optimizer, generator=generator)  # warm-up
    t0 = time.perf_counter()
    for _ in range(iters):
        train_step(tensors, 0.0, probe, optimizer, generator=generator)
    return (time.perf_counter() - t0) / iters


def evaluate(manifest, checkpoint, split="test", window_size=1024, hop=256,
             noise_seed=0, seconds_per_iteration=None, max_items=None):
    """Reconstruction scores over a manifest split.

    Each sequence is encoded to posterior means and decoded with pinned
    noise; RMSE and LSD compare the magnitude spectrograms of input and
    reconstruction. Exact formulas ship inside the report, since reference
    definitions vary across the literature.
    """
    model = checkpoint.model if isinstance(checkpoint, Checkpoint) else checkpoint
    model.eval()
    cfg = model.config
    window_size = min(window_size, cfg.grain.sequence_samples)
    hop = min(hop, max(1, window_size // 4))
    epsilon = cfg.loss.epsilon

    items = []
    for seq in iter_split_sequences(manifest, split):
        if max_items is not None and len(items) >= max_items:
            break
        grains = torch.as_tensor(seq.grains, dtype=next(model.parameters()).dtype)
        with torch.no_grad():
            mu = model.encode(grains).mu
            cond = seq.label if cfg.conditional else None
            wave = model.decode(mu, condition=cond, noise_seed=noise_seed)
        target = stitch_target(grains, cfg.grain.hop)
        rmse, lsd = spectrogram_metrics(target, wave, window_size, hop, epsilon)
        items.append({
            "source": seq.source_id,
            "offset": seq.offset,
            "label": seq.label,
            "rmse": rmse,
            "lsd": lsd,
        })
    if not items:
        raise ValueError(f"split {split!r} has no sequences to evaluate")
    if seconds_per_iteration is None:
        seconds_per_iteration = measure_seconds_per_iteration(model, manifest)
    return EvalReport(
        rmse=float(np.mean([it["rmse"] for it in items])),
        lsd=float(np.mean([it["lsd"] for it in items])),
        seconds_per_iteration=seconds_per_iteration,
        items=items,
        variant=cfg.variant,
        window_size=window_size,
        hop=hop,
        epsilon=epsilon,
    )


def format_report_table(reports):
    """Render EvalReports as an aligned text table, one row per variant."""
    header = f"{'variant':<22}{'RMSE':>10}{'LSD':>10}{'sec/iter':>12}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.variant:<22}{r.rmse:>10.4f}{r.lsd:>10.4f}{r.seconds_per_iteration:>12.3f}"
        )
    return "\n".join(lines)
