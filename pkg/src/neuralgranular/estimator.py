"""Scikit-learn style facade over the granular synthesis toolkit.

GranularSynthesizer bundles corpus extraction, two-stage training, latent
encoding, resynthesis, and prior sampling behind the familiar
fit/transform/predict surface, so the model slots into sklearn-style
pipelines, grid searches, and clone-based tooling. The underlying functional
modules (corpus, training, synthesis, service) remain usable on their own.
"""

import os
import tempfile

import numpy as np
import torch
from sklearn.base import BaseEstimator

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .corpus import GrainConfig, build_manifest, slice_waveform
from .model import ModelConfig
from .synthesis import conditional_sample, decode_embedding, render_latent_series, resynthesize
from .temporal import sample_prior
from .training import TrainConfig, spectrogram_metrics, train, train_temporal
from .validation import (
    check_fitted,
    check_labels,
    check_latents,
    check_seed,
    check_waveforms,
)
from .wavio import save_wav


class GranularSynthesizer(BaseEstimator):
    """Trainable neural granular synthesizer.

    fit() slices waveforms into overlapping grains, trains a grain-level VAE
    with a multi-scale spectral reconstruction loss, and (optionally) a
    sequence-level embedding over latent trajectories. transform() encodes
    audio to posterior-mean latent series; inverse_transform() renders latent
    series back to audio; predict() is the full analysis-synthesis round
    trip; sample() draws new audio from the embedding prior.

    Parameters mirror the model and training configuration; all are plain
    values so get_params/set_params/clone behave as sklearn expects.
    """

    def __init__(self, grain_size=2048, overlap_ratio=0.75, sample_rate=22050,
                 seq_len=13, latent_dim=96, embed_dim=256,
                 variant="filtering_postproc", channels=(32, 64, 128, 256),
                 fc_hidden=512, temporal_hidden=512, batch_size=40,
                 learning_rate=2e-4, beta_target=1e-4, warmup_start_epoch=0,
                 warmup_ramp_epochs=0, epochs=1, steps_per_epoch=100,
                 temporal=True, fade=None, seed=0, work_dir=None):
        self.grain_size = grain_size
        self.overlap_ratio = overlap_ratio
        self.sample_rate = sample_rate
        self.seq_len = seq_len
        self.latent_dim = latent_dim
        self.embed_dim = embed_dim
        self.variant = variant
        self.channels = channels
        self.fc_hidden = fc_hidden
        self.temporal_hidden = temporal_hidden
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta_target = beta_target
        self.warmup_start_epoch = warmup_start_epoch
        self.warmup_ramp_epochs = warmup_ramp_epochs
        self.epochs = epochs
        self.steps_per_epoch = steps_per_epoch
        self.temporal = temporal
        self.fade = fade
        self.seed = seed
        self.work_dir = work_dir

    # -- configuration plumbing ------------------------------------------

    def _grain_config(self):
        return GrainConfig(grain_size=self.grain_size,
                           overlap_ratio=self.overlap_ratio,
                           sample_rate=self.sample_rate,
                           seq_len=self.seq_len)

    def _model_config(self, label_schema):
        return ModelConfig(grain=self._grain_config(),
                           latent_dim=self.latent_dim,
                           embed_dim=self.embed_dim,
                           variant=self.variant,
                           label_schema=tuple(label_schema),
                           channels=tuple(self.channels),
                           fc_hidden=self.fc_hidden,
                           temporal_hidden=self.temporal_hidden)

    def _train_config(self):
        return TrainConfig(batch_size=self.batch_size,
                           learning_rate=self.learning_rate,
                           beta_target=self.beta_target,
                           warmup_start_epoch=self.warmup_start_epoch,
                           warmup_ramp_epochs=self.warmup_ramp_epochs,
                           total_epochs=self.epochs,
                           steps_per_epoch=self.steps_per_epoch,
                           seed=check_seed(self.seed))

    # -- fitting -----------------------------------------------------------

    def fit(self, X, y=None):
        """Train on mono waveforms at `sample_rate`.

        X: a 2-D array (rows are waveforms) or an iterable of 1-D arrays of
        possibly different lengths. y: optional per-waveform category labels
        (strings or ints); providing labels makes the decoder conditional.
        """
        waves = check_waveforms(X)
        labels = check_labels(y, len(waves))

        if self.work_dir is not None:
            workspace = str(self.work_dir)
            os.makedirs(workspace, exist_ok=True)
        else:
            self._workspace_handle = tempfile.TemporaryDirectory(prefix="granular-")
            workspace = self._workspace_handle.name
        corpus_dir = os.path.join(workspace, "corpus")
        for i, wave in enumerate(waves):
            sub = corpus_dir if labels is None else os.path.join(corpus_dir, labels[i])
            os.makedirs(sub, exist_ok=True)
            save_wav(os.path.join(sub, f"clip_{i:04d}.wav"), wave, self.sample_rate)

        manifest = build_manifest(corpus_dir, config=self._grain_config(),
                                  test_fraction=0.0,
                                  split_seed=check_seed(self.seed))
        train_cfg = self._train_config()
        checkpoint_dir = os.path.join(workspace, "checkpoint")
        ckpt = train(manifest, train_cfg,
                     model_config=self._model_config(manifest.label_schema),
                     out_dir=checkpoint_dir)
        if self.temporal:
            ckpt = train_temporal(manifest, ckpt, train_cfg)
        self._adopt(ckpt)
        return self

    def _adopt(self, checkpoint):
        self.checkpoint_ = checkpoint
        self.model_ = checkpoint.model
        self.label_schema_ = list(checkpoint.config.label_schema)
        return self

    # -- encoding / decoding ----------------------------------------------

    def transform(self, X):
        """Encode waveforms to posterior-mean latent series.

        Returns one (n_sequences, seq_len, latent_dim) float32 array per
        waveform; counts differ when input lengths differ.
        """
        check_fitted(self)
        out = []
        for wave in check_waveforms(X):
            sequences = slice_waveform(wave, self.model_.config.grain)
            grains = torch.as_tensor(np.stack([s.grains for s in sequences]))
            with torch.no_grad():
                mu = self.model_.encode(grains).mu
            out.append(mu.numpy().astype(np.float32))
        return out

    def inverse_transform(self, Z, condition=None, noise_seed=0):
        """Render latent series (as produced by transform) back to waveforms."""
        check_fitted(self)
        cfg = self.model_.config
        noise_seed = check_seed(noise_seed, name="noise_seed")
        waves = []
        for i, series in enumerate(Z):
            z = check_latents(series, seq_len=cfg.grain.seq_len,
                              latent_dim=cfg.latent_dim, name=f"Z[{i}]")
            waves.append(render_latent_series(z, self.model_,
                                              condition=condition,
                                              fade=self.fade,
                                              noise_seed=noise_seed))
        return waves

    def predict(self, X, condition=None, noise_seed=0):
        """Resynthesize waveforms through the grain space (round trip)."""
        check_fitted(self)
        noise_seed = check_seed(noise_seed, name="noise_seed")
        return [resynthesize(wave, self.model_, condition=condition,
                             fade=self.fade, noise_seed=noise_seed)
                for wave in check_waveforms(X)]

    # -- generation ----------------------------------------------------------

    def sample(self, n_samples=1, condition=None, seed=0):
        """Draw waveforms from the sequence-embedding prior.

        Consecutive samples use seed, seed+1, ... so a batch is reproducible
        from its first seed. Requires the temporal stage (temporal=True).
        """
        check_fitted(self)
        seed = check_seed(seed)
        if n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {n_samples}")
        out = []
        for k in range(n_samples):
            if condition is not None:
                out.append(conditional_sample(condition, seed + k, self.checkpoint_))
            else:
                e = sample_prior(self.model_.config.embed_dim, seed + k)
                out.append(decode_embedding(e, self.model_,
                                            self.checkpoint_.temporal,
                                            noise_seed=seed + k))
        return out

    def score(self, X, y=None):
        """Negative mean spectral RMSE of the round trip (higher is better)."""
        check_fitted(self)
        waves = check_waveforms(X)
        values = []
        for wave, rendered in zip(waves, self.predict(X)):
            target = np.zeros_like(rendered)
            target[:wave.shape[0]] = wave
            window = min(1024, target.shape[0])
            rmse, _ = spectrogram_metrics(target, rendered,
                                          window_size=window, hop=window // 4)
            values.append(rmse)
        return -float(np.mean(values))

    # -- persistence ---------------------------------------------------------

    def save(self, directory):
        """Write the fitted model as a checkpoint directory."""
        check_fitted(self)
        save_checkpoint(directory, self.model_, temporal=self.checkpoint_.temporal)
        return directory

    @classmethod
    def from_checkpoint(cls, checkpoint):
        """Build a fitted estimator from a checkpoint directory or object."""
        if not isinstance(checkpoint, Checkpoint):
            checkpoint = load_checkpoint(checkpoint)
        cfg = checkpoint.config
        est = cls(grain_size=cfg.grain.grain_size,
                  overlap_ratio=cfg.grain.overlap_ratio,
                  sample_rate=cfg.grain.sample_rate,
                  seq_len=cfg.grain.seq_len,
                  latent_dim=cfg.latent_dim,
                  embed_dim=cfg.embed_dim,
                  variant=cfg.variant,
                  channels=tuple(cfg.channels),
                  fc_hidden=cfg.fc_hidden,
                  temporal_hidden=cfg.temporal_hidden,
                  temporal=checkpoint.has_temporal)
        return est._adopt(checkpoint)
