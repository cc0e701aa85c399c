"""Neural granular sound synthesis toolkit."""

from .checkpoint import Checkpoint, build_temporal, load_checkpoint, save_checkpoint
from .corpus import (
    CorpusManifest,
    GrainConfig,
    GrainSequence,
    build_manifest,
    load_manifest,
    sample_batch,
    save_manifest,
    slice_waveform,
)
from .dsp import (
    SpectralLossConfig,
    default_loss_config,
    filter_grain,
    log_magnitude,
    multiscale_spectral_loss,
    overlap_add,
    synthesis_window,
)
from .estimator import GranularSynthesizer
from .model import (
    ConditionLabel,
    GaussianParams,
    GrainVAE,
    ModelConfig,
    build_model,
    kl_divergence,
    reparameterize,
)
from .synthesis import (
    PathSpec,
    assemble_long,
    conditional_sample,
    decode_embedding,
    free_path,
    interpolate_embeddings,
    latent_points,
    render_latent_series,
    resynthesize,
)
from .temporal import SequenceEmbedding, TemporalVAE, sample_prior
from .training import (
    EvalReport,
    TrainConfig,
    beta_schedule,
    evaluate,
    format_report_table,
    spectrogram_metrics,
    train,
    train_step,
    train_temporal,
)

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "ConditionLabel",
    "CorpusManifest",
    "EvalReport",
    "GaussianParams",
    "GrainConfig",
    "GrainSequence",
    "GrainVAE",
    "GranularSynthesizer",
    "ModelConfig",
    "PathSpec",
    "SequenceEmbedding",
    "SpectralLossConfig",
    "TemporalVAE",
    "TrainConfig",
    "assemble_long",
    "beta_schedule",
    "build_manifest",
    "build_model",
    "build_temporal",
    "conditional_sample",
    "decode_embedding",
    "default_loss_config",
    "evaluate",
    "filter_grain",
    "format_report_table",
    "free_path",
    "interpolate_embeddings",
    "kl_divergence",
    "latent_points",
    "load_checkpoint",
    "load_manifest",
    "log_magnitude",
    "multiscale_spectral_loss",
    "overlap_add",
    "render_latent_series",
    "reparameterize",
    "resynthesize",
    "sample_batch",
    "sample_prior",
    "save_checkpoint",
    "save_manifest",
    "slice_waveform",
    "spectrogram_metrics",
    "synthesis_window",
    "train",
    "train_step",
    "train_temporal",
]
