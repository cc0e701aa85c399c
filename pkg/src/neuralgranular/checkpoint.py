"""Checkpoint directory layout.

A checkpoint is a directory holding `config.json` (the portability
contract: grain geometry, latent sizes, decoder variant, label schema and
loss settings) next to torch weight files: `model.pt` for the grain VAE,
`temporal.pt` for the sequence stage, and `training_state.pt` for resumable
optimizer/step state.
"""

import json
import os

import torch

from .model import GrainVAE, ModelConfig
from .temporal import TemporalVAE

CONFIG_FILE = "config.json"
MODEL_FILE = "model.pt"
TEMPORAL_FILE = "temporal.pt"
TRAINING_STATE_FILE = "training_state.pt"


class Checkpoint:
    def __init__(self, config, model, temporal=None, path=None):
        self.config = config
        self.model = model
        self.temporal = temporal
        self.path = path

    @property
    def has_temporal(self):
        return self.temporal is not None

    @property
    def conditional(self):
        return self.config.conditional


def build_temporal(config):
    return TemporalVAE(
        latent_dim=config.latent_dim,
        embed_dim=config.embed_dim,
        hidden=config.temporal_hidden,
        num_categories=config.num_categories,
    )


def save_checkpoint(directory, model, temporal=None, training_state=None):
    """Write config + weights (+ optional resumable training state)."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, CONFIG_FILE), "w") as fh:
        json.dump(model.config.to_dict(), fh, indent=2)
    torch.save(model.state_dict(), os.path.join(directory, MODEL_FILE))
    if temporal is not None:
        torch.save(temporal.state_dict(), os.path.join(directory, TEMPORAL_FILE))
    if training_state is not None:
        torch.save(training_state, os.path.join(directory, TRAINING_STATE_FILE))
    return directory


def load_checkpoint(directory, map_location="cpu"):
    """Rebuild models from a checkpoint directory."""
    cfg_path = os.path.join(directory, CONFIG_FILE)
    if not os.path.isfile(cfg_path):
        raise FileNotFoundError(f"not a checkpoint directory (missing {CONFIG_FILE}): {directory}")
    with open(cfg_path) as fh:
        config = ModelConfig.from_dict(json.load(fh))
    model = GrainVAE(config)
    weights = os.path.join(directory, MODEL_FILE)
    if not os.path.isfile(weights):
        raise FileNotFoundError(f"checkpoint missing weights file {MODEL_FILE}: {directory}")
    model.load_state_dict(torch.load(weights, map_location=map_location, weights_only=True))
    model.eval()
    temporal = None
    tpath = os.path.join(directory, TEMPORAL_FILE)
    if os.path.isfile(tpath):
        temporal = build_temporal(config)
        temporal.load_state_dict(torch.load(tpath, map_location=map_location, weights_only=True))
        temporal.eval()
    return Checkpoint(config=config, model=model, temporal=temporal, path=directory)


def load_training_state(directory):
    path = os.path.join(directory, TRAINING_STATE_FILE)
    if not os.path.isfile(path):
        return None
    return torch.load(path, map_location="cpu", weights_only=False)
