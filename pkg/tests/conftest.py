import numpy as np
import pytest
import torch

from neuralgranular.corpus import GrainConfig, build_manifest
from neuralgranular.wavio import save_wav

torch.set_num_threads(1)

TOY_SR = 16000
TOY_CLASSES = ["burst", "chirp", "noise", "sine"]


def synth_toy_signal(kind, seconds, sr, seed=0):
    """Small bank of deterministic test signals: sines, chirps, noise bursts."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(seconds * sr)) / sr
    if kind == "sine":
        f0 = 110.0 * 2 ** rng.uniform(0, 3)
        x = np.sin(2 * np.pi * f0 * t)
    elif kind == "chirp":
        f0, f1 = 100.0 * 2 ** rng.uniform(0, 1), 1000.0 * 2 ** rng.uniform(0, 1)
        phase = 2 * np.pi * (f0 * t + (f1 - f0) * t ** 2 / (2 * seconds))
        x = np.sin(phase)
    elif kind == "noise":
        x = rng.uniform(-1, 1, t.shape)
        # crude low-pass for a colored noise band
        x = np.convolve(x, np.ones(8) / 8, mode="same")
    elif kind == "burst":
        x = rng.uniform(-1, 1, t.shape) * np.exp(-t * 8.0)
    else:
        raise ValueError(kind)
    env = np.minimum(1.0, np.minimum(t, (seconds - t)) * 50.0)  # declick edges
    return (x * env * 0.8).astype(np.float32)


def write_toy_corpus(root, sr=TOY_SR, seconds=2.0, per_class=2, classes=TOY_CLASSES):
    """Labeled directory-per-class corpus of synthetic WAVs."""
    for ci, cls in enumerate(classes):
        d = root / cls
        d.mkdir(parents=True, exist_ok=True)
        kind = TOY_CLASSES[ci % len(TOY_CLASSES)]
        for k in range(per_class):
            x = synth_toy_signal(kind, seconds, sr, seed=ci * 17 + k)
            save_wav(str(d / f"{cls}_{k}.wav"), x, sr)
    return root


@pytest.fixture(scope="session")
def toy_corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("toycorpus")
    return write_toy_corpus(root)


@pytest.fixture(scope="session")
def toy_grain_config():
    return GrainConfig(grain_size=1024, overlap_ratio=0.75, sample_rate=TOY_SR, seq_len=8)


@pytest.fixture(scope="session")
def toy_manifest(toy_corpus_dir, toy_grain_config):
    return build_manifest(str(toy_corpus_dir), config=toy_grain_config)
