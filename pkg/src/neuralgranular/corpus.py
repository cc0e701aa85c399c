"""Audio corpus handling: grain slicing, dataset manifests and batch sampling.

A corpus is a directory of WAV files, optionally organized into one
subdirectory per label category. Waveforms are cut into overlapping
fixed-size grains which are grouped into sequences of `seq_len` grains,
the unit consumed by the model.
"""

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .wavio import load_wav

NORMALIZE_PEAK = 0.9


@dataclass(frozen=True)
class GrainConfig:
    """Slicing and synthesis geometry.

    grain_size must be even; hop = grain_size * (1 - overlap_ratio) must
    be a whole number of samples. filter_size is the number of positive
    frequency bins of a real grain spectrum, grain_size // 2 + 1.
    """

    grain_size: int = 2048
    overlap_ratio: float = 0.75
    sample_rate: int = 22050
    seq_len: int = 32

    def __post_init__(self):
        if self.grain_size <= 0 or self.grain_size % 2 != 0:
            raise ValueError(f"grain_size must be a positive even integer, got {self.grain_size}")
        if not 0.0 <= self.overlap_ratio < 1.0:
            raise ValueError(f"overlap_ratio must be in [0, 1), got {self.overlap_ratio}")
        hop_f = self.grain_size * (1.0 - self.overlap_ratio)
        if abs(hop_f - round(hop_f)) > 1e-9:
            raise ValueError(
                f"hop {hop_f} is not an integer (grain_size={self.grain_size}, "
                f"overlap_ratio={self.overlap_ratio})"
            )
        if round(hop_f) < 1:
            raise ValueError("hop must be >= 1 sample")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.seq_len < 1:
            raise ValueError("seq_len must be >= 1")

    @property
    def hop(self):
        return int(round(self.grain_size * (1.0 - self.overlap_ratio)))

    @property
    def filter_size(self):
        return self.grain_size // 2 + 1

    @property
    def sequence_samples(self):
        """Waveform samples spanned by one sequence of seq_len grains."""
        return (self.seq_len - 1) * self.hop + self.grain_size

    def to_dict(self):
        return {
            "grain_size": self.grain_size,
            "overlap_ratio": self.overlap_ratio,
            "sample_rate": self.sample_rate,
            "seq_len": self.seq_len,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class GrainSequence:
    """An ordered block of seq_len grains cut from one source file."""

    grains: np.ndarray  # (seq_len, grain_size)
    label: int | None = None
    source_id: str = ""
    offset: int = 0  # sample position of the first grain in the source

    def __post_init__(self):
        self.grains = np.asarray(self.grains, dtype=np.float32)
        if self.grains.ndim != 2:
            raise ValueError(f"grains must be 2-D, got shape {self.grains.shape}")
        if not np.all(np.isfinite(self.grains)):
            raise ValueError("grains contain non-finite samples")


@dataclass
class ManifestEntry:
    path: str
    duration: int  # samples
    label: int | None = None


@dataclass
class CorpusManifest:
    entries: list
    label_schema: list
    config: GrainConfig
    split: dict = field(default_factory=lambda: {"train": [], "test": []})
    base_dir: str = "."

    def __post_init__(self):
        n_labels = len(self.label_schema)
        for e in self.entries:
            if e.label is not None and not (0 <= e.label < max(n_labels, 1)):
                raise ValueError(f"label index {e.label} out of range for schema {self.label_schema}")
        overlap = set(self.split.get("train", [])) & set(self.split.get("test", []))
        if overlap:
            raise ValueError(f"train/test splits overlap on entries {sorted(overlap)}")

    def split_entries(self, split):
        return [self.entries[i] for i in self.split[split]]

    def entry_path(self, entry):
        return os.path.normpath(os.path.join(self.base_dir, entry.path))


def _peak_normalize(audio, peak=NORMALIZE_PEAK):
    m = float(np.max(np.abs(audio))) if audio.size else 0.0
    if m > 0:
        return audio * (peak / m)
    return audio


def grain_count(n_samples, config):
    """Number of grains slicing yields, final partial grain zero-padded."""
    if n_samples < config.grain_size:
        raise ValueError("source too short: audio must span at least one grain")
    return int(np.ceil((n_samples - config.grain_size) / config.hop)) + 1


def slice_grains(audio, config, normalize=True):
    """Cut a waveform into the full (n_grains, grain_size) grain matrix.

    Grain i starts at sample i * hop; the trailing remainder shorter than
    one grain is zero-padded into the final grain.
    """
    audio = np.asarray(audio, dtype=np.float32).reshape(-1)
    n = grain_count(audio.shape[0], config)
    if normalize:
        audio = _peak_normalize(audio)
    d_x, hop = config.grain_size, config.hop
    padded_len = (n - 1) * hop + d_x
    if padded_len > audio.shape[0]:
        audio = np.pad(audio, (0, padded_len - audio.shape[0]))
    idx = np.arange(n)[:, None] * hop + np.arange(d_x)[None, :]
    return audio[idx]


def slice_waveform(audio, config, source_id="", label=None, normalize=True):
    """Slice a waveform into a list of GrainSequence of exactly seq_len grains.

    Sequences tile the grain stream in consecutive non-overlapping blocks;
    the final partial block is padded with silent grains. Sources shorter
    than one full sequence still yield one (padded) sequence.
    """
    grains = slice_grains(audio, config, normalize=normalize)
    g = config.seq_len
    n_seq = int(np.ceil(grains.shape[0] / g))
    sequences = []
    for k in range(n_seq):
        block = grains[k * g:(k + 1) * g]
        if block.shape[0] < g:
            block = np.pad(block, ((0, g - block.shape[0]), (0, 0)))
        sequences.append(
            GrainSequence(block, label=label, source_id=source_id, offset=k * g * config.hop)
        )
    return sequences


def _find_wavs(root):
    paths = []
    for dirpath, _dirnames, filenames in os.walk(root):
        for name in filenames:
            if name.lower().endswith(".wav"):
                paths.append(os.path.join(dirpath, name))
    return sorted(paths)


def _label_for(path, root, label_schema, sidecar):
    rel = os.path.relpath(path, root)
    if sidecar and rel in sidecar:
        name = sidecar[rel]
        if name not in label_schema:
            raise ValueError(f"sidecar label {name!r} not in schema {label_schema}")
        return label_schema.index(name)
    parts = rel.split(os.sep)
    if len(parts) > 1 and parts[0] in label_schema:
        return label_schema.index(parts[0])
    return None


def build_manifest(root, label_schema=None, config=None, test_fraction=0.2, split_seed=0):
    """Scan a directory tree for decodable WAV files and build a manifest.

    Labels come from the first-level subdirectory names, or from an optional
    `labels.json` sidecar mapping relative paths to category names. When
    label_schema is None it is derived from the subdirectory names that
    contain audio. Undecodable files are skipped with a warning; an empty
    corpus is an error. Entry order is lexicographic by path. The train/test
    split is a deterministic seeded shuffle.
    """
    config = config or GrainConfig()
    root = os.path.abspath(root)
    sidecar = None
    sidecar_path = os.path.join(root, "labels.json")
    if os.path.exists(sidecar_path):
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)

    paths = _find_wavs(root)
    if label_schema is None:
        subdirs = sorted(
            {os.path.relpath(p, root).split(os.sep)[0] for p in paths if os.sep in os.path.relpath(p, root)}
        )
        label_schema = subdirs
    label_schema = list(label_schema)

    entries = []
    for path in paths:
        try:
            audio, sr = load_wav(path)
        except Exception as exc:  # undecodable file
            warnings.warn(f"skipping undecodable file {path}: {exc}")
            continue
        if sr != config.sample_rate:
            warnings.warn(
                f"{path}: sample rate {sr} differs from config {config.sample_rate}; using file as-is"
            )
        entries.append(
            ManifestEntry(
                path=os.path.relpath(path, root),
                duration=int(audio.shape[0]),
                label=_label_for(path, root, label_schema, sidecar),
            )
        )
    if not entries:
        raise ValueError("empty corpus: no decodable audio files found under " + root)

    n = len(entries)
    order = np.random.default_rng(split_seed).permutation(n)
    if test_fraction > 0 and n > 1:
        n_test = min(n - 1, max(1, int(round(n * test_fraction))))
    else:
        n_test = 0
    test_idx = sorted(int(i) for i in order[:n_test])
    train_idx = sorted(int(i) for i in order[n_test:])
    return CorpusManifest(
        entries=entries,
        label_schema=label_schema,
        config=config,
        split={"train": train_idx, "test": test_idx},
        base_dir=root,
    )


def save_manifest(manifest, path):
    """Serialize a manifest to JSON, paths stored relative to the file."""
    path = os.path.abspath(path)
    out_dir = os.path.dirname(path)
    doc = {
        "config": manifest.config.to_dict(),
        "label_schema": list(manifest.label_schema),
        "entries": [
            {
                "path": os.path.relpath(manifest.entry_path(e), out_dir),
                "duration": e.duration,
                "label": e.label,
            }
            for e in manifest.entries
        ],
        "split": {k: list(v) for k, v in manifest.split.items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
    return path


def load_manifest(path):
    path = os.path.abspath(path)
    with open(path) as fh:
        doc = json.load(fh)
    entries = [
        ManifestEntry(path=e["path"], duration=e["duration"], label=e["label"])
        for e in doc["entries"]
    ]
    return CorpusManifest(
        entries=entries,
        label_schema=doc["label_schema"],
        config=GrainConfig.from_dict(doc["config"]),
        split={k: list(v) for k, v in doc["split"].items()},
        base_dir=os.path.dirname(path),
    )


class _AudioCache:
    """Peak-normalized source audio, loaded at most once per file."""

    def __init__(self):
        self._store = {}

    def get(self, path):
        key = os.path.abspath(path)
        if key not in self._store:
            audio, _sr = load_wav(key)
            self._store[key] = _peak_normalize(audio)
        return self._store[key]


_cache = _AudioCache()


def _sequence_offsets(duration, config):
    """Hop-grid offsets at which a full sequence fits (or [0] if none do)."""
    span = config.sequence_samples
    if duration < span:
        return [0]
    max_k = (duration - span) // config.hop
    return list(range(0, (int(max_k) + 1)))


def extract_sequence(audio, config, offset_grains, label=None, source_id=""):
    """Extract one sequence whose first grain starts at offset_grains * hop."""
    start = offset_grains * config.hop
    span = config.sequence_samples
    seg = audio[start:start + span]
    if seg.shape[0] < config.grain_size:
        raise ValueError("source too short: audio must span at least one grain")
    grains = slice_grains(seg, config, normalize=False)[:config.seq_len]
    if grains.shape[0] < config.seq_len:
        grains = np.pad(grains, ((0, config.seq_len - grains.shape[0]), (0, 0)))
    return GrainSequence(grains, label=label, source_id=source_id, offset=start)


def sample_batch(manifest, batch_size, seed, split="train", cache=None):
    """Draw a deterministic batch of training sequences.

    Sequences are taken at random hop-aligned offsets within the split's
    files (data augmentation). Returns (sequences, labels): a list of
    batch_size GrainSequence and an int label array using -1 for unlabeled
    entries. If batch_size exceeds the number of distinct (file, offset)
    candidates, sampling falls back to replacement with a warning.
    """
    cache = cache or _cache
    entries = manifest.split_entries(split)
    if not entries:
        raise ValueError(f"manifest has no entries in split {split!r}")
    config = manifest.config
    candidates = []
    for e in entries:
        for k in _sequence_offsets(e.duration, config):
            candidates.append((e, k))
    rng = np.random.default_rng(seed)
    if batch_size > len(candidates):
        warnings.warn(
            f"batch_size {batch_size} exceeds the {len(candidates)} available sequences; "
            "sampling with replacement"
        )
        picks = rng.integers(0, len(candidates), size=batch_size)
    else:
        picks = rng.choice(len(candidates), size=batch_size, replace=False)

    sequences = []
    labels = np.full(batch_size, -1, dtype=np.int64)
    for row, pick in enumerate(picks):
        entry, k = candidates[int(pick)]
        audio = cache.get(manifest.entry_path(entry))
        seq = extract_sequence(audio, config, k, label=entry.label, source_id=entry.path)
        sequences.append(seq)
        if entry.label is not None:
            labels[row] = entry.label
    return sequences, labels


def iter_split_sequences(manifest, split="test", cache=None):
    """Yield every sequence of a split at offset 0, for reproducible evaluation."""
    cache = cache or _cache
    for e in manifest.split_entries(split):
        audio = cache.get(manifest.entry_path(e))
        yield from slice_waveform(audio, manifest.config, source_id=e.path, label=e.label,
                                  normalize=False)
