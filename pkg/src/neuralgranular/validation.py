"""Input validation helpers for the estimator facade.

These coerce user-facing array-likes (waveforms, latent series, labels) to the
shapes and dtypes the core expects, raising early with messages that name the
offending argument.
"""

import numpy as np
from sklearn.exceptions import NotFittedError


def check_waveform(x, name="waveform"):
    """Coerce one mono waveform to a finite 1-D float32 array."""
    arr = np.asarray(x, dtype=np.float32)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D mono audio, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return arr


def check_waveforms(X, name="X"):
    """Coerce a collection of mono waveforms to a list of float32 arrays.

    Accepts a single 1-D array, a 2-D array whose rows are waveforms, or any
    iterable of 1-D array-likes; lengths may differ between entries.
    """
    if isinstance(X, np.ndarray) and X.ndim == 1:
        X = [X]
    waves = [check_waveform(x, name=f"{name}[{i}]") for i, x in enumerate(X)]
    if not waves:
        raise ValueError(f"{name} contains no waveforms")
    return waves


def check_labels(y, n_samples, name="y"):
    """Validate per-waveform labels; returns a list of strings or None."""
    if y is None:
        return None
    labels = list(y)
    if len(labels) != n_samples:
        raise ValueError(
            f"{name} has {len(labels)} labels for {n_samples} waveforms"
        )
    for label in labels:
        if not isinstance(label, (str, int, np.integer)) or isinstance(label, bool):
            raise ValueError(
                f"{name} entries must be strings or integers, "
                f"got {type(label).__name__}"
            )
    return [str(label) for label in labels]


def check_latents(Z, seq_len=None, latent_dim=None, name="Z"):
    """Coerce one latent series to (n_sequences, seq_len, latent_dim) float32."""
    arr = np.asarray(Z, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(
            f"{name} must be a (n_sequences, seq_len, latent_dim) array, "
            f"got shape {arr.shape}"
        )
    if seq_len is not None and arr.shape[1] != seq_len:
        raise ValueError(f"{name} has {arr.shape[1]} grains per sequence, expected {seq_len}")
    if latent_dim is not None and arr.shape[2] != latent_dim:
        raise ValueError(f"{name} has latent dimension {arr.shape[2]}, expected {latent_dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_seed(seed, name="seed"):
    """Coerce a seed to a plain int; None means 0."""
    if seed is None:
        return 0
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValueError(f"{name} must be an integer, got {seed!r}")
    return int(seed)


def check_fitted(estimator, attributes=("checkpoint_",)):
    """Raise NotFittedError unless the estimator carries its fitted state."""
    missing = [a for a in attributes if not hasattr(estimator, a)]
    if missing:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() or "
            f"load a checkpoint first (missing {', '.join(missing)})"
        )
