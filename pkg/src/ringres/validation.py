"""Input validation helpers.

Everything numeric in this library is float64; these helpers coerce and
check shapes once at the public boundaries so the numerical kernels can
assume clean inputs.
"""

import numpy as np

from .errors import NumericalError


def as_matrix(a, name="matrix"):
    """Coerce to a 2-D float64 array, rejecting anything else."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def as_vector(a, name="vector"):
    """Coerce to a 1-D float64 array."""
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    return v


def check_finite(a, what="array"):
    """Raise NumericalError if any entry is NaN or infinite."""
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"non-finite values detected in {what}")
    return a


def check_sequences(X, n_channels=None):
    """Validate a list of (T, A) time-series arrays with one shared A.

    Returns (list of float64 arrays, channel count). Sequences may have
    different lengths; each must be non-empty and finite.
    """
    if len(X) == 0:
        raise ValueError("need at least one sequence")
    out = []
    for i, seq in enumerate(X):
        s = np.asarray(seq, dtype=np.float64)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 1:
            raise ValueError(f"sequence {i} must be a non-empty (T, A) array, got shape {s.shape}")
        if n_channels is None:
            n_channels = s.shape[1]
        elif s.shape[1] != n_channels:
            raise ValueError(
                f"sequence {i} has {s.shape[1]} channels, expected {n_channels}"
            )
        check_finite(s, f"sequence {i}")
        out.append(s)
    return out, n_channels
