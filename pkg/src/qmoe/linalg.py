"""Minimal dense linear algebra and parameter initialization.

Vectors are 1-D and matrices 2-D numpy arrays. Normal operation uses
float32; float64 is selected for gradient checking, where finite
differences need the extra precision.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError, NumericalError
from .rng import Rng


def as_vector(data, dtype=np.float32) -> np.ndarray:
    v = np.asarray(data, dtype=dtype)
    if v.ndim != 1:
        raise InputError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def as_matrix(data, dtype=np.float32) -> np.ndarray:
    m = np.asarray(data, dtype=dtype)
    if m.ndim != 2:
        raise InputError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def require_finite(a: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"{what} contains non-finite entries")
    return a


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product m @ v with explicit dimension validation."""
    if m.ndim != 2 or v.ndim != 1:
        raise InputError(f"matvec expects (2-D, 1-D), got {m.ndim}-D and {v.ndim}-D")
    if m.shape[1] != v.shape[0]:
        raise InputError(f"matvec dimension mismatch: {m.shape} @ ({v.shape[0]},)")
    return m @ v


def glorot_uniform_init(rows: int, cols: int, rng: Rng, dtype=np.float32) -> np.ndarray:
    """Weight matrix with entries i.i.d. uniform on [-a, a], a = sqrt(6/(rows+cols)).

    Deterministic for a fixed rng state.
    """
    if rows < 1 or cols < 1:
        raise InputError(f"matrix dimensions must be positive, got {rows}x{cols}")
    a = np.sqrt(6.0 / (rows + cols))
    u = rng.uniform((rows, cols))
    return ((2.0 * u - 1.0) * a).astype(dtype)


def relu(v: np.ndarray) -> np.ndarray:
    return np.maximum(v, 0)


def sigmoid(v: np.ndarray) -> np.ndarray:
    """Logistic function, computed on the non-overflowing branch per sign.

    Outputs are clamped into the open interval (0, 1): beyond roughly
    |x| > 90 the true value is closer to the clamp than to 0 or 1 in the
    working precision anyway, and downstream code (pooling weights,
    cross-entropy on probabilities) may assume the open interval.
    """
    v = np.asarray(v)
    out = np.empty_like(v, dtype=v.dtype if v.dtype.kind == "f" else np.float64)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    info = np.finfo(out.dtype)
    return np.clip(out, info.tiny, 1.0 - info.epsneg)
