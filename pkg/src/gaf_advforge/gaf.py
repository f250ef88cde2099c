"""Gramian Angular Summation Field encoding and diagonal inversion.

A series is min-max scaled into [0, 1], mapped to angles ``phi = arccos(x)``
and encoded as ``G[i, j] = cos(phi_i + phi_j)``.  Because ``phi`` lies in
[0, pi/2] the diagonal ``cos(2 phi) = 2 x**2 - 1`` is invertible, which is
what lets a perturbed matrix be turned back into a price series.

All arithmetic is float64.  Tensors for a candle window are laid out
channel-first as ``(4, T, T)`` in the order open, high, low, close.
"""

from typing import NamedTuple

import numpy as np

from .errors import DegenerateSeries, DomainError

CHANNELS = ("open", "high", "low", "close")
DIAG_TOL = 1e-9


class PolarSeries(NamedTuple):
    angles: np.ndarray
    radii: np.ndarray


def _as_series(series) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError(f"series must be 1-d with at least 2 values, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    return x


def normalize(series) -> np.ndarray:
    """Min-max scale ``series`` into [0, 1].

    Raises DegenerateSeries for a constant series.
    """
    x = _as_series(series)
    lo, hi = x.min(), x.max()
    if hi == lo:
        raise DegenerateSeries(f"constant series (value {lo!r}) cannot be normalized")
    return (x - lo) / (hi - lo)


def to_polar(normalized) -> PolarSeries:
    x = np.asarray(normalized, dtype=np.float64)
    if np.any(x < -1.0) or np.any(x > 1.0):
        raise DomainError("normalized values must lie in [-1, 1]")
    n = x.size
    return PolarSeries(np.arccos(x), np.arange(1, n + 1, dtype=np.float64) / n)


def encode_normalized(normalized) -> np.ndarray:
    """GASF of an already-normalized series: ``cos(phi_i + phi_j)``."""
    phi = to_polar(normalized).angles
    return np.cos(phi[:, None] + phi[None, :])


def encode_algebraic(normalized) -> np.ndarray:
    """Same matrix as :func:`encode_normalized` via the inner-product form
    ``x x^T - sqrt(1 - x^2) sqrt(1 - x^2)^T``."""
    x = np.asarray(normalized, dtype=np.float64)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    return np.outer(x, x) - np.outer(s, s)


def encode(series) -> np.ndarray:
    return encode_normalized(normalize(series))


def decode_diagonal(gaf, tol: float = DIAG_TOL) -> np.ndarray:
    """Recover the normalized series from the diagonal of a GASF matrix.

    Diagonal entries within ``tol`` outside [-1, 1] are clamped; anything
    further out raises DomainError.  Accepts a single ``(T, T)`` matrix or a
    stack ``(..., T, T)``.
    """
    g = np.asarray(gaf, dtype=np.float64)
    diag = np.diagonal(g, axis1=-2, axis2=-1)
    if np.any(np.abs(diag) > 1.0 + tol):
        raise DomainError("diagonal entries outside [-1, 1]")
    return np.sqrt((np.clip(diag, -1.0, 1.0) + 1.0) / 2.0)


def window_channels(window) -> np.ndarray:
    """``(4, T)`` array of the open/high/low/close series of a window."""
    arr = np.asarray(window, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"window must have shape (T, 4), got {arr.shape}")
    return arr.T.copy()


def normalize_window(window) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel normalization of a ``(T, 4)`` OHLC window.

    Returns the ``(4, T)`` normalized series and the ``(4, 2)`` per-channel
    (min, max) needed to map decoded series back to prices.
    """
    chans = window_channels(window)
    normed = np.empty_like(chans)
    scales = np.empty((4, 2))
    for c, name in enumerate(CHANNELS):
        try:
            normed[c] = normalize(chans[c])
        except DegenerateSeries as exc:
            raise DegenerateSeries(f"{name} channel is constant") from exc
        scales[c] = chans[c].min(), chans[c].max()
    return normed, scales


def encode_window(window) -> np.ndarray:
    """Encode a ``(T, 4)`` OHLC window as a ``(4, T, T)`` GASF tensor."""
    normed, _ = normalize_window(window)
    return encode_stack(normed)


def encode_stack(normalized) -> np.ndarray:
    """Vectorized GASF over the last axis: ``(..., T) -> (..., T, T)``."""
    x = np.asarray(normalized, dtype=np.float64)
    if np.any(x < -1.0) or np.any(x > 1.0):
        raise DomainError("normalized values must lie in [-1, 1]")
    phi = np.arccos(x)
    return np.cos(phi[..., :, None] + phi[..., None, :])


def denormalize(normalized, scales) -> np.ndarray:
    """Inverse of :func:`normalize_window`: ``(4, T)`` + ``(4, 2)`` -> ``(T, 4)``."""
    x = np.asarray(normalized, dtype=np.float64)
    s = np.asarray(scales, dtype=np.float64)
    return (s[:, :1] + x * (s[:, 1:] - s[:, :1])).T
