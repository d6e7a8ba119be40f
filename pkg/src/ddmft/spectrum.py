"""Per-frame 2-D spectra in half-plane layout and the retained wave-vector set.

Spectra are unnormalised forward transforms of real frames, stored as
``H x (W//2+1)``: all vertical frequencies, non-negative horizontal ones.
Divide by ``(W*H)**2`` to compare structure functions with tools that use
the orthonormal convention.
"""
from dataclasses import dataclass

import numpy as np
import scipy.fft

PRECISIONS = {
    "f64": (np.float64, np.complex128),
    "f32": (np.float32, np.complex64),
}


def complex_dtype(precision):
    try:
        return PRECISIONS[precision][1]
    except KeyError:
        raise ValueError(f"precision must be one of {sorted(PRECISIONS)}, got {precision!r}") from None


def half_shape(width, height):
    return (height, width // 2 + 1)


def forward_spectrum(frame, precision="f64"):
    """Half-plane spectrum of one real frame. Element (0, 0) is the pixel sum."""
    real_dtype = PRECISIONS[precision][0]
    frame = np.asarray(frame, dtype=real_dtype)
    if frame.ndim != 2 or min(frame.shape) < 1:
        raise ValueError(f"frame must be a non-empty 2-D array, got shape {frame.shape}")
    if not np.all(np.isfinite(frame)):
        raise ValueError("frame contains non-finite values")
    return scipy.fft.rfft2(frame, workers=1)


def full_plane(half, width):
    """Rebuild the full ``H x W`` spectrum of a real frame from its half plane."""
    height = half.shape[0]
    full = np.empty((height, width), dtype=half.dtype)
    ncols = half.shape[1]
    full[:, :ncols] = half
    rows = (-np.arange(height)) % height
    for col in range(ncols, width):
        full[:, col] = np.conj(half[rows, width - col])
    return full


def inverse_spectrum(half, width):
    """Frame from its half-plane spectrum (includes the ``1/(W*H)`` factor)."""
    return scipy.fft.irfft2(half, s=(half.shape[0], width))


@dataclass(frozen=True)
class WaveVectorSet:
    """Retained half-plane positions, sorted row-major."""

    width: int
    height: int
    rows: np.ndarray
    cols: np.ndarray
    q_max: float | None = None

    @property
    def shape(self):
        return half_shape(self.width, self.height)

    @property
    def flat(self):
        return self.rows * self.shape[1] + self.cols

    @property
    def q_rows(self):
        return signed_rows(self.rows, self.height)

    @property
    def q_magnitudes(self):
        return np.hypot(self.q_rows, self.cols)

    def __len__(self):
        return len(self.rows)

    def subset(self, start, stop):
        """Entries ``[start, stop)`` of the set, as a set of their own."""
        return WaveVectorSet(self.width, self.height, self.rows[start:stop],
                             self.cols[start:stop], self.q_max)

    def gather(self, half):
        """Retained values of a half-plane array (leading axes preserved)."""
        half = np.asarray(half)
        return half.reshape(half.shape[:-2] + (-1,))[..., self.flat]

    def scatter(self, values, fill=0.0):
        """Place retained values back into half-plane maps."""
        values = np.asarray(values)
        out = np.full(values.shape[:-1] + (self.shape[0] * self.shape[1],), fill, dtype=values.dtype)
        out[..., self.flat] = values
        return out.reshape(values.shape[:-1] + self.shape)


def signed_rows(rows, height):
    rows = np.asarray(rows)
    return np.where(rows <= height // 2, rows, rows - height)


def cutoff_set(width, height, q_max=None):
    """Half-plane positions with ``sqrt(q_row**2 + col**2) <= q_max``.

    ``q_max=None`` keeps all ``H*(W//2+1)`` positions.
    """
    if q_max is not None and q_max < 0:
        raise ValueError("q_max must be non-negative")
    rows, cols = np.indices(half_shape(width, height))
    rows = rows.ravel()
    cols = cols.ravel()
    if q_max is not None:
        q_rows = signed_rows(rows, height)
        keep = np.hypot(q_rows, cols) <= float(q_max)
        rows = rows[keep]
        cols = cols[keep]
    return WaveVectorSet(width, height, rows.astype(np.intp), cols.astype(np.intp),
                         None if q_max is None else float(q_max))
