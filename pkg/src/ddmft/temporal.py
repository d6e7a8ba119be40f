"""Structure function of time sequences via a Fourier transform in time.

For one wave vector with amplitudes ``s_0 .. s_{N-1}``::

    d(m) = d_a(m) - 2 * corr(m) / (N - m)

    d_a(m)  = 1/(N-m) * sum_{n=m}^{N-1} (|s_{n-m}|**2 + |s_n|**2)
    corr(m) = sum_{n=m}^{N-1} Re(conj(s_{n-m}) * s_n)

``d_a`` comes from an O(N) backward recursion and ``corr`` from the power
spectrum of the sequence zero-padded to ``pad_length(N)`` points, which is
long enough that the circular correlation equals the linear one.
"""
import threading
from dataclasses import dataclass

import numpy as np
import scipy.fft

from . import kernels

#: sequences per step-2 tile; fixed so results never depend on the worker count
TILE = 256


def pad_length(n):
    """Padded length ``2**(ceil(log2 n) + 1)``; always at least ``2n``."""
    if n < 1:
        raise ValueError("sequence length must be at least 1")
    return 1 << ((int(n) - 1).bit_length() + 1)


@dataclass
class LagProfile:
    d: np.ndarray
    d_a: np.ndarray
    corr: np.ndarray


def _as_sequence(seq):
    seq = np.asarray(seq)
    if seq.ndim != 1 or seq.size < 1:
        raise ValueError("a time sequence is a non-empty 1-D array")
    seq = seq.astype(np.complex128)
    if not np.all(np.isfinite(seq)):
        raise ValueError("time sequence contains non-finite values")
    return seq


def averages_term(seq):
    """Average of squared moduli over the pairs of each lag, by recursion."""
    seq = _as_sequence(seq)
    power = (seq.real ** 2 + seq.imag ** 2)[:, None]
    return kernels.averages_recursion(power)[:, 0]


def correlation_term(seq, counter=None):
    """Unnormalised lag autocorrelation ``corr(m)``, ``m = 0 .. N-1``."""
    seq = _as_sequence(seq)
    n = seq.size
    spec = scipy.fft.fft(seq, n=pad_length(n))
    power = spec.real ** 2 + spec.imag ** 2
    corr = scipy.fft.ifft(power).real[:n]
    if counter is not None:
        counter["temporal_ffts"] += 2
    return corr


def ramp(n):
    """Pair count ``N - m`` for each lag."""
    return np.arange(n, 0, -1, dtype=np.float64)


def combine(d_a, corr, n):
    d_a = np.asarray(d_a, dtype=np.float64)
    corr = np.asarray(corr, dtype=np.float64)
    if d_a.shape[0] != n or corr.shape[0] != n:
        raise ValueError(f"expected vectors of length {n}, got {d_a.shape[0]} and {corr.shape[0]}")
    return LagProfile(d=d_a - 2.0 * corr / ramp(n), d_a=d_a, corr=corr)


def with_ft_sequence(seq, counter=None, center=False):
    """Full pipeline for one sequence.

    With ``center`` the mean is subtracted first; ``d`` is unchanged in exact
    arithmetic but the rounding error then scales with the fluctuations
    instead of the static amplitude. ``d_a`` and ``corr`` refer to the
    sequence actually transformed.
    """
    seq = _as_sequence(seq)
    if center:
        seq = seq - seq.mean()
    return combine(averages_term(seq), correlation_term(seq, counter), seq.size)


def direct_sequence_oracle(seq):
    """O(N**2) evaluation of the defining sum. For testing only."""
    seq = [complex(v) for v in np.asarray(seq).ravel()]
    n = len(seq)
    if n < 1:
        raise ValueError("a time sequence is a non-empty 1-D array")
    d = np.zeros(n)
    for m in range(n):
        total = 0.0
        for k in range(m, n):
            diff = seq[k - m] - seq[k]
            total += diff.real * diff.real + diff.imag * diff.imag
        d[m] = total / (n - m)
    return LagProfile(d=d, d_a=np.full(n, np.nan), corr=np.full(n, np.nan))


# -- batched step 2 ----------------------------------------------------------

_scratch = threading.local()


def _scratch_buffer(n2, width, dtype):
    key = (n2, np.dtype(dtype).str)
    buf = getattr(_scratch, "buf", None)
    if buf is None or getattr(_scratch, "key", None) != key or buf.shape[1] < width:
        buf = np.empty((n2, max(width, TILE)), dtype=dtype)
        _scratch.buf = buf
        _scratch.key = key
    return buf[:, :width]


def with_ft_block(block, center=True):
    """Structure function of every column of ``block`` (frames x sequences).

    Returns a float64 ``N x K`` array. The temporal transforms run in the
    block's own precision; the recursion and the final combination in
    float64. With ``center`` the per-sequence mean is removed first, which
    leaves ``d`` unchanged but avoids cancellation between ``d_a`` and
    ``corr`` when a wave vector carries a large static amplitude.
    """
    n = block.shape[0]
    if center:
        mean = block.mean(axis=0, dtype=np.complex128)
        block = (block.astype(np.complex128) - mean).astype(block.dtype)
    wide = block.astype(np.complex128)
    d_a = kernels.averages_recursion(wide.real ** 2 + wide.imag ** 2)

    scratch = _scratch_buffer(pad_length(n), block.shape[1], block.dtype)
    scratch[:n] = block
    scratch[n:] = 0
    spec = scipy.fft.fft(scratch, axis=0, overwrite_x=True, workers=1)
    power = spec.real ** 2 + spec.imag ** 2
    corr = scipy.fft.ifft(power, axis=0, workers=1).real[:n].astype(np.float64)
    d = d_a - 2.0 * corr / ramp(n)[:, None]
    d[0] = 0.0  # zero by definition; the subtraction leaves rounding residue
    return d


def with_ft_sequences(sequences, executor=None, center=True):
    """Apply ``with_ft_block`` tile by tile; returns ``(d, temporal_transforms)``."""
    n, width = sequences.shape
    out = np.empty((n, width), dtype=np.float64)
    starts = range(0, width, TILE)

    def work(start):
        stop = min(start + TILE, width)
        out[:, start:stop] = with_ft_block(sequences[:, start:stop], center=center)

    if executor is None:
        for start in starts:
            work(start)
    else:
        list(executor.map(work, starts))
    return out, 2 * width
