"""Structure function from differences of spatial spectra.

The baseline engine: for each lag, average ``|S_{n-m} - S_n|**2`` over all
frame pairs, updating per-lag accumulators as frames stream in. Also holds
``direct_eq1``, which transforms every image difference and serves as the
ground truth for both engines.
"""
import tempfile
from pathlib import Path

import numpy as np
import scipy.fft

from . import kernels


def split_even(width, parts):
    """Contiguous ``(start, stop)`` ranges splitting ``range(width)`` into ``parts``."""
    parts = max(1, min(parts, width))
    edges = np.linspace(0, width, parts + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


class FifoPairwise:
    """Accumulates one chunk of lags ``a <= m <= b`` while frames arrive in order.

    Memory holds a window of ``b - a + 1`` spectra (frames ``n-b .. n-a``)
    plus the incoming one. Frames that are not yet old enough to enter the
    window wait in a delay line of ``a`` slots, which lives on disk when
    ``spill_dir`` is given.
    """

    def __init__(self, lags, width, dtype, spill_dir=None):
        lags = np.unique(np.asarray(lags, dtype=np.intp))
        if lags.size == 0 or lags[0] < 1:
            raise ValueError("chunk lags must be positive")
        self.lags = lags
        self.first = int(lags[0])
        self.span = int(lags[-1]) - self.first + 1
        self.width = width
        self.window = np.zeros((self.span, width), dtype=dtype)
        self.acc = np.zeros((lags.size, width), dtype=np.float64)
        self.count = np.zeros(lags.size, dtype=np.int64)
        self.pairs = 0
        self.frames_seen = 0
        self._spill = None
        self.delay = None
        if self.first > 1:
            shape = (self.first, width)
            if spill_dir is None:
                self.delay = np.zeros(shape, dtype=dtype)
            else:
                Path(spill_dir).mkdir(parents=True, exist_ok=True)
                self._spill = tempfile.NamedTemporaryFile(dir=spill_dir, suffix=".fifo", delete=False)
                self._spill.close()
                self.delay = np.memmap(self._spill.name, dtype=dtype, mode="w+", shape=shape)

    def push(self, spectrum, executor=None, parts=1):
        n = self.frames_seen
        if self.first > 1 and n - self.first >= 0:
            self.window[(n - self.first) % self.span] = self.delay[n % self.first]
        src = n - self.lags
        valid = src >= 0
        slots = np.where(valid, src % self.span, -1).astype(np.intp)
        if valid.any():
            ranges = split_even(self.width, parts)
            if executor is None or len(ranges) == 1:
                for q0, q1 in ranges:
                    kernels.accumulate_pairs(self.acc[:, q0:q1], self.window[:, q0:q1],
                                             spectrum[q0:q1], slots)
            else:
                futures = [executor.submit(kernels.accumulate_pairs, self.acc[:, q0:q1],
                                           self.window[:, q0:q1], spectrum[q0:q1], slots)
                           for q0, q1 in ranges]
                for f in futures:
                    f.result()
            self.count += valid
            self.pairs += int(valid.sum()) * self.width
        if self.first == 1:
            self.window[n % self.span] = spectrum
        else:
            self.delay[n % self.first] = spectrum
        self.frames_seen += 1

    def finalize(self):
        """Per-lag averages, ``len(lags) x width``."""
        self.close()
        if np.any(self.count == 0):
            raise ValueError("a lag received no pairs; lag must be smaller than the frame count")
        return self.acc / self.count[:, None]

    def close(self):
        if self._spill is not None:
            del self.delay
            self.delay = None
            Path(self._spill.name).unlink(missing_ok=True)
            self._spill = None


def _check_lags(lags, n):
    lags = [int(m) for m in lags]
    for m in lags:
        if m < 0 or m >= n:
            raise ValueError(f"lag {m} out of range for {n} frames")
    return lags


def without_ft(spectra, lags, executor=None, parts=1):
    """In-core pairwise engine.

    ``spectra`` is ``N x Q`` (frames x retained wave vectors). Returns
    ``(maps, pairs)`` with maps ``len(lags) x Q`` in the order of ``lags``.
    """
    n, width = spectra.shape
    lags = _check_lags(lags, n)
    out = np.zeros((len(lags), width), dtype=np.float64)
    positive = sorted({m for m in lags if m > 0})
    if not positive:
        return out, 0
    fifo = FifoPairwise(positive, width, spectra.dtype)
    for k in range(n):
        fifo.push(spectra[k], executor, parts)
    values = fifo.finalize()
    row = {m: i for i, m in enumerate(positive)}
    for i, m in enumerate(lags):
        if m > 0:
            out[i] = values[row[m]]
    return out, fifo.pairs


def direct_eq1(frames, lags, counter=None):
    """Transform every image difference and average its squared modulus.

    ``frames`` is ``N x H x W``. Returns float64 half-plane maps
    ``len(lags) x H x (W//2+1)``. O(N**2) transforms; for testing.
    """
    frames = np.asarray(frames, dtype=np.float64)
    n, height, width = frames.shape
    lags = _check_lags(lags, n)
    out = np.zeros((len(lags), height, width // 2 + 1))
    for i, m in enumerate(lags):
        acc = out[i]
        for k in range(m, n):
            spec = scipy.fft.rfft2(frames[k - m] - frames[k])
            acc += spec.real ** 2 + spec.imag ** 2
            if counter is not None:
                counter["spatial_ffts"] += 1
        acc /= n - m
    return out
