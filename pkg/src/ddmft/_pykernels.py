"""Numpy implementations of the hot loops.

Used when the compiled extension is unavailable, and as the reference the
compiled kernels are checked against.
"""
import numpy as np


def averages_recursion(power):
    """Average-of-squares term for a block of time sequences.

    ``power[n, k]`` holds the squared modulus of frame ``n`` of sequence ``k``.
    Runs the backward recursion from the last lag to lag 0, one frame per
    step, vectorised over sequences.
    """
    power = np.ascontiguousarray(power, dtype=np.float64)
    nframes = power.shape[0]
    out = np.zeros_like(power)
    if nframes == 0:
        return out
    out[nframes - 1] = power[0] + power[nframes - 1]
    for n in range(1, nframes):
        row = nframes - n - 1
        out[row] = (n / (n + 1)) * out[row + 1] + (power[n] + power[row]) / float(n + 1)
    return out


def accumulate_pairs(acc, window, current, slots):
    """``acc[l] += |window[slots[l]] - current|**2`` for every ``slots[l] >= 0``."""
    valid = slots >= 0
    if not valid.any():
        return
    diff = window[slots[valid]].astype(np.complex128) - current.astype(np.complex128)
    acc[valid] += diff.real ** 2 + diff.imag ** 2
