"""Azimuthal averaging of structure-function maps and exponential fits."""
import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .spectrum import cutoff_set

FIT_MAX_NFEV = 2000


@dataclass
class RadialProfile:
    """``mean[i, j]`` is the average of lag ``lags[i]`` over radial bin ``q_bins[j]``."""

    lags: np.ndarray
    q_bins: np.ndarray
    mean: np.ndarray
    count: np.ndarray

    def column(self, q):
        hits = np.flatnonzero(self.q_bins == q)
        if hits.size == 0:
            raise KeyError(f"no radial bin {q}")
        return self.mean[:, hits[0]]


@dataclass
class ExponentialFit:
    q_bin: int
    amplitude: float
    baseline: float
    tau: float
    residual: float
    flag: str


def radial_bins(wave_vectors):
    """Nearest-integer radius of every retained wave vector."""
    return np.floor(wave_vectors.q_magnitudes + 0.5).astype(np.intp)


def azimuthal_average(maps, lags=None, wave_vectors=None):
    """Average half-plane maps over rings of equal integer radius.

    Each stored coefficient counts once. Only the positions in
    ``wave_vectors`` contribute (all of them by default).
    """
    maps = np.asarray(maps, dtype=np.float64)
    if maps.ndim == 2:
        maps = maps[None]
    nlags, height, ncols = maps.shape
    if lags is None:
        lags = np.arange(nlags)
    if wave_vectors is None:
        # the width parity does not change the half-plane layout
        wave_vectors = cutoff_set(2 * (ncols - 1), height)
    bins = radial_bins(wave_vectors)
    values = wave_vectors.gather(maps)
    count = np.bincount(bins)
    present = np.flatnonzero(count)
    mean = np.empty((nlags, present.size))
    for i in range(nlags):
        sums = np.bincount(bins, weights=values[i], minlength=count.size)
        mean[i] = sums[present] / count[present]
    return RadialProfile(lags=np.asarray(lags), q_bins=present, mean=mean, count=count[present])


def _model(params, t):
    amplitude, baseline, tau = params
    return amplitude * (1.0 - np.exp(-t / tau)) + baseline


def fit_exponential(profile, q, frame_interval=1.0, max_lag=None):
    """Fit ``A * (1 - exp(-t / tau)) + B`` to the positive lags of one bin."""
    y = profile.column(q)
    lags = np.asarray(profile.lags)
    keep = (lags > 0) & np.isfinite(y)
    if max_lag is not None:
        keep &= lags <= max_lag
    m = lags[keep]
    y = y[keep]
    if m.size < 4:
        raise ValueError(f"bin {q}: need at least 4 positive lags with finite values, have {m.size}")
    t = m * float(frame_interval)

    b0 = 0.0 * y[0]
    a0 = float(y.max()) - b0
    target = a0 * (1.0 - math.exp(-1.0)) + b0
    tau0 = float(frame_interval) * float(m[np.argmin(np.abs(y - target))])

    scale = max(float(np.abs(y).max()), np.finfo(float).tiny)
    if float(np.ptp(y)) <= 1e-12 * scale:
        resid = float(np.linalg.norm(y - y.mean()))
        return ExponentialFit(int(q), 0.0, float(y.mean()), tau0, resid, "degenerate")

    def residuals(params):
        return (_model(params, t) - y) / scale

    result = least_squares(
        residuals, x0=[a0, b0, tau0],
        bounds=([-np.inf, -np.inf, 1e-12 * float(frame_interval)], np.inf),
        x_scale=[scale, scale, max(tau0, float(frame_interval))],
        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=FIT_MAX_NFEV)
    amplitude, baseline, tau = (float(v) for v in result.x)
    flag = "ok" if result.status > 0 else "nonconverged"
    if abs(amplitude) <= 1e-9 * max(abs(amplitude) + abs(baseline), np.finfo(float).tiny):
        flag = "degenerate"
    resid = float(np.linalg.norm(_model(result.x, t) - y))
    return ExponentialFit(int(q), amplitude, baseline, tau, resid, flag)


def fit_all(profile, frame_interval=1.0, max_lag=None, q_bins=None):
    fits = []
    for q in profile.q_bins if q_bins is None else q_bins:
        try:
            fits.append(fit_exponential(profile, q, frame_interval, max_lag))
        except ValueError:
            continue
    return fits


def estimate_diffusion(fits, width, q_range):
    """Slope of ``1/tau`` against ``q**2`` with ``q = 2 pi q_bin / width``.

    Uses the fits whose bin lies in ``q_range`` (inclusive) and are flagged ok.
    """
    lo, hi = q_range
    sel = [f for f in fits if lo <= f.q_bin <= hi and f.flag == "ok"]
    if len(sel) < 2:
        raise ValueError("need at least two good fits in the q range")
    q2 = np.array([(2 * np.pi * f.q_bin / width) ** 2 for f in sel])
    rate = np.array([1.0 / f.tau for f in sel])
    slope, _ = np.polyfit(q2, rate, 1)
    return float(slope)


def write_radial_csv(profile, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lag", "q_bin", "mean", "count"])
        for i, lag in enumerate(profile.lags):
            for j, q in enumerate(profile.q_bins):
                w.writerow([int(lag), int(q), repr(float(profile.mean[i, j])), int(profile.count[j])])


def write_fits_csv(fits, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q_bin", "A", "B", "tau_seconds", "residual", "flag"])
        for f in fits:
            w.writerow([f.q_bin, repr(f.amplitude), repr(f.baseline), repr(f.tau),
                        repr(f.residual), f.flag])
