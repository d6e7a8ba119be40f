import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddmft.spectrum import (cutoff_set, forward_spectrum, full_plane, half_shape,
                            inverse_spectrum)


def test_constant_frame():
    spec = forward_spectrum(np.full((8, 8), 3.5))
    assert spec.shape == (8, 5)
    assert spec[0, 0] == pytest.approx(64 * 3.5)
    rest = spec.copy()
    rest[0, 0] = 0
    assert np.abs(rest).max() <= 1e-12 * abs(spec[0, 0])


def test_delta_frame():
    frame = np.zeros((6, 10))
    frame[0, 0] = 1
    np.testing.assert_array_equal(forward_spectrum(frame), np.ones((6, 6), dtype=complex))


def test_dc_is_pixel_sum(rng):
    frame = rng.integers(0, 65536, size=(7, 9)).astype(float)
    assert forward_spectrum(frame)[0, 0].real == pytest.approx(frame.sum(), rel=1e-14)


@pytest.mark.parametrize("shape", [(16, 16), (7, 9), (8, 5), (1, 1)])
def test_parseval(rng, shape):
    frame = rng.random(shape)
    height, width = shape
    full = full_plane(forward_spectrum(frame), width)
    lhs = float(np.sum(frame ** 2))
    rhs = float(np.sum(np.abs(full) ** 2)) / (width * height)
    assert rhs == pytest.approx(lhs, rel=1e-10)


@pytest.mark.parametrize("shape", [(16, 16), (7, 9), (8, 5)])
def test_full_plane_matches_complex_fft(rng, shape):
    frame = rng.random(shape)
    np.testing.assert_allclose(full_plane(forward_spectrum(frame), shape[1]),
                               np.fft.fft2(frame), atol=1e-10)


def test_inverse_recovers_frame(rng):
    frame = rng.random((12, 10))
    np.testing.assert_allclose(inverse_spectrum(forward_spectrum(frame), 10), frame, atol=1e-12)


def test_linearity(rng):
    x, y = rng.random((2, 16, 16))
    a, b = 2.5, -0.75
    lhs = forward_spectrum(a * x + b * y)
    rhs = a * forward_spectrum(x) + b * forward_spectrum(y)
    assert np.abs(lhs - rhs).max() <= 1e-10 * np.abs(lhs).max()


def test_repeatable(rng):
    frame = rng.random((16, 16))
    assert forward_spectrum(frame).tobytes() == forward_spectrum(frame).tobytes()


def test_float32_precision(rng):
    spec = forward_spectrum(rng.random((8, 8)), "f32")
    assert spec.dtype == np.complex64


def test_non_finite_rejected():
    frame = np.zeros((4, 4))
    frame[1, 1] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        forward_spectrum(frame)


def test_cutoff_dc_only():
    for w, h in [(8, 8), (5, 3), (64, 32)]:
        wv = cutoff_set(w, h, 0)
        assert len(wv) == 1
        assert (wv.rows[0], wv.cols[0]) == (0, 0)


def test_cutoff_none_512():
    assert len(cutoff_set(512, 512)) == 512 * 257


def _brute_force_disc(width, height, q_max):
    found = []
    for row, col in itertools.product(range(height), range(width // 2 + 1)):
        q_row = row if row <= height // 2 else row - height
        if math.sqrt(q_row ** 2 + col ** 2) <= q_max:
            found.append((row, col))
    return found


def test_cutoff_matches_enumeration():
    expected = _brute_force_disc(8, 8, 2)
    assert len(expected) == 9
    wv = cutoff_set(8, 8, 2)
    assert list(zip(wv.rows.tolist(), wv.cols.tolist())) == expected


@given(st.integers(1, 24), st.integers(1, 24), st.floats(0, 20), st.floats(0, 20))
@settings(max_examples=60, deadline=None)
def test_cutoff_monotone_and_sorted(width, height, q1, q2):
    lo, hi = sorted((q1, q2))
    a = cutoff_set(width, height, lo)
    b = cutoff_set(width, height, hi)
    assert set(a.flat.tolist()) <= set(b.flat.tolist())
    assert np.all(np.diff(b.flat) > 0)
    assert np.all(b.rows < half_shape(width, height)[0])
    assert np.all(b.cols < half_shape(width, height)[1])
    assert len(a) == len(_brute_force_disc(width, height, lo))


def test_gather_scatter_round_trip(rng):
    wv = cutoff_set(10, 6, 3)
    maps = rng.random((2, 6, 6))
    back = wv.scatter(wv.gather(maps))
    mask = np.zeros((6, 6), bool)
    mask[wv.rows, wv.cols] = True
    np.testing.assert_array_equal(back[:, mask], maps[:, mask])
    assert np.all(back[:, ~mask] == 0)
