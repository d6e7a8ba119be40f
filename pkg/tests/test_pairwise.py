import collections

import numpy as np
import pytest

from conftest import random_stack, rel_dev
from ddmft.pairwise import FifoPairwise, direct_eq1, split_even, without_ft
from ddmft.spectrum import cutoff_set, forward_spectrum


def spectra_of(stack, wave_vectors=None):
    wv = wave_vectors or cutoff_set(stack.width, stack.height)
    return np.stack([wv.gather(forward_spectrum(f)) for f in stack.pixel_data]), wv


def test_identical_frames_give_zero():
    frames = np.repeat(np.arange(16, dtype=float).reshape(1, 4, 4), 6, axis=0)
    spectra = np.stack([forward_spectrum(f).ravel() for f in frames])
    maps, _ = without_ft(spectra, range(6))
    assert np.all(maps == 0)
    assert np.all(direct_eq1(frames, range(6)) == 0)


def test_scalar_images():
    spectra = np.array([[1.0], [2.0], [3.0]], dtype=complex)
    maps, pairs = without_ft(spectra, [0, 1, 2])
    np.testing.assert_array_equal(maps[:, 0], [0, 1, 4])
    assert pairs == 3
    frames = np.array([1.0, 2.0, 3.0]).reshape(3, 1, 1)
    np.testing.assert_array_equal(direct_eq1(frames, [0, 1, 2])[:, 0, 0], [0, 1, 4])


def test_direct_single_pair(rng):
    frames = rng.random((2, 5, 6))
    spec = np.fft.fft2(frames[0] - frames[1])[:, :4]
    np.testing.assert_allclose(direct_eq1(frames, [1])[0], np.abs(spec) ** 2, rtol=1e-12)


def test_without_ft_matches_direct_32_frames():
    stack = random_stack(11, 32, 8, 8)
    spectra, wv = spectra_of(stack)
    lags = list(range(32))
    maps, pairs = without_ft(spectra, lags)
    ref = wv.gather(direct_eq1(stack.pixel_data, lags))
    assert rel_dev(maps, ref) <= 1e-9
    assert pairs == len(wv) * 32 * 31 // 2


def test_without_ft_matches_direct_16_frames():
    stack = random_stack(12, 16, 8, 8)
    spectra, wv = spectra_of(stack)
    maps, _ = without_ft(spectra, range(16))
    assert rel_dev(maps, wv.gather(direct_eq1(stack.pixel_data, range(16)))) <= 1e-9


def test_lag_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        without_ft(np.zeros((4, 3), complex), [4])


def test_direct_counts_transforms(rng):
    counter = collections.Counter()
    direct_eq1(rng.random((5, 2, 2)), [1, 2], counter)
    assert counter["spatial_ffts"] == 4 + 3


@pytest.mark.parametrize("lags", [[3, 4, 5], [2, 7], [1], [5]])
@pytest.mark.parametrize("spill", [False, True])
def test_fifo_chunk_matches_in_core(rng, tmp_path, lags, spill):
    spectra = rng.normal(size=(12, 9)) + 1j * rng.normal(size=(12, 9))
    full, _ = without_ft(spectra, lags)
    fifo = FifoPairwise(lags, 9, spectra.dtype, spill_dir=tmp_path if spill else None)
    assert fifo.window.shape[0] == max(lags) - min(lags) + 1
    for s in spectra:
        fifo.push(s)
    out = fifo.finalize()
    assert out.tobytes() == full.tobytes()
    np.testing.assert_array_equal(fifo.count, [12 - m for m in lags])
    assert list(tmp_path.iterdir()) == []


def test_fifo_rejects_lag_zero():
    with pytest.raises(ValueError):
        FifoPairwise([0, 1], 3, complex)


def test_parts_do_not_change_values(rng):
    from concurrent.futures import ThreadPoolExecutor

    spectra = rng.normal(size=(20, 31)) + 1j * rng.normal(size=(20, 31))
    ref, _ = without_ft(spectra, range(20))
    with ThreadPoolExecutor(3) as ex:
        for parts in (2, 3, 8):
            maps, _ = without_ft(spectra, range(20), ex, parts)
            assert maps.tobytes() == ref.tobytes()


def test_split_even():
    assert split_even(10, 3) == [(0, 3), (3, 7), (7, 10)]
    assert split_even(2, 8) == [(0, 1), (1, 2)]
