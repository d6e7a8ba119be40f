"""Compiled and numpy kernels must agree bit for bit."""
import numpy as np
import pytest

from ddmft import _pykernels, kernels

compiled = pytest.importorskip("ddmft._ckernels")


@pytest.mark.parametrize("shape", [(1, 1), (2, 3), (37, 11), (256, 64)])
def test_averages_recursion_bitwise(rng, shape):
    power = rng.random(shape) * 1e6
    a = compiled.averages_recursion(power)
    b = _pykernels.averages_recursion(power)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("dtype", [np.complex64, np.complex128])
def test_accumulate_pairs_bitwise(rng, dtype):
    width, span, nlags = 33, 6, 5
    window = (rng.normal(size=(span, width)) + 1j * rng.normal(size=(span, width))).astype(dtype)
    current = (rng.normal(size=width) + 1j * rng.normal(size=width)).astype(dtype)
    slots = np.array([0, -1, 5, 2, 2], dtype=np.intp)
    base = rng.random((nlags, width + 4))
    a = base.copy()
    b = base.copy()
    compiled.accumulate_pairs(a[:, 2:2 + width], window, current, slots)
    _pykernels.accumulate_pairs(b[:, 2:2 + width], window, current, slots)
    assert a.tobytes() == b.tobytes()
    assert np.array_equal(a[1], base[1])
    assert np.array_equal(a[:, :2], base[:, :2])


def test_backend_switch():
    assert "python" in kernels.available_backends()
    original = kernels.BACKEND
    try:
        kernels.use_backend("python")
        assert kernels.BACKEND == "python"
        with pytest.raises(ValueError):
            kernels.use_backend("gpu")
    finally:
        kernels.use_backend(original)


def test_engines_identical_across_backends(small_stack):
    from ddmft.scheduler import analyze

    original = kernels.BACKEND
    out = {}
    try:
        for name in kernels.available_backends():
            kernels.use_backend(name)
            out[name] = {alg: analyze(small_stack, algorithm=alg, memory_limit=1 << 24)[0].maps
                         for alg in ("with_ft", "without_ft")}
    finally:
        kernels.use_backend(original)
    for alg in ("with_ft", "without_ft"):
        assert out["compiled"][alg].tobytes() == out["python"][alg].tobytes()
