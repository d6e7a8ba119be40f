"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
versions in ``_pykernels`` are used. ``use_backend`` switches at runtime,
mostly for benchmarks and tests.
"""
from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

BACKEND = "compiled" if _ckernels is not None else "python"
_active = _BACKENDS[BACKEND]


def available_backends():
    return sorted(_BACKENDS)


def use_backend(name):
    """Select the kernel backend by name ("compiled" or "python")."""
    global BACKEND, _active
    if name not in _BACKENDS:
        raise ValueError(f"kernel backend {name!r} not available; have {available_backends()}")
    BACKEND = name
    _active = _BACKENDS[name]


def averages_recursion(power):
    return _active.averages_recursion(power)


def accumulate_pairs(acc, window, current, slots):
    return _active.accumulate_pairs(acc, window, current, slots)
