"""Time the compiled kernels against the numpy fallback.

Runs each kernel on the same inputs with both backends, checks the outputs
are bitwise identical, then times the two engines end to end.

    python3 benchmarks/compare_backends.py [--frames 1024] [--size 64] [--repeat 3]
"""
import argparse
import statistics
import sys
import time

import numpy as np

from ddmft import kernels
from ddmft.scheduler import analyze
from ddmft.synth import SynthConfig, generate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def kernel_cases(frames, width, rng):
    power = rng.random((frames, width))
    window = (rng.normal(size=(frames, width)) + 1j * rng.normal(size=(frames, width)))
    current = window[0].copy()
    slots = np.arange(frames, dtype=np.intp)[::-1].copy()
    slots[::7] = -1

    def recursion():
        return kernels.averages_recursion(power)

    def pairs():
        acc = np.zeros((frames, width))
        kernels.accumulate_pairs(acc, window, current, slots)
        return acc
    return {"averages_recursion": recursion, "accumulate_pairs": pairs}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--frames", type=int, default=1024)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default {kernels.BACKEND})")
    if "compiled" not in backends:
        print("compiled extension not built; only the fallback is timed", file=sys.stderr)
    original = kernels.BACKEND

    rng = np.random.default_rng(0)
    cases = kernel_cases(args.frames, args.size * (args.size // 2 + 1) // 8, rng)
    print(f"\n{'kernel':<22}" + "".join(f"{b:>14}" for b in backends) + f"{'identical':>12}")
    for name, fn in cases.items():
        cells, outputs = [], []
        for backend in backends:
            kernels.use_backend(backend)
            outputs.append(fn())
            cells.append(best_of(fn, args.repeat)[0])
        same = all(o.tobytes() == outputs[0].tobytes() for o in outputs[1:])
        print(f"{name:<22}" + "".join(f"{t * 1e3:>12.2f}ms" for t in cells) + f"{str(same):>12}")

    config = SynthConfig(particles=50, width=args.size, height=args.size, frames=args.frames)
    stack = generate(config)
    print(f"\nengines on {args.frames} frames of {args.size}x{args.size} (median seconds)")
    print(f"{'algorithm':<22}" + "".join(f"{b:>14}" for b in backends))
    for algorithm in ("with_ft", "without_ft"):
        cells = []
        for backend in backends:
            kernels.use_backend(backend)
            cells.append(best_of(lambda: analyze(stack, algorithm=algorithm,
                                                 memory_limit=1 << 30), args.repeat)[1])
        print(f"{algorithm:<22}" + "".join(f"{t:>13.3f}s" for t in cells))
    kernels.use_backend(original)
    return 0


if __name__ == "__main__":
    sys.exit(main())
