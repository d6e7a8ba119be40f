"""Command line: ``ddmft {analyze,compare,synth,bench}``.

Exit codes: 0 success, 1 malformed input, 2 planning failure (memory budget
too small), 3 I/O failure, 4 ``compare`` deviation above tolerance.
"""
import argparse
import json
import logging
import re
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .analysis import azimuthal_average, fit_all, write_fits_csv, write_radial_csv
from .bench import SweepSpec, crossover, sweep, write_csv
from .errors import DDMError
from .io import open_stack, write_results
from .scheduler import ALGORITHMS, DEFAULT_WORKERS, analyze, default_memory_limit
from .spectrum import cutoff_set
from .synth import SynthConfig, write_synth

log = logging.getLogger("ddmft")

COMPARE_TOLERANCE = {"f64": 1e-9, "f32": 1e-4}
EXIT_DEVIATION = 4

_SUFFIX = {"": 1, "K": 1 << 10, "M": 1 << 20, "G": 1 << 30, "T": 1 << 40}


def parse_bytes(text):
    """``"512"``, ``"64K"``, ``"1.5G"``, ``"8GiB"`` -> bytes (binary multiples)."""
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([KMGT]?)(?:i?B)?\s*", str(text), re.IGNORECASE)
    if m is None:
        raise argparse.ArgumentTypeError(f"invalid memory size {text!r}")
    return int(float(m.group(1)) * _SUFFIX[m.group(2).upper()])


def parse_q_max(text):
    if text.lower() == "none":
        return None
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("q-max must be >= 0")
    return value


def _int_list(text):
    return [int(tok) for tok in text.split(",") if tok.strip()]


def max_relative_deviation(a, b):
    """``max |a - b| / max(1, max |b|)`` over all lags and wave vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _infer_format(path):
    return "pgm_dir" if Path(path).is_dir() else "raw_stack"


def _environment():
    return {"ddmft": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "kernel_backend": kernels.BACKEND, "python": sys.version.split()[0]}


def _resolved_config(args, **extra):
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    for k, v in cfg.items():
        if isinstance(v, Path):
            cfg[k] = str(v.resolve())
    cfg.update(extra)
    cfg["environment"] = _environment()
    return cfg


def _analyze_one(source, args, algorithm, out_dir, config):
    archive, timing = analyze(source, algorithm=algorithm, lags=args.lags, q_max=args.q_max,
                              memory_limit=args.memory_limit, workers=args.workers,
                              precision=args.precision, out_dir=out_dir, config=config)
    wave_vectors = cutoff_set(source.width, source.height, args.q_max)
    profile = azimuthal_average(archive.maps, archive.lags, wave_vectors)
    write_radial_csv(profile, Path(out_dir) / "radial.csv")
    write_fits_csv(fit_all(profile, source.frame_interval), Path(out_dir) / "fits.csv")
    return archive, timing


def cmd_analyze(args):
    args.format = args.format or _infer_format(args.input)
    source = open_stack(args.input, args.format)
    if args.algorithm == "direct" and source.frames > 512:
        print(f"warning: the direct algorithm is O(N^2) in spatial transforms "
              f"(N={source.frames}); this will be slow", file=sys.stderr)
    config = _resolved_config(args, frames=source.frames, width=source.width,
                              height=source.height)
    _, timing = _analyze_one(source, args, args.algorithm, args.out, config)
    print(f"{args.algorithm}: {source.frames} frames in {timing.total:.3f} s -> {args.out}")
    return 0


def cmd_compare(args):
    args.format = args.format or _infer_format(args.input)
    algorithms = args.algorithms.split(",")
    if len(algorithms) < 2 or any(a not in ALGORITHMS for a in algorithms):
        raise ValueError(f"--algorithms needs two or more of {', '.join(ALGORITHMS)}")
    source = open_stack(args.input, args.format)
    config = _resolved_config(args, frames=source.frames, width=source.width,
                              height=source.height)
    results = {}
    for algorithm in algorithms:
        archive, timing = _analyze_one(source, args, algorithm, args.out / algorithm, config)
        results[algorithm] = (archive, timing)
        phases = ", ".join(f"{k}={v:.3f}s" for k, v in timing.seconds.items())
        print(f"{algorithm}: total={timing.total:.3f}s ({phases})")
    reference = algorithms[0]
    tolerance = COMPARE_TOLERANCE[args.precision]
    deviations = {}
    for algorithm in algorithms[1:]:
        deviations[algorithm] = max_relative_deviation(results[algorithm][0].maps,
                                                       results[reference][0].maps)
        print(f"max relative deviation {algorithm} vs {reference}: {deviations[algorithm]:.3e}")
    worst = max(deviations.values())
    ok = worst <= tolerance
    report = {"reference": reference, "deviations": deviations, "tolerance": tolerance,
              "pass": ok, "timing": {a: t.as_dict() for a, (_, t) in results.items()},
              "config": config}
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "compare.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(("PASS" if ok else "FAIL") + f": {worst:.3e} vs tolerance {tolerance:.0e}")
    return 0 if ok else EXIT_DEVIATION


def cmd_synth(args):
    config = SynthConfig(particles=args.particles, diffusion=args.diffusion,
                         psf_sigma=args.psf_sigma, amplitude=args.amplitude,
                         background=args.background, width=args.width or args.size,
                         height=args.height or args.size, frames=args.frames, seed=args.seed,
                         frame_interval=args.frame_interval)
    path = write_synth(config, args.out)
    print(f"wrote {path}")
    return 0


def _parse_sweep(items):
    axes = {}
    for item in items or []:
        key, _, values = item.partition("=")
        key = key.strip().lower()
        if key not in ("n", "size", "workers"):
            raise ValueError(f"unknown sweep axis {key!r} (use N=, size=, workers=)")
        axes[key] = _int_list(values)
    return axes


def cmd_bench(args):
    if args.kernel_backend:
        kernels.use_backend(args.kernel_backend)
    axes = _parse_sweep(args.sweep)
    spec = SweepSpec(
        n_values=axes.get("n", [256, 512, 1024]),
        sizes=axes.get("size", _int_list(args.size)),
        algorithms=args.algorithms.split(","),
        workers=axes.get("workers", _int_list(args.workers)),
        budgets=[parse_bytes(b) for b in args.memory_limit.split(",")] if args.memory_limit
        else [None],
        repetitions=args.repetitions, warmup=args.warmup, particles=args.particles,
        seed=args.seed, precision=args.precision)
    rows = sweep(spec)
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(rows, args.out / "bench.csv")
    manifest = {"sweep": asdict(spec), "environment": _environment(),
                "crossover": {f"{w}x{h}": n for (w, h), n in crossover(rows).items()}}
    (args.out / "bench.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for row in rows:
        print(f"{row['algorithm']:>10} N={row['N']:<6} {row['width']}x{row['height']} "
              f"workers={row['workers']} total={row['seconds_total']!s:.8} {row['status']}")
    print(f"wrote {args.out / 'bench.csv'} ({len(rows)} rows)")
    return 0


def _engine_flags(p):
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--format", choices=["pgm_dir", "raw_stack"],
                   help="default: pgm_dir for directories, raw_stack otherwise")
    p.add_argument("--lags", default="all", help='"all", "log" or a list like 1,2,10')
    p.add_argument("--q-max", type=parse_q_max, default=None,
                   help="keep wave vectors with radius <= q-max (default none)")
    p.add_argument("--memory-limit", type=parse_bytes, default=None,
                   help="bytes for bulk buffers, K/M/G suffixes (default half of RAM)")
    p.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
    p.add_argument("--precision", choices=["f64", "f32"], default="f64")
    p.add_argument("--out", type=Path, required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="ddmft", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="compute structure functions of a stack")
    _engine_flags(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="with_ft")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="run two or more algorithms and compare their maps")
    _engine_flags(p)
    p.add_argument("--algorithms", default="with_ft,without_ft")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate a synthetic Brownian stack")
    p.add_argument("--particles", type=int, default=100)
    p.add_argument("--diffusion", type=float, default=0.5, help="pixel^2 per frame")
    p.add_argument("--frames", type=int, default=512)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--psf-sigma", type=float, default=1.5)
    p.add_argument("--amplitude", type=float, default=1000.0)
    p.add_argument("--background", type=float, default=100.0)
    p.add_argument("--frame-interval", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="timing sweep over frame count, size and workers")
    p.add_argument("--sweep", action="append",
                   help="axis values, e.g. N=256,512,1024 (repeatable; also size=, workers=)")
    p.add_argument("--size", default="32")
    p.add_argument("--algorithms", default="with_ft,without_ft")
    p.add_argument("--workers", default=str(DEFAULT_WORKERS))
    p.add_argument("--memory-limit", default=None, help="comma list of budgets")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--precision", choices=["f64", "f32"], default="f64")
    p.add_argument("--particles", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernel-backend", choices=kernels.available_backends())
    p.add_argument("--out", type=Path, default=Path("bench-out"))
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "memory_limit", None) is None and args.command in ("analyze", "compare"):
        args.memory_limit = default_memory_limit()
    try:
        return args.func(args)
    except DDMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
