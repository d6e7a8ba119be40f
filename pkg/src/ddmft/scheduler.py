"""Memory-budgeted execution of the two-step pipeline.

Step 1 loads every frame and computes its half-plane spectrum; step 2 turns
the spectra into structure-function maps. When the spectra of all frames do
not fit in the budget the work is split:

* ``with_ft`` processes contiguous groups of wave vectors one after the
  other, writes each group's values to ``partials/group<k>.bin`` and merges
  them at the end;
* ``without_ft`` processes contiguous chunks of lags, one pass over the
  frames per chunk, keeping a FIFO window of spectra.

Frames are loaded and transformed once per group or pass.
"""
import collections
import contextlib
import csv
import logging
import os
import shutil
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as dio
from .errors import MergeError, PlanningError
from .pairwise import FifoPairwise, direct_eq1
from .spectrum import complex_dtype, cutoff_set, forward_spectrum
from .temporal import pad_length, with_ft_sequences

log = logging.getLogger(__name__)

ALGORITHMS = ("with_ft", "without_ft", "direct")
PHASES = ("disk", "step1", "step2", "merge", "other")
DEFAULT_WORKERS = 2


@dataclass(frozen=True)
class MemoryBudget:
    bytes: int
    precision: str = "f64"

    @property
    def bytes_per_complex(self):
        return np.dtype(complex_dtype(self.precision)).itemsize


@dataclass
class GroupPlan:
    groups: list
    capacity: int

    @property
    def count(self):
        return len(self.groups)


@dataclass
class ChunkPlan:
    capacity: int
    chunks: list

    @property
    def passes(self):
        return len(self.chunks)

    @property
    def count(self):
        return self.passes


@dataclass
class DirectPlan:
    count: int = 1


@dataclass
class TimingBreakdown:
    seconds: dict = field(default_factory=lambda: dict.fromkeys(PHASES, 0.0))
    counts: dict = field(default_factory=collections.Counter)
    total: float = 0.0

    @contextlib.contextmanager
    def phase(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] += time.perf_counter() - t0

    def finish(self, total):
        self.total = total
        booked = sum(v for k, v in self.seconds.items() if k != "other")
        self.seconds["other"] = max(0.0, total - booked)

    def fractions(self):
        if self.total <= 0:
            return dict.fromkeys(PHASES, 0.0)
        return {k: v / self.total for k, v in self.seconds.items()}

    def as_dict(self):
        return {"seconds": dict(self.seconds), "total": self.total,
                "counts": {k: int(v) for k, v in sorted(self.counts.items())}}

    def csv_rows(self):
        """``(phase, seconds, count)`` rows."""
        phase_counts = {
            "disk": self.counts.get("frames_read", 0),
            "step1": self.counts.get("spatial_ffts", 0),
            "step2": self.counts.get("temporal_ffts", 0) + self.counts.get("pairs", 0),
            "merge": self.counts.get("partials", 0),
            "other": 0,
        }
        rows = [(k, self.seconds[k], phase_counts[k]) for k in PHASES]
        rows.append(("total", self.total, 0))
        return rows


# -- planning ----------------------------------------------------------------

def plan_with_ft(n_wave, n_frames, budget, spectrum_bytes=None):
    """Split ``n_wave`` sequences into groups of at most ``K`` sequences.

    ``K = floor(bytes / (N * bytes_per_complex))``. Only the N-length
    sequences are budgeted; padded scratch is a fixed per-worker reservation.
    """
    bpc = budget.bytes_per_complex
    if spectrum_bytes is None:
        spectrum_bytes = n_wave * bpc
    minimum = spectrum_bytes + pad_length(n_frames) * bpc
    if budget.bytes < minimum:
        raise PlanningError(f"memory budget of {budget.bytes} bytes is below the minimum "
                            f"{minimum} (one spectrum plus one padded sequence)")
    capacity = budget.bytes // (n_frames * bpc)
    if capacity < 1:
        raise PlanningError(f"memory budget of {budget.bytes} bytes cannot hold one "
                            f"sequence of {n_frames} frames")
    capacity = min(capacity, max(n_wave, 1))
    groups = [(a, min(a + capacity, n_wave)) for a in range(0, n_wave, capacity)]
    return GroupPlan(groups=groups, capacity=int(capacity))


def plan_without_ft(n_frames, lags, budget, spectrum_bytes):
    """Partition the positive lags into chunks spanning at most ``C - 1`` lags.

    ``C = floor(bytes / spectrum_bytes)`` spectra fit in memory; a chunk
    ``[a, b]`` needs ``b - a + 2`` of them.
    """
    capacity = budget.bytes // spectrum_bytes
    if capacity < 2:
        raise PlanningError(f"memory budget of {budget.bytes} bytes holds {capacity} spectra "
                            f"of {spectrum_bytes} bytes; at least 2 are needed")
    positive = sorted({int(m) for m in lags if m > 0})
    for m in positive:
        if m >= n_frames:
            raise ValueError(f"lag {m} out of range for {n_frames} frames")
    chunks = []
    for m in positive:
        if chunks and m - chunks[-1][0] + 2 <= capacity:
            chunks[-1].append(m)
        else:
            chunks.append([m])
    return ChunkPlan(capacity=int(capacity), chunks=chunks)


def make_plan(algorithm, n_frames, wave_vectors, lags, budget):
    bpc = budget.bytes_per_complex
    q = len(wave_vectors)
    if algorithm == "with_ft":
        half = wave_vectors.shape[0] * wave_vectors.shape[1]
        return plan_with_ft(q, n_frames, budget, spectrum_bytes=half * bpc)
    if algorithm == "without_ft":
        return plan_without_ft(n_frames, lags, budget, spectrum_bytes=q * bpc)
    if algorithm == "direct":
        return DirectPlan()
    raise ValueError(f"unknown algorithm {algorithm!r}")


# -- lags --------------------------------------------------------------------

def resolve_lags(spec, n_frames):
    """``"all"``, ``"log"`` or an explicit list (``"1,2,10"`` or a sequence)."""
    if spec is None or spec == "all":
        return list(range(n_frames))
    if spec == "log":
        lags = []
        m = 1
        while m < n_frames:
            lags.append(m)
            m *= 2
        if n_frames > 1:
            lags.append(n_frames - 1)
        return sorted(set(lags))
    if isinstance(spec, str):
        try:
            spec = [int(tok) for tok in spec.split(",") if tok.strip()]
        except ValueError:
            raise ValueError(f"cannot parse lag list {spec!r}") from None
    lags = sorted({int(m) for m in spec})
    if not lags:
        raise ValueError("empty lag list")
    for m in lags:
        if m < 0 or m >= n_frames:
            raise ValueError(f"lag {m} out of range for {n_frames} frames")
    return lags


# -- execution ---------------------------------------------------------------

def _frame_spectra(source, indices, precision, wave_vectors, timing, executor):
    """Read frames, transform them, return their retained coefficients."""
    frames = []
    with timing.phase("disk"):
        for n in indices:
            frames.append(source.frame(n))
    timing.counts["frames_read"] += len(frames)

    def spec(frame):
        return wave_vectors.gather(forward_spectrum(frame, precision))

    with timing.phase("step1"):
        if executor is None:
            out = [spec(f) for f in frames]
        else:
            out = list(executor.map(spec, frames))
    timing.counts["spatial_ffts"] += len(frames)
    return out


def _frame_batches(n_frames, size):
    for a in range(0, n_frames, size):
        yield range(a, min(a + size, n_frames))


def _run_with_ft(source, plan, lags, wave_vectors, precision, executor, timing, out_dir,
                 batch):
    n = source.frames
    cdtype = complex_dtype(precision)
    lag_index = np.asarray(lags, dtype=np.intp)
    partials = []
    for gid, (start, stop) in enumerate(plan.groups):
        sub = wave_vectors.subset(start, stop)
        bulk = np.empty((n, stop - start), dtype=cdtype)
        for frames in _frame_batches(n, batch):
            for k, values in zip(frames, _frame_spectra(source, frames, precision, sub, timing,
                                                        executor)):
                bulk[k] = values
        with timing.phase("step2"):
            d, transforms = with_ft_sequences(bulk, executor)
        timing.counts["temporal_ffts"] += transforms
        del bulk
        with timing.phase("merge"):
            partials.append(dio.write_partial(
                gid, start, stop, lags, d[lag_index], out_dir,
                width=wave_vectors.width, height=wave_vectors.height,
                q_max=wave_vectors.q_max))
        timing.counts["partials"] += 1
    with timing.phase("merge"):
        archive = merge_partials(partials)
    return archive.maps


def _run_without_ft(source, plan, lags, wave_vectors, precision, executor, parts, timing,
                    scratch_dir, batch):
    n = source.frames
    cdtype = complex_dtype(precision)
    values = np.zeros((len(lags), len(wave_vectors)))
    row = {m: i for i, m in enumerate(lags)}
    for chunk in plan.chunks:
        if chunk[-1] - chunk[0] + 2 > plan.capacity:
            raise PlanningError(f"lag chunk {chunk[0]}..{chunk[-1]} exceeds capacity {plan.capacity}")
        fifo = FifoPairwise(chunk, len(wave_vectors), cdtype, spill_dir=scratch_dir)
        try:
            for frames in _frame_batches(n, batch):
                spectra = _frame_spectra(source, frames, precision, wave_vectors, timing,
                                         executor)
                with timing.phase("step2"):
                    for s in spectra:
                        fifo.push(s, executor, parts)
            with timing.phase("step2"):
                chunk_values = fifo.finalize()
        finally:
            fifo.close()
        timing.counts["pairs"] += fifo.pairs
        for i, m in enumerate(chunk):
            values[row[m]] = chunk_values[i]
    return wave_vectors.scatter(values)


def _run_direct(source, lags, wave_vectors, timing):
    n = source.frames
    if n > 512:
        log.warning("the direct algorithm transforms every image difference: O(N**2) with N=%d", n)
    with timing.phase("disk"):
        frames = np.stack([source.frame(k) for k in range(n)])
    timing.counts["frames_read"] += n
    with timing.phase("step2"):
        maps = direct_eq1(frames, lags, counter=timing.counts)
    return wave_vectors.scatter(wave_vectors.gather(maps))


def run(source, algorithm, plan, *, lags=None, wave_vectors=None, precision="f64",
        workers=DEFAULT_WORKERS, out_dir=None, config=None, batch=None):
    """Execute ``algorithm`` under ``plan``; returns ``(ResultArchive, TimingBreakdown)``.

    ``source`` is anything with ``frames``, ``height``, ``width``,
    ``frame_interval`` and ``frame(n)``. Final maps do not depend on the
    plan or on ``workers``.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    expected = {"with_ft": GroupPlan, "without_ft": ChunkPlan, "direct": DirectPlan}[algorithm]
    if not isinstance(plan, expected):
        raise PlanningError(f"{type(plan).__name__} cannot drive the {algorithm} algorithm")
    workers = int(workers)
    if workers < 1:
        raise ValueError("workers must be at least 1")
    n = source.frames
    lags = resolve_lags(lags, n)
    if wave_vectors is None:
        wave_vectors = cutoff_set(source.width, source.height)
    if batch is None:
        batch = max(4 * workers, 16)

    timing = TimingBreakdown()
    t0 = time.perf_counter()
    tmp = None
    if out_dir is None:
        tmp = tempfile.mkdtemp(prefix="ddmft-")
        work_dir = Path(tmp)
    else:
        work_dir = Path(out_dir)
    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        if algorithm == "with_ft":
            maps = _run_with_ft(source, plan, lags, wave_vectors, precision, executor, timing,
                                work_dir, batch)
        elif algorithm == "without_ft":
            maps = _run_without_ft(source, plan, lags, wave_vectors, precision, executor,
                                   workers, timing, work_dir / "scratch", batch)
        else:
            maps = _run_direct(source, lags, wave_vectors, timing)
    finally:
        if executor is not None:
            executor.shutdown()
        if tmp is not None:
            shutil.rmtree(tmp, ignore_errors=True)
        shutil.rmtree(work_dir / "scratch", ignore_errors=True)
    timing.finish(time.perf_counter() - t0)

    archive = dio.ResultArchive(
        lags=lags, maps=maps, width=source.width, height=source.height,
        algorithm=algorithm, precision=precision, q_max=wave_vectors.q_max,
        timing={**timing.as_dict(), "groups_or_passes": plan.count}, config=dict(config or {}))
    return archive, timing


def merge_partials(paths):
    """Scatter group files into full half-plane maps.

    The groups must cover the retained wave-vector set exactly once.
    """
    if not paths:
        raise MergeError("no partial results to merge")
    parts = [dio.read_partial(p) for p in paths]
    first = parts[0][0]
    for header, _ in parts[1:]:
        for key in ("lags", "width", "height", "q_max"):
            if header[key] != first[key]:
                raise MergeError(f"partials disagree on {key}: {header[key]!r} vs {first[key]!r}")
    wave_vectors = cutoff_set(first["width"], first["height"], first["q_max"])
    parts.sort(key=lambda p: p[0]["range"][0])
    cursor = 0
    values = np.empty((len(first["lags"]), len(wave_vectors)))
    for header, vals in parts:
        start, stop = header["range"]
        if start < cursor:
            raise MergeError(f"partial group {header['group']} range [{start}, {stop}) overlaps "
                             f"a previous group ending at {cursor}")
        if start > cursor:
            raise MergeError(f"wave vectors [{cursor}, {start}) are not covered by any partial")
        values[:, start:stop] = vals
        cursor = stop
    if cursor != len(wave_vectors):
        raise MergeError(f"wave vectors [{cursor}, {len(wave_vectors)}) are not covered by any partial")
    return dio.ResultArchive(lags=first["lags"], maps=wave_vectors.scatter(values),
                             width=first["width"], height=first["height"],
                             algorithm="with_ft", q_max=first["q_max"])


def default_memory_limit():
    """Half of the physical memory."""
    try:
        return os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES") // 2
    except (ValueError, OSError, AttributeError):
        return 4 << 30


def analyze(source, *, algorithm="with_ft", lags="all", q_max=None, memory_limit=None,
            workers=DEFAULT_WORKERS, precision="f64", out_dir=None, config=None):
    """Plan from a memory limit and run; writes results when ``out_dir`` is given."""
    if memory_limit is None:
        memory_limit = default_memory_limit()
    lags = resolve_lags(lags, source.frames)
    wave_vectors = cutoff_set(source.width, source.height, q_max)
    budget = MemoryBudget(int(memory_limit), precision)
    plan = make_plan(algorithm, source.frames, wave_vectors, lags, budget)
    log.info("%s: %d frames, %d wave vectors, %d group(s)/pass(es)", algorithm,
             source.frames, len(wave_vectors), plan.count)
    archive, timing = run(source, algorithm, plan, lags=lags, wave_vectors=wave_vectors,
                          precision=precision, workers=workers, out_dir=out_dir, config=config)
    if out_dir is not None:
        dio.write_results(archive, out_dir)
        write_timing_csv(timing, Path(out_dir) / "timing.csv")
    return archive, timing


def write_timing_csv(timing, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phase", "seconds", "count"])
        for phase, seconds, count in timing.csv_rows():
            w.writerow([phase, f"{seconds:.6f}", count])
