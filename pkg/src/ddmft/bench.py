"""Timing and operation-count sweeps over frame count, image size, workers and budget.

Cells run one after another. Wall-clock totals are medians over the
repetitions after the warmup runs; operation counters are exact and do not
vary between repetitions.
"""
import csv
import itertools
import logging
import statistics
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import PlanningError
from .io import RawStackSource
from .scheduler import DEFAULT_WORKERS, PHASES, analyze, default_memory_limit
from .synth import SynthConfig, generate, write_synth

log = logging.getLogger(__name__)

COLUMNS = [
    "algorithm", "N", "width", "height", "workers", "budget_bytes", "groups_or_passes",
    "seconds_total", "seconds_disk", "seconds_step1", "seconds_step2", "seconds_merge",
    "count_spatial_ffts", "count_temporal_ffts", "count_pairs", "status",
]


@dataclass
class SweepSpec:
    n_values: list
    sizes: list
    algorithms: list = field(default_factory=lambda: ["with_ft", "without_ft"])
    workers: list = field(default_factory=lambda: [DEFAULT_WORKERS])
    budgets: list = field(default_factory=lambda: [None])
    repetitions: int = 3
    warmup: int = 1
    particles: int = 50
    diffusion: float = 0.5
    seed: int = 0
    precision: str = "f64"

    def validate(self):
        for name in ("n_values", "sizes", "algorithms", "workers", "budgets"):
            if not getattr(self, name):
                raise ValueError(f"sweep axis {name} is empty")
        for v in itertools.chain(self.n_values, self.sizes, self.workers):
            if v < 1:
                raise ValueError("sweep axis values must be positive")
        if any(b is not None and b < 1 for b in self.budgets):
            raise ValueError("budgets must be positive")
        if self.repetitions < 1 or self.warmup < 0:
            raise ValueError("repetitions must be >= 1 and warmup >= 0")


def _run_cell(source, algorithm, workers, budget, spec, work_dir):
    runs = []
    for i in range(spec.warmup + spec.repetitions):
        archive, timing = analyze(source, algorithm=algorithm, memory_limit=budget,
                                  workers=workers, precision=spec.precision,
                                  out_dir=work_dir / f"{algorithm}-{i}")
        if i >= spec.warmup:
            runs.append((archive, timing))
    archive, timing = runs[0]
    row = {
        "groups_or_passes": archive.timing["groups_or_passes"],
        "seconds_total": statistics.median(t.total for _, t in runs),
        "count_spatial_ffts": timing.counts.get("spatial_ffts", 0),
        "count_temporal_ffts": timing.counts.get("temporal_ffts", 0),
        "count_pairs": timing.counts.get("pairs", 0),
        "status": "ok",
    }
    for phase in ("disk", "step1", "step2", "merge"):
        row[f"seconds_{phase}"] = statistics.median(t.seconds[phase] for _, t in runs)
    return row


def sweep(spec, stack_source=None, work_dir=None):
    """Measure every cell of the sweep; returns a list of row dicts.

    ``stack_source(n, size)`` may supply the stacks; by default a synthetic
    Brownian stack is written as raw_stack and read back from disk.
    """
    spec.validate()
    rows = []
    with tempfile.TemporaryDirectory(prefix="ddmft-bench-", dir=work_dir) as tmp:
        tmp = Path(tmp)
        for n, size in itertools.product(spec.n_values, spec.sizes):
            if stack_source is not None:
                source = stack_source(n, size)
            else:
                config = SynthConfig(particles=spec.particles, diffusion=spec.diffusion,
                                     width=size, height=size, frames=n, seed=spec.seed)
                path = write_synth(config, tmp / f"stack-{n}-{size}", generate(config))
                source = RawStackSource(path)
            for algorithm, workers, budget in itertools.product(
                    spec.algorithms, spec.workers, spec.budgets):
                bytes_ = default_memory_limit() if budget is None else int(budget)
                base = {"algorithm": algorithm, "N": n, "width": source.width,
                        "height": source.height, "workers": workers, "budget_bytes": bytes_}
                log.info("cell %s", base)
                try:
                    cell = _run_cell(source, algorithm, workers, bytes_, spec,
                                     tmp / f"out-{n}-{size}-{workers}-{bytes_}")
                except (PlanningError, MemoryError) as exc:
                    cell = {"status": f"failed: {exc}"}
                rows.append({**dict.fromkeys(COLUMNS, ""), **base, **cell})
    return rows


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in COLUMNS})


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def crossover(rows):
    """Smallest N per image size at which with_ft is faster than without_ft.

    Returns ``{(width, height): N or None}``.
    """
    totals = {}
    for row in rows:
        if row.get("status", "ok") != "ok":
            continue
        key = (int(row["width"]), int(row["height"]))
        totals.setdefault(key, {}).setdefault(int(row["N"]), {})[row["algorithm"]] = \
            float(row["seconds_total"])
    result = {}
    for key, by_n in totals.items():
        result[key] = None
        for n in sorted(by_n):
            cell = by_n[n]
            if "with_ft" in cell and "without_ft" in cell and cell["with_ft"] < cell["without_ft"]:
                result[key] = n
                break
    return result


def phase_fractions(row):
    """Phase seconds divided by the total; the remainder is booked as ``other``."""
    total = float(row["seconds_total"])
    if total <= 0:
        return dict.fromkeys(PHASES, 0.0)
    out = {p: float(row[f"seconds_{p}"]) / total for p in ("disk", "step1", "step2", "merge")}
    out["other"] = max(0.0, 1.0 - sum(out.values()))
    return out
