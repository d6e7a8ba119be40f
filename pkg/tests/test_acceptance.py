"""Acceptance gate. Each test records one PASS/FAIL line, shown in the summary."""
import statistics
import time

import numpy as np
import pytest

from ddmft.analysis import azimuthal_average, estimate_diffusion, fit_all
from ddmft.bench import SweepSpec, crossover, sweep
from ddmft.scheduler import MemoryBudget, analyze, plan_with_ft, plan_without_ft
from ddmft.spectrum import cutoff_set
from ddmft.synth import SynthConfig, generate
from ddmft.temporal import correlation_term, pad_length, with_ft_sequence

from conftest import random_stack, rel_dev

GiB = 1 << 30
BIG = 1 << 28


def elementwise_dev(a, b):
    """max |a - b| / |b| per element; exact agreement required where b == 0."""
    diff = np.abs(a - b)
    scale = np.abs(b)
    if np.any(diff[scale == 0] != 0):
        return np.inf
    return float(np.max(diff[scale > 0] / scale[scale > 0], initial=0.0))


def test_three_way_equivalence(acceptance):
    combos = [(n, s) for n in (3, 16, 64, 100) for s in (1, 8, 32)]
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        n, size = combos[seed % len(combos)]
        stack = random_stack(1000 + seed, n, size, size)
        maps = {alg: analyze(stack, algorithm=alg, memory_limit=BIG)[0].maps
                for alg in ("direct", "without_ft", "with_ft")}
        for a, b in (("without_ft", "direct"), ("with_ft", "direct"),
                     ("with_ft", "without_ft")):
            worst = max(worst, elementwise_dev(maps[a], maps[b]))
    elapsed = time.perf_counter() - t0
    acceptance(1, "three-way oracle equivalence", worst <= 1e-9 and elapsed < 60,
               f"max deviation {worst:.2e} (<= 1e-9), {elapsed:.1f} s (< 60 s)")


def test_worked_scalar_case(acceptance):
    prof = with_ft_sequence([1, 2, 3])
    ok = (np.allclose(prof.d, [0, 1, 4], rtol=0, atol=1e-12)
          and np.allclose(prof.d_a, [28 / 3, 9, 10], rtol=0, atol=1e-12)
          and np.allclose(prof.corr, [14, 8, 3], rtol=0, atol=1e-12))
    acceptance(2, "worked scalar case [1,2,3]", ok,
               f"d={np.round(prof.d, 12).tolist()} d_a={np.round(prof.d_a, 12).tolist()} "
               f"corr={np.round(prof.corr, 12).tolist()}")


def test_no_circular_wraparound(acceptance):
    rng = np.random.default_rng(100)
    n = 100
    worst = 0.0
    for _ in range(10):
        seq = rng.normal(size=n) + 1j * rng.normal(size=n)
        direct = np.array([sum((seq[k + m] * np.conj(seq[k])).real for k in range(n - m))
                           for m in range(n)])
        fft = correlation_term(seq)
        worst = max(worst, float(np.max(np.abs(fft - direct)) / np.max(np.abs(direct))))
    acceptance(3, "no circular wrap-around at N=100", worst <= 1e-10,
               f"max relative deviation {worst:.2e} (<= 1e-10)")


def test_complexity_counters(acceptance):
    problems = []
    for n in (16, 32, 64):
        stack = random_stack(n, n, 8, 8)
        q = len(cutoff_set(8, 8))
        _, t = analyze(stack, algorithm="without_ft", memory_limit=BIG)
        if t.counts["pairs"] != q * n * (n - 1) // 2:
            problems.append(f"pairs N={n}: {t.counts['pairs']}")
        for budget in (BIG, 20 * n * 16):
            archive, t = analyze(stack, algorithm="with_ft", memory_limit=budget)
            if t.counts["temporal_ffts"] != 2 * q:
                problems.append(f"temporal N={n} groups={archive.timing['groups_or_passes']}")
    for n in range(1, 5000):
        ratio = pad_length(2 * n) / pad_length(n)
        if ratio not in (1, 2) or pad_length(n) < 2 * n or pad_length(n + 1) < pad_length(n):
            problems.append(f"pad_length at N={n}")
            break
    acceptance(4, "complexity counters", not problems,
               "pairs = Q N(N-1)/2, temporal = 2 per sequence, pad_length(2N)/pad_length(N) "
               "in {1,2}" if not problems else "; ".join(problems))


@pytest.mark.slow
def test_desk_scale_crossover(acceptance):
    n_values = [256, 512, 1024, 2048, 4096]
    spec = SweepSpec(n_values=n_values, sizes=[64], repetitions=3, warmup=1,
                     particles=100, seed=5)
    t0 = time.perf_counter()
    rows = sweep(spec)
    elapsed = time.perf_counter() - t0
    total = {(r["algorithm"], r["N"]): r["seconds_total"] for r in rows if r["status"] == "ok"}
    ratios = [total[("without_ft", n)] / total[("with_ft", n)] for n in n_values]
    n_star = crossover(rows)[(64, 64)]
    widening = ratios[-1] > ratios[0] and all(b > a for a, b in zip(ratios[1:], ratios[2:]))
    ok = n_star is not None and widening and elapsed < 1800
    acceptance(5, "desk-scale crossover", ok,
               f"N*={n_star}, without/with ratios "
               + ", ".join(f"{n}:{r:.2f}" for n, r in zip(n_values, ratios))
               + f", {elapsed:.0f} s")


def test_group_invariance(acceptance):
    stack = random_stack(6, 32, 16, 16)
    q = len(cutoff_set(16, 16))
    n = stack.frames
    ref = None
    worst = 0.0
    notes = []
    counters_ok = True
    for groups in (1, 2, 4):
        capacity = -(-q // groups)
        budget = BIG if groups == 1 else capacity * n * 16
        archive, t = analyze(stack, algorithm="with_ft", memory_limit=budget)
        got = archive.timing["groups_or_passes"]
        counters_ok &= got == groups and t.counts["spatial_ffts"] == n * groups
        notes.append(f"{got} groups -> {t.counts['spatial_ffts']} spatial")
        if ref is None:
            ref = archive.maps
        worst = max(worst, rel_dev(archive.maps, ref))
    for budget, passes in ((BIG, 1), (12 * q * 16, 3)):
        archive, t = analyze(stack, algorithm="without_ft", memory_limit=budget)
        got = archive.timing["groups_or_passes"]
        counters_ok &= got == passes and t.counts["spatial_ffts"] == n * passes
        notes.append(f"{got} passes")
        worst = max(worst, rel_dev(archive.maps, ref))
    acceptance(6, "group invariance", counters_ok and worst <= 1e-12,
               f"max deviation {worst:.2e} (<= 1e-12); " + ", ".join(notes))


def test_worker_invariance(acceptance):
    stack = random_stack(7, 40, 32, 32)
    ok = True
    for alg in ("with_ft", "without_ft"):
        maps = [analyze(stack, algorithm=alg, memory_limit=BIG, workers=w)[0].maps
                for w in (1, 2, 8)]
        ok &= all(m.tobytes() == maps[0].tobytes() for m in maps[1:])
    acceptance(7, "worker invariance", ok, "workers 1, 2, 8 give bitwise-identical maps"
               if ok else "maps differ between worker counts")


def test_physical_closure(acceptance):
    config = SynthConfig(particles=100, diffusion=0.5, width=64, height=64, frames=1024,
                         seed=7)
    t0 = time.perf_counter()
    stack = generate(config)
    archive, _ = analyze(stack, algorithm="with_ft", memory_limit=BIG)
    profile = azimuthal_average(archive.maps, archive.lags, cutoff_set(64, 64))
    fits = fit_all(profile, max_lag=256, q_bins=range(3, 11))
    d = estimate_diffusion(fits, 64, (3, 10))
    elapsed = time.perf_counter() - t0
    err = abs(d - config.diffusion) / config.diffusion
    acceptance(8, "physical closure", err <= 0.15 and elapsed < 300,
               f"D={d:.4f} vs {config.diffusion} ({100 * err:.1f}% <= 15%), {elapsed:.0f} s")


def test_planner_arithmetic(acceptance):
    q, n = 131584, 16384
    groups = plan_with_ft(q, n, MemoryBudget(23 * GiB, "f64")).count
    passes = plan_without_ft(n, range(n), MemoryBudget(8 * GiB, "f64"), q * 16).count
    acceptance(9, "planner arithmetic", groups == 2 and passes == 5,
               f"with_ft at 23 GiB: {groups} groups (2); without_ft at 8 GiB: {passes} passes (5)")
