"""Synthetic image stacks of Brownian particles with a known diffusion coefficient.

Particles start at uniform random positions and take independent Gaussian
steps of variance ``2 D`` per axis per frame on a periodic domain. Each is
drawn as a Gaussian spot truncated at 4 sigma on top of a flat background.
Random numbers come from numpy's PCG64 bit generator seeded with ``seed``;
draw order is: initial positions, then one ``(P, 2)`` block of steps per
frame after the first.
"""
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .io import ImageStack, write_raw_stack

PRNG = "numpy.random.PCG64"
MAX_COUNT = 65535


@dataclass
class SynthConfig:
    particles: int = 100
    diffusion: float = 0.5  # pixel**2 per frame
    psf_sigma: float = 1.5
    amplitude: float = 1000.0
    background: float = 100.0
    width: int = 64
    height: int = 64
    frames: int = 512
    seed: int = 0
    frame_interval: float = 1.0

    def validate(self):
        if self.particles < 0:
            raise ValueError("particles must be >= 0")
        if self.diffusion < 0:
            raise ValueError("diffusion must be >= 0")
        if self.psf_sigma <= 0:
            raise ValueError("psf_sigma must be > 0")
        if min(self.width, self.height, self.frames) < 1:
            raise ValueError("width, height and frames must be >= 1")
        if self.amplitude < 0 or self.background < 0:
            raise ValueError("amplitude and background must be >= 0")
        if self.amplitude + self.background > MAX_COUNT:
            raise ValueError("amplitude + background exceeds the 16-bit range")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")


def trajectories(config):
    """Particle positions, ``frames x particles x 2`` (x, y), wrapped into the domain."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    box = np.array([config.width, config.height], dtype=np.float64)
    pos = rng.uniform(0.0, 1.0, size=(config.particles, 2)) * box
    out = np.empty((config.frames, config.particles, 2))
    out[0] = pos
    step = math.sqrt(2.0 * config.diffusion)
    for n in range(1, config.frames):
        pos = np.mod(pos + rng.normal(0.0, 1.0, size=(config.particles, 2)) * step, box)
        out[n] = pos
    return out


def render(positions, config):
    """One frame as float64 counts before clamping and rounding."""
    image = np.full((config.height, config.width), float(config.background))
    if len(positions) == 0:
        return image
    sigma = config.psf_sigma
    reach = int(math.ceil(4.0 * sigma))
    offsets = np.arange(-reach, reach + 1)
    base = np.floor(positions).astype(np.intp)
    px = base[:, 0:1] + offsets  # (P, K) pixel columns
    py = base[:, 1:2] + offsets
    dx = px - positions[:, 0:1]
    dy = py - positions[:, 1:2]
    r2 = dy[:, :, None] ** 2 + dx[:, None, :] ** 2
    spot = np.where(r2 <= (4.0 * sigma) ** 2, np.exp(-r2 / (2.0 * sigma * sigma)), 0.0)
    rows = np.broadcast_to((py % config.height)[:, :, None], spot.shape)
    cols = np.broadcast_to((px % config.width)[:, None, :], spot.shape)
    np.add.at(image, (rows.ravel(), cols.ravel()), config.amplitude * spot.ravel())
    return image


def generate(config):
    """Build the stack; identical for identical configs."""
    config.validate()
    track = trajectories(config)
    frames = np.empty((config.frames, config.height, config.width), dtype=np.uint16)
    for n in range(config.frames):
        img = render(track[n], config)
        frames[n] = np.rint(np.clip(img, 0, MAX_COUNT)).astype(np.uint16)
    return ImageStack(frames, frame_interval=config.frame_interval)


def write_synth(config, out_dir, stack=None):
    """Write ``stack.raw`` and ``synth.json``; returns the stack path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if stack is None:
        stack = generate(config)
    path = write_raw_stack(stack, out_dir / "stack.raw")
    meta = {"config": asdict(config), "prng": PRNG, "numpy": np.__version__,
            "stack": path.name, "format": "raw_stack"}
    (out_dir / "synth.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path
