"""Image stack input and structure-function output.

Input formats
-------------
pgm_dir
    A directory of binary PGM (P5) files, 16 bit, maxval 65535, big-endian
    samples. Frame order is the lexicographic order of the file names.
raw_stack
    One JSON header line terminated by ``\\n``, e.g.
    ``{"width": 2, "height": 2, "frames": 3, "dtype": "u16le"}``, followed by
    the frames as contiguous little-endian uint16, frame-major and row-major.

Output layout
-------------
``index.json`` manifest, one ``d_m<lag>.bin`` per lag (float64 little-endian,
row-major, ``H x (W//2+1)``) and ``partials/group<k>.bin`` for the group
results of the temporal-FFT engine.
"""
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MergeError, ResultIOError, StackFormatError

RAW_DTYPE = "u16le"
PARTIAL_MAGIC = b"DDMPART1\n"
_MAP_DTYPE = np.dtype("<f8")


@dataclass
class ImageStack:
    """``frames x height x width`` uint16 pixels plus the frame interval."""

    pixel_data: np.ndarray
    frame_interval: float = 1.0

    def __post_init__(self):
        data = np.asarray(self.pixel_data)
        if data.ndim != 3:
            raise StackFormatError(f"pixel data must be 3-D (frames, height, width), got {data.ndim}-D")
        if min(data.shape) < 1:
            raise StackFormatError(f"empty stack shape {data.shape}")
        if data.dtype != np.uint16:
            raise StackFormatError(f"pixel data must be uint16, got {data.dtype}")
        self.pixel_data = data

    @property
    def frames(self):
        return self.pixel_data.shape[0]

    @property
    def height(self):
        return self.pixel_data.shape[1]

    @property
    def width(self):
        return self.pixel_data.shape[2]

    @property
    def shape(self):
        return self.pixel_data.shape

    def frame(self, n):
        return self.pixel_data[n]


class RawStackSource:
    """Frames of a raw_stack file, read lazily through a memory map."""

    def __init__(self, path):
        self.path = Path(path)
        header, offset = _read_raw_header(self.path)
        self.frame_interval = header["frame_interval"]
        shape = (header["frames"], header["height"], header["width"])
        expected = offset + int(np.prod(shape)) * 2
        actual = self.path.stat().st_size
        if actual != expected:
            raise StackFormatError(
                f"{self.path}: payload size mismatch (expected {expected - offset} bytes, "
                f"found {actual - offset})")
        self._data = np.memmap(self.path, dtype="<u2", mode="r", offset=offset, shape=shape)
        self.shape = shape

    @property
    def frames(self):
        return self.shape[0]

    @property
    def height(self):
        return self.shape[1]

    @property
    def width(self):
        return self.shape[2]

    def frame(self, n):
        return np.array(self._data[n], dtype=np.uint16)


class PgmDirSource:
    """Frames of a directory of P5 files, one file read per request."""

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.is_dir():
            raise StackFormatError(f"{self.path}: not a directory")
        self.files = sorted(p for p in self.path.glob("*.pgm") if p.is_file())
        if not self.files:
            raise StackFormatError(f"{self.path}: no *.pgm files")
        first = read_pgm(self.files[0])
        self.shape = (len(self.files),) + first.shape
        self.frame_interval = 1.0

    @property
    def frames(self):
        return self.shape[0]

    @property
    def height(self):
        return self.shape[1]

    @property
    def width(self):
        return self.shape[2]

    def frame(self, n):
        img = read_pgm(self.files[n])
        if img.shape != self.shape[1:]:
            raise StackFormatError(
                f"{self.files[n]}: frame shape {img.shape} differs from {self.shape[1:]}")
        return img


def open_stack(path, format):
    """Open a stack for frame-by-frame reading without loading it."""
    path = Path(path)
    if not path.exists():
        raise StackFormatError(f"{path}: no such file or directory")
    if format == "pgm_dir":
        return PgmDirSource(path)
    if format == "raw_stack":
        return RawStackSource(path)
    raise StackFormatError(f"unknown stack format {format!r}")


def load_stack(path, format):
    """Load and validate a whole stack into memory."""
    source = open_stack(path, format)
    frames = np.empty(source.shape, dtype=np.uint16)
    for n in range(source.frames):
        frames[n] = source.frame(n)
    return ImageStack(frames, frame_interval=source.frame_interval)


# -- PGM ---------------------------------------------------------------------

_PGM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_pgm(path):
    """Read one 16-bit P5 file into a (height, width) uint16 array."""
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    for _ in range(4):
        m = _PGM_TOKEN.match(raw, pos)
        if m is None:
            raise StackFormatError(f"{path}: truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise StackFormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise StackFormatError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1:
        raise StackFormatError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 65535:
        raise StackFormatError(f"{path}: maxval {maxval} unsupported, expected 65535")
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise StackFormatError(f"{path}: missing whitespace after PGM header")
    pos += 1
    nbytes = width * height * 2
    payload = raw[pos:pos + nbytes]
    if len(payload) != nbytes:
        raise StackFormatError(f"{path}: truncated payload ({len(payload)} of {nbytes} bytes)")
    return np.frombuffer(payload, dtype=">u2").reshape(height, width).astype(np.uint16)


def write_pgm(path, image):
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM frames are 2-D")
    height, width = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        fh.write(image.astype(">u2").tobytes())


def write_pgm_dir(stack, out_dir, prefix="frame"):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digits = max(5, len(str(stack.frames - 1)))
    for n in range(stack.frames):
        write_pgm(out_dir / f"{prefix}{n:0{digits}d}.pgm", stack.frame(n))
    return out_dir


# -- raw stack ---------------------------------------------------------------

def _read_raw_header(path):
    with open(path, "rb") as fh:
        line = fh.readline(1 << 16)
    if not line.endswith(b"\n"):
        raise StackFormatError(f"{path}: raw_stack header is not a newline-terminated line")
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise StackFormatError(f"{path}: raw_stack header is not JSON ({exc})") from None
    if not isinstance(header, dict):
        raise StackFormatError(f"{path}: raw_stack header must be a JSON object")
    for key in ("width", "height", "frames"):
        value = header.get(key)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise StackFormatError(f"{path}: header field {key!r} must be a positive integer")
    if header.get("dtype") != RAW_DTYPE:
        raise StackFormatError(f"{path}: dtype {header.get('dtype')!r} unsupported, expected {RAW_DTYPE!r}")
    interval = header.get("frame_interval", 1.0)
    if not isinstance(interval, (int, float)) or not np.isfinite(interval) or interval <= 0:
        raise StackFormatError(f"{path}: frame_interval must be a positive number")
    header["frame_interval"] = float(interval)
    return header, len(line)


def write_raw_stack(stack, path):
    header = {
        "width": stack.width,
        "height": stack.height,
        "frames": stack.frames,
        "dtype": RAW_DTYPE,
        "frame_interval": float(stack.frame_interval),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("ascii") + b"\n")
        fh.write(np.ascontiguousarray(stack.pixel_data, dtype="<u2").tobytes())
    return Path(path)


# -- results -----------------------------------------------------------------

@dataclass
class ResultArchive:
    """Structure-function maps for a set of lags.

    ``maps[i]`` is the half-plane map ``H x (W//2+1)`` for ``lags[i]``.
    Wave vectors outside the cutoff hold 0.
    """

    lags: list
    maps: np.ndarray
    width: int
    height: int
    algorithm: str
    precision: str = "f64"
    q_max: float | None = None
    timing: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def shape(self):
        return (self.height, self.width // 2 + 1)

    def map_for(self, lag):
        return self.maps[self.lags.index(lag)]


def _write_atomic(path, data):
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise ResultIOError(f"cannot write {path}: {exc}") from exc


def write_results(archive, out_dir):
    """Write per-lag map files and ``index.json``; returns the manifest path."""
    lags = [int(m) for m in archive.lags]
    if not lags:
        raise ResultIOError("no lags to write")
    maps = np.asarray(archive.maps, dtype=np.float64)
    if maps.shape != (len(lags),) + archive.shape:
        raise ResultIOError(f"maps shape {maps.shape} does not match {len(lags)} lags x {archive.shape}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ResultIOError(f"cannot create {out_dir}: {exc}") from exc
    files = []
    for lag, dmap in zip(lags, maps):
        name = f"d_m{lag}.bin"
        _write_atomic(out_dir / name, np.ascontiguousarray(dmap, dtype=_MAP_DTYPE).tobytes())
        files.append(name)
    manifest = {
        "format": "ddmft-results/1",
        "lags": lags,
        "files": files,
        "shape": list(archive.shape),
        "width": archive.width,
        "height": archive.height,
        "dtype": "f64le",
        "algorithm": archive.algorithm,
        "precision": archive.precision,
        "q_max": archive.q_max,
        "config": archive.config,
        # kept apart so the rest of the manifest is reproducible byte for byte
        "timing": archive.timing,
    }
    path = out_dir / "index.json"
    _write_atomic(path, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    return path


def read_results(out_dir):
    out_dir = Path(out_dir)
    try:
        manifest = json.loads((out_dir / "index.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ResultIOError(f"cannot read manifest in {out_dir}: {exc}") from exc
    shape = tuple(manifest["shape"])
    maps = np.empty((len(manifest["lags"]),) + shape, dtype=np.float64)
    for i, name in enumerate(manifest["files"]):
        try:
            raw = (out_dir / name).read_bytes()
        except OSError as exc:
            raise ResultIOError(f"cannot read {name}: {exc}") from exc
        if len(raw) != maps[i].nbytes:
            raise ResultIOError(f"{name}: expected {maps[i].nbytes} bytes, found {len(raw)}")
        maps[i] = np.frombuffer(raw, dtype=_MAP_DTYPE).reshape(shape)
    return ResultArchive(
        lags=manifest["lags"], maps=maps, width=manifest["width"], height=manifest["height"],
        algorithm=manifest["algorithm"], precision=manifest["precision"],
        q_max=manifest["q_max"], timing=manifest.get("timing", {}),
        config=manifest.get("config", {}))


# -- partial group results ---------------------------------------------------

def write_partial(group_id, start, stop, lags, values, out_dir, *, width, height, q_max):
    """Write the values of one wave-vector group to ``partials/group<k>.bin``.

    ``values`` is ``len(lags) x (stop - start)``; ``[start, stop)`` indexes the
    retained wave-vector set of the run. The header carries everything the
    merge needs to rebuild that set.
    """
    values = np.ascontiguousarray(values, dtype=_MAP_DTYPE)
    if values.shape != (len(lags), stop - start):
        raise ResultIOError(f"partial values shape {values.shape} does not match "
                            f"{len(lags)} lags x range [{start}, {stop})")
    header = {
        "group": int(group_id),
        "range": [int(start), int(stop)],
        "lags": [int(m) for m in lags],
        "width": int(width),
        "height": int(height),
        "q_max": q_max,
        "dtype": "f64le",
    }
    pdir = Path(out_dir) / "partials"
    try:
        pdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ResultIOError(f"cannot create {pdir}: {exc}") from exc
    path = pdir / f"group{int(group_id)}.bin"
    blob = PARTIAL_MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n" + values.tobytes()
    _write_atomic(path, blob)
    return path


def read_partial(path):
    """Return ``(header, values)`` of a partial file."""
    try:
        with open(path, "rb") as fh:
            if fh.readline() != PARTIAL_MAGIC:
                raise MergeError(f"{path}: not a partial result file")
            header = json.loads(fh.readline())
            payload = fh.read()
    except (OSError, json.JSONDecodeError) as exc:
        raise MergeError(f"{path}: unreadable partial ({exc})") from exc
    start, stop = header["range"]
    shape = (len(header["lags"]), stop - start)
    if stop < start or len(payload) != int(np.prod(shape)) * 8:
        raise MergeError(f"{path}: payload does not match header range {header['range']}")
    return header, np.frombuffer(payload, dtype=_MAP_DTYPE).reshape(shape)
