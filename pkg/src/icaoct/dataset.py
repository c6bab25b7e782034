"""Deterministic training-pair generation and the ICAD container format.

Every example is fully determined by (base_seed, index): the object is
sampled from seed base_seed + index, simulated, stacked and labelled with
its ground-truth profile. Generation is therefore embarrassingly parallel
with serial/parallel bit-identity at the stored f32 precision.

ICAD layout (little-endian): magic "ICAD", u32 version, u64 example
count, u32 header-text length, UTF-8 JSON header text, then per example
the stack (rows*cols f32, row-major) followed by the profile (f32).
"""

from __future__ import annotations

import json
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .analytics import ground_truth_profile
from .optics import (GVD_MAX, GVD_MIN, NoiseSpec, ObjectModel, SpectralGrid,
                     add_noise, make_grid, synthesize_spectrum)
from .stack import build_stack

MAGIC = b"ICAD"
VERSION = 1


class DatasetFormatError(ValueError):
    """File is not an ICAD container or has an unsupported version."""


class DatasetCorruptionError(ValueError):
    """Payload ends before the example count promised by the header."""


@dataclass(frozen=True)
class SamplerConfig:
    """Random-object distribution for dataset generation.

    count_weights optionally biases the interface-count draw (index i is
    the weight of i+1 interfaces); by default counts are uniform on
    [1, max_interfaces].
    """

    max_interfaces: int = 12
    min_gap: int = 8
    gvd_range: tuple[float, float] = (GVD_MIN, GVD_MAX)
    position_range: tuple[int, int] = (16, 1000)
    reflectivity_range: tuple[float, float] = (0.01, 0.2)
    include_autocorr: bool = False
    noise: NoiseSpec | None = None
    count_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (1 <= self.max_interfaces <= 12):
            raise ValueError(f"max_interfaces must be in [1, 12], got {self.max_interfaces}")
        if self.min_gap < 1:
            raise ValueError(f"min_gap must be >= 1, got {self.min_gap}")
        lo, hi = self.position_range
        if hi - lo < (self.max_interfaces - 1) * self.min_gap:
            raise ValueError(
                f"position range {self.position_range} too small for "
                f"{self.max_interfaces} interfaces with gap {self.min_gap}")
        if self.gvd_range[0] >= self.gvd_range[1]:
            raise ValueError(f"empty gvd range {self.gvd_range}")
        if not (0.0 < self.reflectivity_range[0] < self.reflectivity_range[1] <= 1.0):
            raise ValueError(f"bad reflectivity range {self.reflectivity_range}")
        if self.count_weights is not None:
            if len(self.count_weights) != self.max_interfaces:
                raise ValueError("count_weights must have max_interfaces entries")
            if min(self.count_weights) < 0 or sum(self.count_weights) <= 0:
                raise ValueError("count_weights must be non-negative and not all zero")


def sample_object(seed: int, cfg: SamplerConfig) -> ObjectModel:
    """Draw a random multi-layer object; deterministic in the seed."""
    rng = np.random.default_rng(seed)
    if cfg.count_weights is None:
        count = int(rng.integers(1, cfg.max_interfaces + 1))
    else:
        w = np.asarray(cfg.count_weights, dtype=float)
        count = int(rng.choice(np.arange(1, cfg.max_interfaces + 1), p=w / w.sum()))
    lo, hi = cfg.position_range
    # Sorted draws on a shrunken range plus i*min_gap give gaps >= min_gap.
    raw = np.sort(rng.integers(lo, hi - (count - 1) * cfg.min_gap + 1, size=count))
    positions = raw + np.arange(count) * cfg.min_gap
    refl = rng.uniform(*cfg.reflectivity_range, size=count)
    gvds = rng.uniform(*cfg.gvd_range, size=count)
    extents = np.diff(np.concatenate([[0], positions]))
    return ObjectModel(
        interfaces=list(zip(positions.tolist(), refl.tolist())),
        regions=list(zip(extents.tolist(), gvds.tolist())),
    )


def generate_example(index: int, base_seed: int, cfg: SamplerConfig,
                     grid: SpectralGrid, fragments: int = 50
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Produce the (stack, profile) pair for one example index."""
    seed = base_seed + index
    obj = sample_object(seed, cfg)
    spectrum = synthesize_spectrum(obj, grid, cfg.include_autocorr)
    if cfg.noise is not None and not cfg.noise.is_noiseless:
        # Decorrelate noise across examples while keeping determinism.
        spectrum = add_noise(spectrum, replace(cfg.noise, seed=cfg.noise.seed + seed))
    stack = build_stack(spectrum, fragments)
    profile = ground_truth_profile(obj, grid.n_samples)
    return stack, profile


@dataclass(frozen=True)
class DatasetHeader:
    """Human-readable description of an ICAD payload."""

    example_count: int
    rows: int
    cols: int
    profile_len: int
    n_samples: int
    center_wavelength: float
    span_wavelength: float
    base_seed: int
    version: int = VERSION

    def to_json(self) -> str:
        return json.dumps({
            "version": self.version,
            "example_count": self.example_count,
            "rows": self.rows,
            "cols": self.cols,
            "profile_len": self.profile_len,
            "grid": {
                "n_samples": self.n_samples,
                "center_wavelength_m": self.center_wavelength,
                "span_wavelength_m": self.span_wavelength,
            },
            "base_seed": self.base_seed,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetHeader":
        d = json.loads(text)
        return cls(
            example_count=d["example_count"], rows=d["rows"], cols=d["cols"],
            profile_len=d["profile_len"], n_samples=d["grid"]["n_samples"],
            center_wavelength=d["grid"]["center_wavelength_m"],
            span_wavelength=d["grid"]["span_wavelength_m"],
            base_seed=d["base_seed"], version=d["version"])

    def grid(self) -> SpectralGrid:
        return make_grid(self.n_samples, self.center_wavelength, self.span_wavelength)

    @property
    def example_bytes(self) -> int:
        return 4 * (self.rows * self.cols + self.profile_len)


def write_dataset(path, header: DatasetHeader,
                  examples: Iterable[tuple[np.ndarray, np.ndarray]]) -> int:
    """Stream examples into an ICAD file; returns the number written."""
    text = header.to_json().encode("utf-8")
    written = 0
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", header.version))
        fh.write(struct.pack("<Q", header.example_count))
        fh.write(struct.pack("<I", len(text)))
        fh.write(text)
        for stack, profile in examples:
            stack = np.ascontiguousarray(stack, dtype="<f4")
            profile = np.ascontiguousarray(profile, dtype="<f4")
            if stack.shape != (header.rows, header.cols):
                raise ValueError(
                    f"stack shape {stack.shape} does not match header "
                    f"({header.rows}, {header.cols})")
            if profile.shape != (header.profile_len,):
                raise ValueError(
                    f"profile length {profile.shape} does not match header "
                    f"{header.profile_len}")
            fh.write(stack.tobytes())
            fh.write(profile.tobytes())
            written += 1
    if written != header.example_count:
        raise ValueError(
            f"wrote {written} examples, header promised {header.example_count}")
    return written


def _read_exact(fh: BinaryIO, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise DatasetCorruptionError(
            f"truncated file: {what} (needed {count} bytes at offset "
            f"{fh.tell() - len(data)}, got {len(data)})")
    return data


def read_dataset(path) -> tuple[DatasetHeader, Iterator[tuple[np.ndarray, np.ndarray]]]:
    """Open an ICAD file; examples are streamed lazily."""
    fh = open(path, "rb")
    try:
        magic = _read_exact(fh, 4, "magic bytes")
        if magic != MAGIC:
            raise DatasetFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version, = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != VERSION:
            raise DatasetFormatError(f"unsupported version {version}")
        count, = struct.unpack("<Q", _read_exact(fh, 8, "example count"))
        hlen, = struct.unpack("<I", _read_exact(fh, 4, "header length"))
        header = DatasetHeader.from_json(
            _read_exact(fh, hlen, "header text").decode("utf-8"))
        if header.example_count != count:
            raise DatasetFormatError(
                f"header text promises {header.example_count} examples, "
                f"container field says {count}")
    except Exception:
        fh.close()
        raise

    def _stream():
        stack_bytes = 4 * header.rows * header.cols
        profile_bytes = 4 * header.profile_len
        with fh:
            for i in range(count):
                raw = fh.read(stack_bytes + profile_bytes)
                if len(raw) != stack_bytes + profile_bytes:
                    raise DatasetCorruptionError(
                        f"truncated file: example {i} incomplete "
                        f"(byte offset {fh.tell() - len(raw)})")
                stack = np.frombuffer(raw[:stack_bytes], dtype="<f4").reshape(
                    header.rows, header.cols)
                profile = np.frombuffer(raw[stack_bytes:], dtype="<f4")
                yield stack, profile

    return header, _stream()


def load_dataset(path) -> tuple[DatasetHeader, np.ndarray, np.ndarray]:
    """Read a whole ICAD file into (header, stacks, profiles) arrays."""
    header, stream = read_dataset(path)
    stacks = np.empty((header.example_count, header.rows, header.cols), dtype=np.float32)
    profiles = np.empty((header.example_count, header.profile_len), dtype=np.float32)
    for i, (stack, profile) in enumerate(stream):
        stacks[i] = stack
        profiles[i] = profile
    return header, stacks, profiles


def _generate_one(args) -> tuple[np.ndarray, np.ndarray]:
    index, base_seed, cfg, grid_params, fragments = args
    grid = make_grid(*grid_params)
    return generate_example(index, base_seed, cfg, grid, fragments)


def generate_dataset(path, count: int, base_seed: int, cfg: SamplerConfig,
                     grid: SpectralGrid, fragments: int = 50,
                     workers: int = 1) -> DatasetHeader:
    """Generate `count` examples and write them to an ICAD file.

    With workers > 1 the examples are computed in a process pool; the
    output is byte-identical to a serial run because each example depends
    only on (base_seed, index).
    """
    header = DatasetHeader(
        example_count=count, rows=fragments, cols=grid.n_samples,
        profile_len=grid.n_samples, n_samples=grid.n_samples,
        center_wavelength=grid.center_wavelength,
        span_wavelength=grid.span_wavelength, base_seed=base_seed)
    if workers > 1 and count > 1:
        grid_params = (grid.n_samples, grid.center_wavelength, grid.span_wavelength)
        jobs = [(i, base_seed, cfg, grid_params, fragments) for i in range(count)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            write_dataset(path, header, pool.map(_generate_one, jobs, chunksize=8))
    else:
        write_dataset(path, header, (
            generate_example(i, base_seed, cfg, grid, fragments)
            for i in range(count)))
    return header


def default_workers() -> int:
    """Worker count from ICAOCT_THREADS, defaulting to the CPU count."""
    env = os.environ.get("ICAOCT_THREADS")
    if env is not None:
        workers = int(env)
        if workers < 1:
            raise ValueError(f"ICAOCT_THREADS must be >= 1, got {env}")
        return workers
    return os.cpu_count() or 1
