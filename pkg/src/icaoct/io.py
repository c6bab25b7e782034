"""File formats shared by the CLI and the library: CSV tables, binary PGM
images, raw f32 stacks and the two-column spectrum CSV."""

from __future__ import annotations

import csv
from typing import Mapping, Sequence

import numpy as np


def _format_value(v) -> str:
    # repr of a Python float is the shortest string that re-parses exactly
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def export_csv(table: Mapping[str, Sequence], path) -> None:
    """Write named columns as UTF-8, LF-terminated CSV with a header row.

    Floats use round-trip formatting, so reading the file back recovers
    bit-identical values.
    """
    names = list(table.keys())
    columns = [list(table[n]) for n in names]
    lengths = {len(c) for c in columns}
    if len(lengths) > 1:
        raise ValueError(f"ragged columns: lengths {sorted(lengths)}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*columns):
            writer.writerow([_format_value(v) for v in row])


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Read a CSV written by export_csv back into float columns."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        columns = {name: [] for name in header}
        for row in reader:
            for name, value in zip(header, row):
                columns[name].append(float(value))
    return {name: np.asarray(vals) for name, vals in columns.items()}


def export_pgm(matrix, path) -> None:
    """Binary P5 image, min-max normalized to 8 bits.

    A constant matrix maps to mid-gray 128.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    lo, hi = m.min(), m.max()
    if hi > lo:
        pixels = np.round((m - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        pixels = np.full(m.shape, 128, dtype=np.uint8)
    _write_pgm(pixels, path)


def export_unit_pgm(matrix01, path) -> None:
    """P5 image of values already in [0, 1]: pixel = round(255 * u).

    Used for dispersion maps, whose absolute gray level is meaningful.
    """
    m = np.asarray(matrix01, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if m.min() < 0.0 or m.max() > 1.0:
        raise ValueError("values outside [0, 1]")
    _write_pgm(np.round(m * 255.0).astype(np.uint8), path)


def _write_pgm(pixels: np.ndarray, path) -> None:
    rows, cols = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"not a binary PGM: {parts[0]!r}")
    cols, rows = (int(t) for t in parts[1].split())
    maxval = int(parts[2])
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    pixels = np.frombuffer(parts[3][: rows * cols], dtype=np.uint8)
    return pixels.reshape(rows, cols)


def save_stack_raw(stack, path) -> None:
    """Raw little-endian f32 dump plus a '<rows> <cols>' sidecar header."""
    stack = np.asarray(stack)
    if stack.ndim != 2:
        raise ValueError(f"expected a 2-D stack, got shape {stack.shape}")
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(stack, dtype="<f4").tobytes())
    with open(f"{path}.hdr", "w", encoding="utf-8") as fh:
        fh.write(f"{stack.shape[0]} {stack.shape[1]}\n")


def load_stack_raw(path) -> np.ndarray:
    with open(f"{path}.hdr", "r", encoding="utf-8") as fh:
        rows, cols = (int(t) for t in fh.read().split())
    with open(path, "rb") as fh:
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != rows * cols:
        raise ValueError(
            f"raw payload has {data.size} floats, header says {rows}x{cols}")
    return data.reshape(rows, cols).astype(np.float64)


def save_spectrum_csv(values, path) -> None:
    """Two-column spectrum CSV: sample_index, intensity."""
    values = np.asarray(values, dtype=float)
    export_csv({"sample_index": np.arange(len(values)), "intensity": values}, path)


def load_spectrum_csv(path) -> np.ndarray:
    columns = read_csv_columns(path)
    if "intensity" not in columns:
        raise ValueError(f"{path}: no 'intensity' column")
    return columns["intensity"]
