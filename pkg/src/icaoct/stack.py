"""Quantum-mimic intensity-correlation processing of interference spectra.

The spectrum is cut into contiguous fragments; each fragment is
autocorrelated, zero-padded to twice the spectrum length and Fourier
transformed. The magnitudes of the first half of each transform stacked
row by row form the FFT stack consumed by the regressor. Within one row
the quadratic spectral phase cancels between the two factors of the lag
product, which is the even-order dispersion cancellation this modality
mimics from quantum OCT; the per-row shift of the fringe frequency across
the stack is what encodes the dispersion.
"""

from __future__ import annotations

import numpy as np

from .optics import Spectrum


def _values(spectrum) -> np.ndarray:
    if isinstance(spectrum, Spectrum):
        return spectrum.values
    return np.asarray(spectrum, dtype=float)


def autocorrelate(fragment) -> np.ndarray:
    """Full linear autocorrelation of a real fragment.

    out[m] = sum_n x[n] * x[n + m - (f-1)] over valid n, length 2f-1.
    """
    x = np.asarray(fragment, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise ValueError("fragment must be a non-empty 1-D vector")
    return np.correlate(x, x, mode="full")


def fragment_slices(n: int, fragments: int) -> list[slice]:
    """Contiguous split of n samples into `fragments` pieces.

    The remainder samples are distributed one per fragment from the front,
    so the first n % fragments pieces are one sample longer.
    """
    if fragments < 1 or fragments > n:
        raise ValueError(f"cannot split {n} samples into {fragments} fragments")
    base, rem = divmod(n, fragments)
    slices = []
    start = 0
    for r in range(fragments):
        length = base + (1 if r < rem else 0)
        slices.append(slice(start, start + length))
        start += length
    return slices


def build_stack(spectrum, fragments: int = 50) -> np.ndarray:
    """Build the FFT stack of a spectrum.

    Each fragment is mean-subtracted, autocorrelated, zero-padded to twice
    the spectrum length and transformed; row r holds the magnitude of the
    first N bins. The mean subtraction removes the fragment's DC pedestal,
    which would otherwise bridge into spurious half-position responses;
    the pairwise fringe artefacts at mean interface positions are kept.

    Returns a (fragments, N) non-negative float array.
    """
    values = _values(spectrum)
    n = len(values)
    rows = np.empty((fragments, n))
    padded = np.zeros(2 * n)
    for r, sl in enumerate(fragment_slices(n, fragments)):
        frag = values[sl] - values[sl].mean()
        ac = autocorrelate(frag)
        padded[:] = 0.0
        padded[: len(ac)] = ac
        rows[r] = np.abs(np.fft.rfft(padded))[:n]
    return rows


def standard_ascan(spectrum) -> np.ndarray:
    """Conventional Fourier-domain A-scan.

    Mean-subtracted spectrum, zero-padded to 2N, transformed; magnitude of
    the first N bins. The axis is shared with the stack columns and the
    dispersion-profile pixels: a bin-aligned fringe of frequency p peaks
    at bin p.
    """
    values = _values(spectrum)
    n = len(values)
    padded = np.zeros(2 * n)
    padded[:n] = values - values.mean()
    return np.abs(np.fft.rfft(padded))[:n]


def ica_ascan(stack: np.ndarray) -> np.ndarray:
    """Collapse a stack to a single intensity-correlation A-scan.

    Column-wise arithmetic mean over the rows.
    """
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 2:
        raise ValueError(f"expected a 2-D stack, got shape {stack.shape}")
    return stack.mean(axis=0)
