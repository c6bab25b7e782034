"""Depth-resolved GVD analytics: profile encoding, the two-interface
autocorrelation-peak corrections, peak measurement, autocorrelation-peak
removal and dispersion-map assembly.

Profiles encode GVD densities in [-5000, 5000] fs^2/mm linearly into
[0, 1]; all profile comparisons happen in that encoded space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import find_peaks

from .optics import GVD_MAX, GVD_MIN, ObjectModel, Spectrum

_GVD_SPAN = GVD_MAX - GVD_MIN


class DegenerateGeometryError(ValueError):
    """Autocorrelation peak collides with a structural interface."""


def encode_gvd(gvd) -> np.ndarray | float:
    """Map fs^2/mm to the unit label range, clamping out-of-range values."""
    encoded = np.clip((np.asarray(gvd, dtype=float) - GVD_MIN) / _GVD_SPAN, 0.0, 1.0)
    return float(encoded) if encoded.ndim == 0 else encoded


def decode_gvd(u) -> np.ndarray | float:
    """Inverse of encode_gvd on [0, 1]."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("encoded values must lie in [0, 1]")
    decoded = u * _GVD_SPAN + GVD_MIN
    return float(decoded) if decoded.ndim == 0 else decoded


def ground_truth_profile(obj: ObjectModel, length: int) -> np.ndarray:
    """Piecewise-constant encoded GVD profile of an object.

    Pixel i carries the encoded density of the region containing it;
    pixels behind the last interface carry the encoded tail density.
    """
    profile = np.full(length, encode_gvd(obj.tail_gvd))
    start = 0
    for extent, gvd in obj.regions:
        stop = min(start + extent, length)
        profile[start:stop] = encode_gvd(gvd)
        start += extent
    return profile


@dataclass(frozen=True)
class SegmentGeometry:
    """Geometry of the two-interface correction formulas.

    l_front: bins from the zero-OPD point to the first interface.
    l_obj: object optical thickness in bins.
    beta_front / beta_obj: GVD densities (fs^2/mm) of the region in front
    of the object and of the object layer.
    """

    l_front: float
    l_obj: float
    beta_front: float
    beta_obj: float

    def __post_init__(self):
        if self.l_front <= 0 or self.l_obj <= 0:
            raise ValueError(
                f"lengths must be positive, got {self.l_front}, {self.l_obj}")


def segment_gvd_eq1(g: SegmentGeometry) -> float:
    """GVD level between the autocorrelation peak and the first interface.

    (l_front*beta_front - l_obj*beta_obj) / (l_front - l_obj). The same
    expression serves both autocorrelation-peak placements; it is the
    unique level that preserves the accumulated GVD at the structural
    peaks when the autocorrelation peak is treated as a real interface.
    """
    if g.l_front == g.l_obj:
        raise DegenerateGeometryError(
            "l_front == l_obj: autocorrelation peak collides with an interface")
    return (g.l_front * g.beta_front - g.l_obj * g.beta_obj) / (g.l_front - g.l_obj)


def segment_gvd_eq2b(g: SegmentGeometry) -> float:
    """GVD level between the autocorrelation peak and the second interface."""
    return g.beta_front


def estimate_layer_gvd(l_front: float, l_obj: float, beta_front: float,
                       beta_seg2: float) -> float:
    """Invert the correction formula to recover the layer GVD.

    Given the front GVD level and the measured level beta_seg2 between the
    first interface and the autocorrelation peak, returns
    (l_front*beta_front - (l_front - l_obj)*beta_seg2) / l_obj.
    """
    if l_obj == 0:
        raise ValueError("l_obj must be non-zero")
    return (l_front * beta_front - (l_front - l_obj) * beta_seg2) / l_obj


def effective_profile_two_interface(obj: ObjectModel, length: int) -> np.ndarray:
    """Encoded profile a network trained without autocorrelation peaks
    effectively targets for a two-interface object whose signal contains
    the autocorrelation peak.

    The autocorrelation peak at p_ac = p2 - p1 is treated as a structural
    peak. In front of it the level equals the object-layer GVD when the
    peak precedes the first interface; the segment between the peak and
    the nearer interface carries the correction level of segment_gvd_eq1,
    and with the peak between the interfaces the remainder up to the
    second interface carries the front level (segment_gvd_eq2b).
    """
    if len(obj.interfaces) != 2:
        raise ValueError(f"need exactly 2 interfaces, got {len(obj.interfaces)}")
    p1, p2 = obj.positions
    p_ac = p2 - p1
    if p_ac in (p1, p2):
        raise DegenerateGeometryError(
            f"autocorrelation peak at {p_ac} collides with an interface")
    beta_front = obj.regions[0][1]
    beta_obj = obj.regions[1][1]
    geom = SegmentGeometry(l_front=p1, l_obj=p2 - p1,
                           beta_front=beta_front, beta_obj=beta_obj)
    corr = segment_gvd_eq1(geom)

    profile = np.full(length, encode_gvd(obj.tail_gvd))
    if p_ac < p1:
        profile[:p_ac] = encode_gvd(beta_obj)
        profile[p_ac:p1] = encode_gvd(corr)
        profile[p1:p2] = encode_gvd(beta_obj)
    else:
        profile[:p1] = encode_gvd(beta_front)
        profile[p1:p_ac] = encode_gvd(corr)
        profile[p_ac:p2] = encode_gvd(segment_gvd_eq2b(geom))
    return profile


@dataclass(frozen=True)
class Peak:
    """One detected A-scan peak."""

    position: float  # fractional bin, parabola-refined
    height: float
    fwhm: float      # bins, from interpolated half-maximum crossings
    kind: str = "unknown"  # structural | autocorrelation | unknown


def _refine_parabolic(ascan: np.ndarray, i: int) -> tuple[float, float]:
    if i <= 0 or i >= len(ascan) - 1:
        return float(i), float(ascan[i])
    y0, y1, y2 = ascan[i - 1], ascan[i], ascan[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return float(i), float(y1)
    delta = 0.5 * (y0 - y2) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    height = y1 - 0.25 * (y0 - y2) * delta
    return i + delta, float(height)


def peak_fwhm(ascan: np.ndarray, i: int) -> float:
    """Full width at half maximum around index i, by linear interpolation
    of the half-maximum crossings (baseline zero)."""
    ascan = np.asarray(ascan, dtype=float)
    half = ascan[i] / 2.0
    lo = i
    while lo > 0 and ascan[lo - 1] > half:
        lo -= 1
    if lo == 0:
        left = 0.0
    else:
        left = lo - (ascan[lo] - half) / (ascan[lo] - ascan[lo - 1])
    hi = i
    while hi < len(ascan) - 1 and ascan[hi + 1] > half:
        hi += 1
    if hi == len(ascan) - 1:
        right = float(hi)
    else:
        right = hi + (ascan[hi] - half) / (ascan[hi] - ascan[hi + 1])
    return float(right - left)


def _classify(positions: list[float], known_interfaces) -> list[str]:
    candidates = (list(known_interfaces) if known_interfaces is not None
                  else list(positions))
    kinds = []
    for q in positions:
        diff_match = any(
            abs(q - abs(a - b)) <= 2.0
            for i, a in enumerate(candidates)
            for b in candidates[i + 1:])
        if diff_match:
            kinds.append("autocorrelation")
        elif known_interfaces is not None and any(
                abs(q - p) <= 2.0 for p in known_interfaces):
            kinds.append("structural")
        else:
            kinds.append("unknown")
    return kinds


def analyze_peaks(ascan, rel_threshold_db: float = -30.0,
                  min_separation: int = 3, min_position: int = 8,
                  known_interfaces: Sequence[float] | None = None) -> list[Peak]:
    """Detect, refine and classify A-scan peaks.

    Local maxima above rel_threshold_db of the maximum in the valid depth
    region, separated by at least min_separation bins. Bins below
    min_position are excluded: the zero-OPD residual of the source
    envelope is not object structure. Positions are refined by a 3-point
    parabola; widths by interpolated half-maximum crossings.

    With known_interfaces given, a peak matching a pairwise position
    difference within 2 bins is tagged "autocorrelation", one matching an
    interface is "structural"; without them only difference matches among
    the detected peaks themselves are tagged.
    """
    ascan = np.asarray(ascan, dtype=float)
    if ascan.ndim != 1 or len(ascan) == 0:
        raise ValueError("expected a non-empty 1-D A-scan")
    region = ascan[min_position:]
    if len(region) == 0 or region.max() <= 0:
        return []
    threshold = region.max() * 10 ** (rel_threshold_db / 20.0)
    idx, _ = find_peaks(region, height=threshold, distance=max(1, min_separation))
    idx = idx + min_position
    peaks = []
    for i in idx:
        pos, height = _refine_parabolic(ascan, int(i))
        peaks.append((pos, height, peak_fwhm(ascan, int(i))))
    kinds = _classify([p for p, _, _ in peaks], known_interfaces)
    return [Peak(p, h, w, k) for (p, h, w), k in zip(peaks, kinds)]


def _zero_mask(n: int, regions: Iterable[tuple[int, int]]) -> np.ndarray:
    mask = np.ones(2 * n)
    prev_hi = -1
    for lo, hi in regions:
        if lo > hi:
            raise ValueError(f"inverted interval [{lo}, {hi}]")
        if lo <= prev_hi:
            raise ValueError(f"overlapping or unsorted interval [{lo}, {hi}]")
        if lo < 0 or hi >= n:
            raise ValueError(f"interval [{lo}, {hi}] outside [0, {n})")
        prev_hi = hi
        for i in range(lo, hi + 1):
            mask[i] = 0.0
            if i != 0:
                mask[2 * n - i] = 0.0
    return mask


def remove_autocorr_peaks(spectrum: Spectrum,
                          peak_regions: Sequence[tuple[int, int]]) -> Spectrum:
    """Suppress selected A-scan bins by projecting the spectrum onto the
    subspace whose zero-padded 2N transform vanishes there.

    Zeroing the bins of the complex A-scan and inverse-transforming leaks
    energy into the padding half, which the truncation folds back; the
    orthogonal projection solves for the nearest N-sample real spectrum
    with the listed bins (and their Hermitian mirrors) exactly zero, so
    re-applying the filter with the same regions is a no-op.
    """
    values = spectrum.values
    n = len(values)
    regions = [(int(lo), int(hi)) for lo, hi in peak_regions]
    mask = _zero_mask(n, regions)  # validates the intervals
    bins = np.flatnonzero(mask[: n + 1] == 0.0)
    if len(bins) == 0:
        return spectrum

    # Constraint rows: Re and Im of exp(-i*pi*bin*k/N) over k in [0, N).
    k = np.arange(n)
    phase = np.pi * np.outer(bins, k) / n
    rows = np.concatenate([np.cos(phase), -np.sin(phase)])
    norms = np.linalg.norm(rows, axis=1)
    rows = rows[norms > 1e-9]  # the Im rows of bins 0 and N are empty
    gram = rows @ rows.T
    coeff = np.linalg.pinv(gram) @ (rows @ values)
    filtered = values - rows.T @ coeff
    return Spectrum(filtered, spectrum.grid)


def build_dispersion_map(profiles: Sequence[np.ndarray]) -> np.ndarray:
    """Stack per-lateral-position profiles into a dispersion map."""
    profiles = [np.asarray(p, dtype=float) for p in profiles]
    if not profiles:
        raise ValueError("need at least one profile")
    length = len(profiles[0])
    if any(len(p) != length for p in profiles):
        raise ValueError("profiles have mismatched lengths")
    return np.vstack(profiles)


def profile_mae(a, b) -> float:
    """Mean absolute error between two encoded profiles."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))
