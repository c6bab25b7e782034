"""Spectral-domain interference simulation for dispersive multi-layer objects.

The simulator works on a sampled angular-frequency detuning axis with a
Gaussian source envelope. An object is an ordered set of partially
reflective interfaces (positions in A-scan bins) separated by regions of
constant group-velocity-dispersion density (fs^2/mm). Each interface
contributes a fringe whose frequency encodes its depth and whose quadratic
spectral phase encodes the dispersion accumulated in front of it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

C_NM_PER_FS = 299.792458  # speed of light, nm/fs

# Encoded GVD range of the dispersion profiles, fs^2/mm.
GVD_MIN = -5000.0
GVD_MAX = 5000.0


class InvalidGridError(ValueError):
    """Non-physical spectral grid parameters."""


@dataclass(frozen=True)
class SpectralGrid:
    """Angular-frequency axis, source envelope and axial calibration.

    Attributes:
        n_samples: number of spectral samples.
        center_wavelength: source centre wavelength, metres.
        span_wavelength: total spectral span, metres.
        omega: per-sample angular-frequency detuning, rad/fs, zero at the
            centre sample and strictly increasing.
        envelope: Gaussian source weight per sample, peak 1 at the centre.
        axial_pixel: depth extent of one A-scan bin, metres.
    """

    n_samples: int
    center_wavelength: float
    span_wavelength: float
    omega: np.ndarray
    envelope: np.ndarray
    axial_pixel: float

    @property
    def axial_pixel_mm(self) -> float:
        return self.axial_pixel * 1e3


def make_grid(n_samples: int = 1024, center: float = 840e-9,
              span: float = 160e-9) -> SpectralGrid:
    """Build the sampled spectral axis.

    The detuning axis spans the full optical bandwidth
    delta_omega = 2*pi*c*span/center^2 with sample k at
    (k - n/2)*delta_omega/n, so the centre sample carries zero detuning.
    The envelope is a Gaussian with FWHM equal to half the span. The axial
    bin size is center^2/(4*span), which makes a fringe of bin-aligned
    frequency p peak at A-scan bin p after the zero-padded transform.
    """
    if n_samples < 4:
        raise InvalidGridError(f"need at least 4 samples, got {n_samples}")
    if span <= 0:
        raise InvalidGridError(f"span must be positive, got {span}")
    if span >= 2 * center:
        raise InvalidGridError(
            f"span {span} >= 2*center {2 * center}: grid reaches zero wavelength")

    center_nm = center * 1e9
    span_nm = span * 1e9
    delta_omega = 2 * np.pi * C_NM_PER_FS * span_nm / center_nm**2  # rad/fs
    k = np.arange(n_samples)
    omega = (k - n_samples // 2) * (delta_omega / n_samples)
    fwhm = delta_omega / 2.0
    envelope = np.exp(-4.0 * np.log(2.0) * (omega / fwhm) ** 2)
    axial_pixel = center**2 / (4.0 * span)
    return SpectralGrid(n_samples, center, span, omega, envelope, axial_pixel)


@dataclass(frozen=True)
class ObjectModel:
    """Multi-layer specimen plus interferometer imbalance.

    interfaces: ordered (position_px, reflectivity) pairs. Positions are
        A-scan bin indices in [1, n_samples-1], strictly increasing;
        reflectivities are field amplitudes relative to the reference arm.
    regions: ordered (extent_px, gvd_density) pairs covering [0, last
        interface). gvd_density is fs^2/mm of optical path difference, so
        the quadratic phase accumulated at interface j is exactly
        sum(gvd_r * extent_r * axial_pixel_mm) over the regions in front.
    tail_gvd: GVD density of the semi-infinite medium behind the last
        interface; only the label encoder uses it.
    """

    interfaces: tuple[tuple[int, float], ...]
    regions: tuple[tuple[int, float], ...]
    tail_gvd: float = 0.0

    def __init__(self, interfaces: Sequence[Sequence[float]],
                 regions: Sequence[Sequence[float]], tail_gvd: float = 0.0):
        ifc = tuple((int(p), float(r)) for p, r in interfaces)
        reg = tuple((int(e), float(g)) for e, g in regions)
        object.__setattr__(self, "interfaces", ifc)
        object.__setattr__(self, "regions", reg)
        object.__setattr__(self, "tail_gvd", float(tail_gvd))
        self._validate()

    def _validate(self) -> None:
        positions = [p for p, _ in self.interfaces]
        if any(p2 <= p1 for p1, p2 in zip(positions, positions[1:])):
            raise ValueError(f"interface positions not strictly increasing: {positions}")
        if positions and positions[0] < 1:
            raise ValueError(f"first interface position must be >= 1, got {positions[0]}")
        for p, r in self.interfaces:
            if not (0.0 < r <= 1.0):
                raise ValueError(f"reflectivity at {p} outside (0, 1]: {r}")
        if len(self.regions) != len(self.interfaces):
            raise ValueError(
                f"{len(self.interfaces)} interfaces need {len(self.interfaces)} "
                f"regions, got {len(self.regions)}")
        if self.interfaces:
            total = sum(e for e, _ in self.regions)
            if total != positions[-1]:
                raise ValueError(
                    f"region extents sum to {total}, last interface at {positions[-1]}")
        for e, g in self.regions:
            if e <= 0:
                raise ValueError(f"region extent must be positive, got {e}")
            if not (GVD_MIN <= g <= GVD_MAX):
                raise ValueError(f"gvd density {g} outside [{GVD_MIN}, {GVD_MAX}]")
        if not (GVD_MIN <= self.tail_gvd <= GVD_MAX):
            raise ValueError(f"tail gvd {self.tail_gvd} outside [{GVD_MIN}, {GVD_MAX}]")

    @property
    def positions(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.interfaces)

    @property
    def reflectivities(self) -> tuple[float, ...]:
        return tuple(r for _, r in self.interfaces)

    def accumulated_gvd(self, grid: SpectralGrid) -> np.ndarray:
        """Quadratic-phase coefficient B_j (fs^2) at each interface."""
        ax_mm = grid.axial_pixel_mm
        acc = np.cumsum([g * e * ax_mm for e, g in self.regions])
        return np.asarray(acc, dtype=float)


@dataclass(frozen=True)
class Spectrum:
    """Real intensity spectrum sampled on a grid."""

    values: np.ndarray
    grid: SpectralGrid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or len(values) != self.grid.n_samples:
            raise ValueError(
                f"spectrum length {values.shape} does not match grid "
                f"n_samples {self.grid.n_samples}")
        if not np.all(np.isfinite(values)):
            raise ValueError("spectrum contains non-finite values")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white noise level as an SNR in dB, or the noiseless sentinel.

    snr_db is the ratio, in 20*log10 convention, of the peak fringe
    amplitude of the clean spectrum to the noise standard deviation.
    snr_db=None means no noise.
    """

    snr_db: float | None
    seed: int = 0

    def __post_init__(self):
        if self.snr_db is not None and self.snr_db <= 0:
            raise ValueError(f"snr_db must be positive or None, got {self.snr_db}")

    @classmethod
    def noiseless(cls) -> "NoiseSpec":
        return cls(snr_db=None)

    @property
    def is_noiseless(self) -> bool:
        return self.snr_db is None


def synthesize_spectrum(obj: ObjectModel, grid: SpectralGrid,
                        include_autocorr: bool = False) -> Spectrum:
    """Simulate the detected interference spectrum of an object.

    Each interface j at position p_j with reflectivity r_j contributes a
    fringe cos(phi_j) with

        phi_j(k) = 2*pi*p_j*k/(2*N) + 0.5*B_j*omega_k^2

    where B_j is the accumulated quadratic-phase coefficient in front of
    the interface. With include_autocorr the full squared field
    |1 + sum_j r_j exp(i*phi_j)|^2 is detected, which adds the pairwise
    object self-interference terms 2*r_j*r_m*cos(phi_j - phi_m); without
    it only the reference cross terms survive, matching the noiseless,
    autocorrelation-free signals used for training data.
    """
    n = grid.n_samples
    for p, _ in obj.interfaces:
        if p >= n:
            raise ValueError(f"interface position {p} outside grid of {n} samples")
    k = np.arange(n)
    acc = obj.accumulated_gvd(grid)
    if include_autocorr:
        field = np.ones(n, dtype=complex)
        for (p, r), b in zip(obj.interfaces, acc):
            phi = 2 * np.pi * p * k / (2 * n) + 0.5 * b * grid.omega**2
            field += r * np.exp(1j * phi)
        values = grid.envelope * np.abs(field) ** 2
    else:
        values = np.ones(n)
        for (p, r), b in zip(obj.interfaces, acc):
            phi = 2 * np.pi * p * k / (2 * n) + 0.5 * b * grid.omega**2
            values = values + r * r + 2 * r * np.cos(phi)
        values = grid.envelope * values
    return Spectrum(values, grid)


def fringe_peak_amplitude(values: np.ndarray) -> float:
    """Peak fringe amplitude: max deviation from the spectrum mean.

    Shared by add_noise and measure_snr so the two sides of the SNR
    contract use the same reference level.
    """
    values = np.asarray(values, dtype=float)
    return float(np.max(np.abs(values - values.mean())))


def add_noise(spectrum: Spectrum, spec: NoiseSpec) -> Spectrum:
    """Add white Gaussian noise calibrated to the requested SNR.

    The drawn noise vector is rescaled to its exact target sample standard
    deviation, so measure_snr recovers snr_db up to rounding regardless of
    the seed. Deterministic for a given (seed, snr_db) pair.
    """
    if spec.is_noiseless:
        return spectrum
    sigma = fringe_peak_amplitude(spectrum.values) / 10 ** (spec.snr_db / 20.0)
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal(spectrum.grid.n_samples)
    sd = noise.std()
    if sd > 0:
        noise *= sigma / sd
    return Spectrum(spectrum.values + noise, spectrum.grid)


def measure_snr(noisy: Spectrum, clean: Spectrum) -> float:
    """SNR in dB between the clean fringe peak and the residual deviation.

    Returns +inf when the residual is identically zero.
    """
    if len(noisy.values) != len(clean.values):
        raise ValueError("spectra have different lengths")
    residual = noisy.values - clean.values
    sd = residual.std()
    if sd == 0:
        return float("inf")
    return float(20.0 * np.log10(fringe_peak_amplitude(clean.values) / sd))


def resample_to_grid(values: Sequence[float], grid: SpectralGrid) -> Spectrum:
    """Ingest an externally acquired spectrum, resampling if needed.

    Experimental spectrometers emit a different sample count (2048 points
    for the reference system); uniform linear resampling maps them onto
    the grid. Wavelength linearization is assumed done upstream.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise ValueError("expected a non-empty 1-D spectrum")
    if len(values) != grid.n_samples:
        src = np.linspace(0.0, 1.0, len(values))
        dst = np.linspace(0.0, 1.0, grid.n_samples)
        values = np.interp(dst, src, values)
    return Spectrum(values, grid)
