import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icaoct import ObjectModel, synthesize_spectrum
from icaoct.analytics import analyze_peaks, peak_fwhm
from icaoct.stack import (autocorrelate, build_stack, fragment_slices,
                          ica_ascan, standard_ascan)


def brute_force_autocorr(x):
    """O(f^2) double-loop oracle, independent of the implementation."""
    f = len(x)
    out = [0.0] * (2 * f - 1)
    for m in range(2 * f - 1):
        lag = m - (f - 1)
        for n in range(f):
            if 0 <= n + lag < f:
                out[m] += x[n] * x[n + lag]
    return np.asarray(out)


class TestAutocorrelate:
    def test_ones(self):
        np.testing.assert_allclose(autocorrelate([1, 1, 1]), [1, 2, 3, 2, 1])

    def test_unit_impulse(self):
        np.testing.assert_allclose(autocorrelate([0, 1, 0]), [0, 0, 1, 0, 0])

    def test_against_brute_force(self, rng):
        x = rng.standard_normal(20)
        got = autocorrelate(x)
        want = brute_force_autocorr(x)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            autocorrelate([])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(min_value=-10, max_value=10,
                              allow_nan=False, allow_infinity=False),
                    min_size=1, max_size=24))
    def test_property_matches_oracle(self, values):
        got = autocorrelate(values)
        want = brute_force_autocorr(values)
        assert len(got) == 2 * len(values) - 1
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


class TestFragmentSlices:
    def test_remainder_distributed_from_front(self):
        slices = fragment_slices(1024, 50)
        lengths = [s.stop - s.start for s in slices]
        assert lengths[:24] == [21] * 24
        assert lengths[24:] == [20] * 26
        assert sum(lengths) == 1024
        assert slices[0].start == 0 and slices[-1].stop == 1024

    def test_too_many_fragments_rejected(self):
        with pytest.raises(ValueError):
            fragment_slices(10, 11)


class TestBuildStack:
    def test_shape_50_by_1024(self, grid):
        obj = ObjectModel([(300, 0.1)], [(300, 0.0)])
        stack = build_stack(synthesize_spectrum(obj, grid), 50)
        assert stack.shape == (50, 1024)
        assert np.all(stack >= 0)

    def test_all_zero_spectrum(self):
        stack = build_stack(np.zeros(1024), 50)
        assert stack.shape == (50, 1024)
        assert np.all(stack == 0)

    def test_cosine_rows_track_fringe_frequency(self):
        # Fragment autocorrelation preserves the fringe frequency, but the
        # residual sum-frequency term biases short-fragment rows by up to
        # a few bins around the true position.
        n = 1024
        cosine = np.cos(2 * np.pi * 200 * np.arange(n) / (2 * n))
        stack = build_stack(cosine, 50)
        argmaxes = stack.argmax(axis=1)
        assert np.all(np.abs(argmaxes - 200) <= 10)
        # the stack-average peak is unbiased
        assert abs(int(np.argmax(ica_ascan(stack))) - 200) <= 1


class TestStandardAscan:
    def test_pure_cosine_peak(self):
        n = 1024
        cosine = np.cos(2 * np.pi * 200 * np.arange(n) / (2 * n))
        assert int(np.argmax(standard_ascan(cosine))) == 200

    def test_fig2_dominant_peaks(self, grid):
        obj = ObjectModel([(360, 0.5), (620, 0.5)], [(360, 0.0), (260, 2500.0)])
        ascan = standard_ascan(synthesize_spectrum(obj, grid, include_autocorr=True))
        peaks = analyze_peaks(ascan, rel_threshold_db=-26.0, min_separation=12,
                              min_position=64)
        positions = sorted(p.position for p in peaks)
        assert len(positions) == 3
        for got, want in zip(positions, (260, 360, 620)):
            assert got == pytest.approx(want, abs=1.0)

    def test_parseval(self, grid, rng):
        values = rng.random(1024)
        windowed = values - values.mean()
        padded = np.zeros(2048)
        padded[:1024] = windowed
        transform = np.fft.fft(padded)
        assert np.sum(np.abs(transform) ** 2) == pytest.approx(
            2048 * np.sum(windowed ** 2), rel=1e-12)


class TestIcaAscan:
    def test_zero_stack(self):
        assert np.all(ica_ascan(np.zeros((50, 1024))) == 0)

    def test_midpoint_artefact_two_interfaces(self, grid):
        # pairwise fragment interference produces a peak midway between
        # the structural positions
        obj = ObjectModel([(360, 0.5), (620, 0.5)], [(360, 0.0), (260, 0.0)])
        ascan = ica_ascan(build_stack(synthesize_spectrum(obj, grid, False), 50))
        peaks = analyze_peaks(ascan, rel_threshold_db=-24.0, min_separation=40,
                              min_position=64)
        positions = sorted(p.position for p in peaks)
        assert len(positions) == 3
        assert positions[0] == pytest.approx(360, abs=2)
        assert positions[1] == pytest.approx(490, abs=3)  # (360 + 620) / 2
        assert positions[2] == pytest.approx(620, abs=2)

    @pytest.mark.parametrize("accumulated_fs2", [1000.0, 2000.0])
    def test_even_order_cancellation(self, grid, accumulated_fs2):
        p = 400
        length_mm = p * grid.axial_pixel_mm
        flat = ObjectModel([(p, 0.3)], [(p, 0.0)])
        disp = ObjectModel([(p, 0.3)],
                           [(p, accumulated_fs2 / length_mm)])

        def widths(obj):
            spectrum = synthesize_spectrum(obj, grid, False)
            std = standard_ascan(spectrum)
            ica = ica_ascan(build_stack(spectrum, 50))
            std_pk = int(np.argmax(std[64:])) + 64
            ica_pk = int(np.argmax(ica[64:])) + 64
            return peak_fwhm(std, std_pk), peak_fwhm(ica, ica_pk)

        std0, ica0 = widths(flat)
        stdb, icab = widths(disp)
        assert stdb > 1.5 * std0
        assert abs(icab - ica0) <= 0.15 * ica0

    @pytest.mark.xfail(strict=True, reason=(
        "fragment power spectra are window-limited: a ~20-sample fragment's "
        "transform mainlobe is ~25x wider than the full-band A-scan peak, so "
        "no row collapse can narrow below the standard transform"))
    def test_resolution_gain_over_standard(self, grid):
        obj = ObjectModel([(400, 0.3)], [(400, 0.0)])
        spectrum = synthesize_spectrum(obj, grid, False)
        std = standard_ascan(spectrum)
        ica = ica_ascan(build_stack(spectrum, 50))
        std_fwhm = peak_fwhm(std, int(np.argmax(std[64:])) + 64)
        ica_fwhm = peak_fwhm(ica, int(np.argmax(ica[64:])) + 64)
        assert ica_fwhm <= 0.7 * std_fwhm

    @pytest.mark.xfail(strict=True, reason=(
        "the widest-pair midpoint artefact of a 3-interface object is "
        "suppressed below the -26 dB window sidelobes of the structural "
        "responses, so no detection threshold isolates all 6 peaks"))
    def test_artefact_census_three_interfaces(self, grid):
        obj = ObjectModel([(140, 0.5), (420, 0.5), (980, 0.5)],
                          [(140, 0.0), (280, 0.0), (560, 0.0)])
        ascan = ica_ascan(build_stack(synthesize_spectrum(obj, grid, False), 50))
        peaks = analyze_peaks(ascan, rel_threshold_db=-30.0, min_separation=40,
                              min_position=64)
        expected = (140, 280, 420, 560, 700, 980)  # structurals + midpoints
        assert len(peaks) == 6
        for got, want in zip(sorted(p.position for p in peaks), expected):
            assert got == pytest.approx(want, abs=4)
