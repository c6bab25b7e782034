import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icaoct import (DegenerateGeometryError, ObjectModel, SegmentGeometry,
                    analyze_peaks, build_dispersion_map, decode_gvd,
                    effective_profile_two_interface, encode_gvd,
                    estimate_layer_gvd, ground_truth_profile, peak_fwhm,
                    profile_mae, remove_autocorr_peaks, segment_gvd_eq1,
                    segment_gvd_eq2b, synthesize_spectrum)
from icaoct.stack import standard_ascan


class TestEncodeDecode:
    def test_zero_maps_to_midpoint(self):
        assert encode_gvd(0.0) == 0.5

    def test_range_endpoints(self):
        assert encode_gvd(-5000.0) == 0.0
        assert encode_gvd(5000.0) == 1.0

    def test_out_of_range_clamps(self):
        assert encode_gvd(7000.0) == 1.0
        assert encode_gvd(-7000.0) == 0.0

    def test_decode_endpoints(self):
        assert decode_gvd(0.5) == 0.0
        assert decode_gvd(1.0) == 5000.0
        assert decode_gvd(0.0) == -5000.0

    def test_decode_rejects_out_of_domain(self):
        with pytest.raises(ValueError):
            decode_gvd(1.5)
        with pytest.raises(ValueError):
            decode_gvd(-0.1)

    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_round_trip_unit_interval(self, u):
        assert encode_gvd(decode_gvd(u)) == pytest.approx(u, abs=1e-12)

    @given(st.floats(min_value=-5000.0, max_value=5000.0))
    def test_round_trip_gvd_range(self, g):
        assert decode_gvd(encode_gvd(g)) == pytest.approx(g, abs=1e-8)

    def test_clamping_idempotent(self):
        assert encode_gvd(decode_gvd(encode_gvd(9000.0))) == encode_gvd(9000.0)


class TestGroundTruthProfile:
    def test_air_only_is_all_midpoint(self):
        profile = ground_truth_profile(ObjectModel([], []), 1024)
        assert np.all(profile == 0.5)

    def test_fig3_object_levels(self):
        # front 1000 fs^2/mm over [0, 200), layer 2000 over [200, 550)
        obj = ObjectModel([(200, 0.1), (550, 0.1)], [(200, 1000.0), (350, 2000.0)])
        profile = ground_truth_profile(obj, 1024)
        assert np.all(profile[:200] == 0.6)
        assert np.all(profile[200:550] == 0.7)
        assert np.all(profile[550:] == 0.5)

    def test_fig2_object_levels(self):
        obj = ObjectModel([(360, 0.1), (620, 0.1)], [(360, 0.0), (260, 2500.0)])
        profile = ground_truth_profile(obj, 1024)
        assert np.all(profile[:360] == 0.5)
        assert np.all(profile[360:620] == 0.75)
        assert np.all(profile[620:] == 0.5)


def constraint_solver_oracle(l_front, l_obj, beta_front, beta_obj):
    """Independent oracle: solve for the unknown segment level from the
    accumulated-GVD constraint at the first structural peak."""
    p_ac = l_obj
    p1 = l_front
    # beta_obj * p_ac + x * (p1 - p_ac) == beta_front * p1
    return (beta_front * p1 - beta_obj * p_ac) / (p1 - p_ac)


class TestSegmentFormulas:
    def test_fig2_value_matches_constraint_solver(self):
        geom = SegmentGeometry(360, 260, 0.0, 2500.0)
        assert segment_gvd_eq1(geom) == pytest.approx(-6500.0)
        assert constraint_solver_oracle(360, 260, 0.0, 2500.0) == pytest.approx(-6500.0)

    def test_bk7_segment_level_roundtrip(self):
        # the measured -850 fs^2/mm level closes the loop with the ~46 estimate
        geom = SegmentGeometry(220, 700, 2000.0, 45.714285714285715)
        assert segment_gvd_eq1(geom) == pytest.approx(-850.0, abs=1e-9)

    def test_equal_betas_identity(self):
        geom = SegmentGeometry(100, 300, 1234.5, 1234.5)
        assert segment_gvd_eq1(geom) == pytest.approx(1234.5)

    def test_degenerate_lengths_rejected(self):
        with pytest.raises(DegenerateGeometryError):
            segment_gvd_eq1(SegmentGeometry(260, 260, 0.0, 2500.0))

    def test_eq2b_returns_front_level(self):
        assert segment_gvd_eq2b(SegmentGeometry(200, 350, 1000.0, 2000.0)) == 1000.0
        assert segment_gvd_eq2b(SegmentGeometry(10, 20, 0.0, 99.0)) == 0.0
        assert segment_gvd_eq2b(SegmentGeometry(10, 20, -321.0, 99.0)) == -321.0


class TestEstimateLayerGvd:
    def test_bk7(self):
        assert estimate_layer_gvd(220, 700, 2000.0, -850.0) == pytest.approx(
            45.71, abs=0.01)

    def test_sapphire(self):
        assert estimate_layer_gvd(70, 260, 3700.0, -1300.0) == pytest.approx(
            46.15, abs=0.01)

    def test_zero_thickness_rejected(self):
        with pytest.raises(ValueError):
            estimate_layer_gvd(100, 0, 1000.0, 0.0)

    @settings(max_examples=100, deadline=None)
    @given(l_front=st.integers(min_value=1, max_value=1000),
           l_obj=st.integers(min_value=1, max_value=1000),
           beta_front=st.floats(min_value=-5000, max_value=5000),
           beta_obj=st.floats(min_value=-5000, max_value=5000))
    def test_inverse_of_eq1(self, l_front, l_obj, beta_front, beta_obj):
        if l_front == l_obj:
            return
        seg = segment_gvd_eq1(SegmentGeometry(l_front, l_obj, beta_front, beta_obj))
        back = estimate_layer_gvd(l_front, l_obj, beta_front, seg)
        assert back == pytest.approx(beta_obj, rel=1e-9, abs=1e-6)


def accumulated(profile, upto, clamped=False):
    """Sum of decoded GVD over pixels [0, upto) -- the accumulated
    density-times-length product in bin units."""
    return float(np.sum(decode_gvd(profile[:upto])))


class TestEffectiveProfile:
    def test_fig2_case_peak_in_front(self):
        obj = ObjectModel([(360, 0.5), (620, 0.5)], [(360, 0.0), (260, 2500.0)])
        profile = effective_profile_two_interface(obj, 1024)
        # segments: layer level | eq1 level | layer level, breaks at 260, 360
        assert np.all(profile[:260] == encode_gvd(2500.0))
        assert np.all(profile[260:360] == encode_gvd(-6500.0))  # clamps to 0
        assert np.all(profile[360:620] == encode_gvd(2500.0))
        assert np.all(profile[620:] == 0.5)

    def test_fig3_case_peak_between(self):
        obj = ObjectModel([(200, 0.5), (550, 0.5)], [(200, 1000.0), (350, 2000.0)])
        profile = effective_profile_two_interface(obj, 1024)
        assert np.all(profile[:200] == encode_gvd(1000.0))
        assert np.all(profile[200:350] == encode_gvd(10000.0 / 3.0))
        assert np.all(profile[350:550] == encode_gvd(1000.0))
        assert np.all(profile[550:] == 0.5)

    def test_no_dispersion_equals_ground_truth(self):
        obj = ObjectModel([(300, 0.5), (500, 0.5)], [(300, 0.0), (200, 0.0)])
        np.testing.assert_array_equal(
            effective_profile_two_interface(obj, 1024),
            ground_truth_profile(obj, 1024))

    def test_collision_rejected(self):
        obj = ObjectModel([(300, 0.5), (600, 0.5)], [(300, 0.0), (300, 1000.0)])
        with pytest.raises(DegenerateGeometryError):
            effective_profile_two_interface(obj, 1024)

    @settings(max_examples=200, deadline=None)
    @given(data=st.data())
    def test_accumulated_gvd_closure(self, data):
        # at each structural peak the effective profile accumulates the
        # same density-times-length product as the ground truth
        p1 = data.draw(st.integers(min_value=20, max_value=500), label="p1")
        thickness = data.draw(st.integers(min_value=10, max_value=400),
                              label="thickness")
        if thickness == p1:
            return
        beta_front = data.draw(st.floats(min_value=-3000, max_value=3000),
                               label="beta_front")
        beta_obj = data.draw(st.floats(min_value=-3000, max_value=3000),
                             label="beta_obj")
        p2 = p1 + thickness
        seg = segment_gvd_eq1(SegmentGeometry(p1, thickness, beta_front, beta_obj))
        if not (-5000.0 <= seg <= 5000.0):
            return  # clamped profiles cannot satisfy the constraint exactly
        obj = ObjectModel([(p1, 0.1), (p2, 0.1)],
                          [(p1, beta_front), (thickness, beta_obj)],
                          tail_gvd=0.0)
        truth = ground_truth_profile(obj, 1024)
        effective = effective_profile_two_interface(obj, 1024)
        for peak in (p1, p2):
            want = accumulated(truth, peak)
            got = accumulated(effective, peak)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-6)


class TestAnalyzePeaks:
    def test_single_cosine(self):
        n = 1024
        cosine = np.cos(2 * np.pi * 200 * np.arange(n) / (2 * n))
        # an unwindowed cosine carries -13 dB rect sidelobes; threshold above them
        peaks = analyze_peaks(standard_ascan(cosine), rel_threshold_db=-12.0)
        assert len(peaks) == 1
        assert peaks[0].position == pytest.approx(200.0, abs=0.1)

    def test_fig2_positions_and_tags(self, grid):
        obj = ObjectModel([(360, 0.5), (620, 0.5)], [(360, 0.0), (260, 2500.0)])
        ascan = standard_ascan(synthesize_spectrum(obj, grid, True))
        peaks = analyze_peaks(ascan, rel_threshold_db=-26.0, min_separation=12,
                              min_position=64, known_interfaces=(360, 620))
        assert len(peaks) == 3
        by_pos = sorted(peaks, key=lambda p: p.position)
        assert by_pos[0].position == pytest.approx(260, abs=1)
        assert by_pos[0].kind == "autocorrelation"
        assert by_pos[1].position == pytest.approx(360, abs=1)
        assert by_pos[1].kind == "structural"
        assert by_pos[2].position == pytest.approx(620, abs=1)
        assert by_pos[2].kind == "structural"

    def test_gaussian_bump_fwhm(self):
        x = np.arange(1024, dtype=float)
        sigma = 9.0
        bump = np.exp(-0.5 * ((x - 300) / sigma) ** 2)
        bump += np.exp(-0.5 * ((x - 700) / (2 * sigma)) ** 2)
        peaks = analyze_peaks(bump, rel_threshold_db=-20)
        assert len(peaks) == 2
        assert peaks[0].fwhm == pytest.approx(2.355 * sigma, rel=0.05)
        assert peaks[1].fwhm == pytest.approx(2.355 * 2 * sigma, rel=0.05)

    def test_all_zero_gives_empty(self):
        assert analyze_peaks(np.zeros(256)) == []

    def test_min_separation_keeps_strongest(self):
        a = np.zeros(256)
        a[100] = 1.0
        a[102] = 0.8
        a[130] = 0.5
        peaks = analyze_peaks(a, min_separation=5)
        positions = [round(p.position) for p in peaks]
        assert 100 in positions and 130 in positions
        assert 102 not in positions


class TestRemoveAutocorrPeaks:
    def fig2(self, grid, gvd=2500.0):
        obj = ObjectModel([(360, 0.5), (620, 0.5)], [(360, 0.0), (260, gvd)])
        return synthesize_spectrum(obj, grid, include_autocorr=True)

    def test_empty_regions_identity(self, grid):
        spectrum = self.fig2(grid)
        out = remove_autocorr_peaks(spectrum, [])
        np.testing.assert_allclose(out.values, spectrum.values, rtol=1e-9)

    def test_fig2_autocorr_peak_suppressed(self, grid):
        spectrum = self.fig2(grid)
        before = standard_ascan(spectrum)
        after = standard_ascan(remove_autocorr_peaks(spectrum, [(255, 265)]))
        suppression_db = 20 * np.log10(before[255:266].max() / after[255:266].max())
        assert suppression_db >= 20.0
        for target in (360, 620):
            b = before[target - 30:target + 31]
            a = after[target - 30:target + 31]
            assert abs(int(np.argmax(a)) - int(np.argmax(b))) < 1
            assert abs(a.max() - b.max()) / b.max() < 0.05

    def test_structural_peak_suppressed_when_zeroed(self, grid):
        spectrum = self.fig2(grid)
        before = standard_ascan(spectrum)
        after = standard_ascan(remove_autocorr_peaks(spectrum, [(355, 365)]))
        suppression_db = 20 * np.log10(before[355:366].max() / after[355:366].max())
        assert suppression_db >= 20.0

    def test_projection_idempotent(self, grid):
        spectrum = self.fig2(grid)
        once = remove_autocorr_peaks(spectrum, [(255, 265)])
        twice = remove_autocorr_peaks(once, [(255, 265)])
        rel = np.max(np.abs(twice.values - once.values)) / np.max(np.abs(once.values))
        assert rel < 1e-6

    def test_zeroed_bins_exactly_zero(self, grid):
        spectrum = self.fig2(grid)
        out = remove_autocorr_peaks(spectrum, [(255, 265)])
        padded = np.zeros(2048)
        padded[:1024] = out.values
        transform = np.fft.fft(padded)
        assert np.max(np.abs(transform[255:266])) < 1e-6 * np.max(np.abs(transform))

    def test_bad_intervals_rejected(self, grid):
        spectrum = self.fig2(grid)
        with pytest.raises(ValueError):
            remove_autocorr_peaks(spectrum, [(10, 5)])
        with pytest.raises(ValueError):
            remove_autocorr_peaks(spectrum, [(10, 20), (15, 30)])
        with pytest.raises(ValueError):
            remove_autocorr_peaks(spectrum, [(1000, 1030)])


class TestDispersionMap:
    def test_single_profile(self):
        m = build_dispersion_map([np.full(1024, 0.5)])
        assert m.shape == (1, 1024)

    def test_tilted_layer_boundary_monotone(self):
        # simulate a laterally tilted layer: boundary moves with row index
        profiles = []
        for row in range(64):
            p1 = 200 + row
            obj = ObjectModel([(p1, 0.1), (p1 + 150, 0.1)],
                              [(p1, 0.0), (150, 3000.0)])
            profiles.append(ground_truth_profile(obj, 1024))
        m = build_dispersion_map(profiles)
        boundaries = [int(np.argmax(row > 0.5)) for row in m]
        assert boundaries == sorted(boundaries)
        assert boundaries[0] == 200 and boundaries[-1] == 263

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            build_dispersion_map([])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            build_dispersion_map([np.zeros(10), np.zeros(12)])


class TestProfileMae:
    def test_identical(self):
        p = np.linspace(0, 1, 128)
        assert profile_mae(p, p) == 0.0

    def test_extremes(self):
        assert profile_mae(np.zeros(64), np.ones(64)) == 1.0

    def test_half_shifted(self):
        a = np.full(128, 0.5)
        b = np.full(128, 0.5)
        b[:64] = 0.75
        assert profile_mae(a, b) == pytest.approx(0.125)

    def test_mismatch_rejected(self):
        with pytest.raises(ValueError):
            profile_mae(np.zeros(10), np.zeros(11))
